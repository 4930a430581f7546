"""Ground-truth overlays: 2D boxes with labels and projected 3D boxes with object axes.

Overlays return a modified copy of the input image and only touch the pixels
of the primitives they draw. Lines use integer midpoint (Bresenham) stepping
between rounded endpoints; anything outside the frame is skipped.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._font import GLYPHS
from .geometry import BOX_EDGES, CameraIntrinsics, ModelInfo, RigidTransform, local_box_corners

NEAR = 0.01
AXIS_COLORS = ((255, 0, 0), (0, 255, 0), (0, 0, 255))
PALETTE = (
    (255, 200, 0), (0, 200, 255), (255, 0, 200), (120, 255, 0),
    (255, 120, 60), (150, 100, 255), (0, 255, 170), (255, 255, 255),
)
# endpoints farther than this outside the frame are clipped before stepping
_CLIP_MARGIN = 4096


class BehindCameraWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OverlayStyle:
    thickness: int = 1
    colors: dict = field(default_factory=dict)  # category id -> (r, g, b)
    axis_length: float = 0.5  # fraction of the object diameter
    font_size: int = 8  # pixels; glyphs scale by font_size // 8
    show_labels: bool = True

    def __post_init__(self):
        if int(self.thickness) < 1:
            raise ValueError("thickness must be >= 1")
        if not 0.0 < self.axis_length <= 2.0:
            raise ValueError("axis_length must lie in (0, 2]")
        if self.font_size < 8:
            raise ValueError("font_size must be >= 8")

    def color(self, category_id: int) -> tuple:
        c = self.colors.get(category_id)
        return tuple(c) if c is not None else PALETTE[(int(category_id) - 1) % len(PALETTE)]


def _round(x) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def line_pixels(x0: int, y0: int, x1: int, y1: int) -> np.ndarray:
    """(n, 2) integer pixels of the segment, endpoints included (all-octant Bresenham)."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    x, y = x0, y0
    while True:
        out.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return np.array(out, dtype=np.int64)


def _clip_segment(p0, p1, lo, hi):
    """Liang-Barsky clip of a 2D segment to the box [lo, hi]; None when fully outside."""
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    t0, t1 = 0.0, 1.0
    for axis in range(2):
        for p, q in ((-d[axis], p0[axis] - lo[axis]), (d[axis], hi[axis] - p0[axis])):
            if p == 0:
                if q < 0:
                    return None
            else:
                r = q / p
                if p < 0:
                    t0 = max(t0, r)
                else:
                    t1 = min(t1, r)
    if t0 > t1:
        return None
    return p0 + t0 * d, p0 + t1 * d


def _stamp(img: np.ndarray, pts: np.ndarray, color, thickness: int) -> None:
    h, w = img.shape[:2]
    if thickness > 1:
        off = np.arange(-((thickness - 1) // 2), thickness // 2 + 1)
        ox, oy = np.meshgrid(off, off)
        pts = (pts[:, None, :] + np.stack([ox.ravel(), oy.ravel()], axis=1)[None]).reshape(-1, 2)
    keep = (pts[:, 0] >= 0) & (pts[:, 0] < w) & (pts[:, 1] >= 0) & (pts[:, 1] < h)
    pts = pts[keep]
    img[pts[:, 1], pts[:, 0]] = color


def draw_line(img: np.ndarray, p0, p1, color, thickness: int = 1) -> None:
    """Draw the segment between image points ``p0`` and ``p1`` in place."""
    h, w = img.shape[:2]
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if not (np.isfinite(p0).all() and np.isfinite(p1).all()):
        return
    lo = np.array([-_CLIP_MARGIN, -_CLIP_MARGIN], dtype=float)
    hi = np.array([w + _CLIP_MARGIN, h + _CLIP_MARGIN], dtype=float)
    if (p0 < lo).any() or (p0 > hi).any() or (p1 < lo).any() or (p1 > hi).any():
        seg = _clip_segment(p0, p1, lo, hi)
        if seg is None:
            return
        p0, p1 = seg
    a, b = _round(p0), _round(p1)
    _stamp(img, line_pixels(int(a[0]), int(a[1]), int(b[0]), int(b[1])), color, thickness)


def rectangle_pixels(x: int, y: int, w: int, h: int, thickness: int = 1) -> np.ndarray:
    """Perimeter pixels of the box covering columns x..x+w-1 and rows y..y+h-1, drawn inward."""
    x1, y1 = x + w - 1, y + h - 1
    yy, xx = np.mgrid[y : y1 + 1, x : x1 + 1]
    ring = (xx - x < thickness) | (x1 - xx < thickness) | (yy - y < thickness) | (y1 - yy < thickness)
    return np.stack([xx[ring], yy[ring]], axis=1)


def _glyph(ch: str) -> np.ndarray:
    code = ord(ch)
    if not 0x20 <= code <= 0x7E:
        code = ord("?")
    rows = bytes.fromhex(GLYPHS[code - 0x20])
    return np.unpackbits(np.frombuffer(rows, dtype=np.uint8)).reshape(8, 8).astype(bool)


def text_mask(text: str, scale: int = 1) -> np.ndarray:
    if not text:
        return np.zeros((8 * scale, 0), dtype=bool)
    m = np.hstack([_glyph(c) for c in text])
    return np.kron(m, np.ones((scale, scale), dtype=bool)).astype(bool)


def draw_label(img: np.ndarray, text: str, x: int, y: int, color, clip=None, scale: int = 1) -> None:
    """Text on a filled background of ``color`` with its top-left at (x, y), clipped to ``clip`` (x0, y0, x1, y1)."""
    h, w = img.shape[:2]
    mask = text_mask(text, scale)
    bh, bw = mask.shape[0] + 2, mask.shape[1] + 2
    x0, y0, x1, y1 = clip if clip is not None else (0, 0, w - 1, h - 1)
    x0, y0, x1, y1 = max(x0, 0), max(y0, 0), min(x1, w - 1), min(y1, h - 1)
    lum = 0.299 * color[0] + 0.587 * color[1] + 0.114 * color[2]
    ink = (0, 0, 0) if lum > 128 else (255, 255, 255)
    yy, xx = np.mgrid[0:bh, 0:bw]
    body = np.zeros((bh, bw), dtype=bool)
    body[1:-1, 1:-1] = mask
    px, py = xx + x, yy + y
    ok = (px >= x0) & (px <= x1) & (py >= y0) & (py <= y1)
    img[py[ok & ~body], px[ok & ~body]] = color
    img[py[ok & body], px[ok & body]] = ink


def overlay_2d(rgb: np.ndarray, annotations, style: OverlayStyle = OverlayStyle(), categories: dict | None = None) -> np.ndarray:
    """Draw COCO boxes (and category labels inside their top-left corner) on a copy of ``rgb``."""
    out = np.array(rgb, dtype=np.uint8, copy=True)
    for a in annotations:
        x, y, w, h = (int(round(v)) for v in a["bbox"])
        if w < 1 or h < 1:
            continue
        color = style.color(a["category_id"])
        _stamp(out, rectangle_pixels(x, y, w, h, min(style.thickness, w, h)), color, 1)
        if style.show_labels:
            name = (categories or {}).get(a["category_id"], str(a["category_id"]))
            draw_label(out, name, x, y, color, clip=(x, y, x + w - 1, y + h - 1), scale=style.font_size // 8)
    return out


def _clip_near(a: np.ndarray, b: np.ndarray, near: float = NEAR):
    if a[2] < near and b[2] < near:
        return None
    if a[2] < near:
        a = a + (near - a[2]) / (b[2] - a[2]) * (b - a)
    elif b[2] < near:
        b = b + (near - b[2]) / (a[2] - b[2]) * (a - b)
    return a, b


def _to_image(k: CameraIntrinsics, p: np.ndarray) -> np.ndarray:
    return np.array([k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy])


def box_and_axes_segments(pose: RigidTransform, info: ModelInfo, k: CameraIntrinsics, axis_length: float):
    """Image-space segments ``[(p0, p1, kind)]`` of the projected box edges and axes after near clipping.

    ``kind`` is ``"box"`` or an axis index 0..2.
    """
    corners = pose.apply(local_box_corners(info))
    axes_end = pose.apply(np.eye(3) * (axis_length * info.diameter))
    origin = np.asarray(pose.translation, dtype=float)
    segs = []
    for i, j in BOX_EDGES:
        c = _clip_near(corners[i], corners[j])
        if c is not None:
            segs.append((_to_image(k, c[0]), _to_image(k, c[1]), "box"))
    for axis in range(3):
        c = _clip_near(origin, axes_end[axis])
        if c is not None:
            segs.append((_to_image(k, c[0]), _to_image(k, c[1]), axis))
    return segs


def overlay_3d(rgb: np.ndarray, pose, info: ModelInfo, k: CameraIntrinsics, style: OverlayStyle = OverlayStyle(),
               category_id: int | None = None) -> np.ndarray:
    """Draw the projected bounding box (12 edges) and the X/Y/Z axes of one object on a copy of ``rgb``.

    ``pose`` is camera-from-model (a RigidTransform or anything with ``.pose``).
    If every box corner is behind the camera nothing is drawn and a
    :class:`BehindCameraWarning` is issued.
    """
    if not isinstance(pose, RigidTransform):
        if category_id is None:
            category_id = getattr(pose, "obj_id", None)
        pose = pose.pose
    out = np.array(rgb, dtype=np.uint8, copy=True)
    corners = pose.apply(local_box_corners(info))
    if (corners[:, 2] <= 0).all():
        warnings.warn("object box is entirely behind the camera; nothing drawn", BehindCameraWarning, stacklevel=2)
        return out
    box_color = style.color(category_id if category_id is not None else 1)
    for p0, p1, kind in box_and_axes_segments(pose, info, k, style.axis_length):
        color = box_color if kind == "box" else AXIS_COLORS[kind]
        draw_line(out, p0, p1, color, style.thickness)
    return out


def visualize_dataset(root, mode: str = "both", style: OverlayStyle = OverlayStyle(), out_root=None, image_ids=None) -> list[str]:
    """Write ``viz2d/`` and/or ``viz3d/`` overlays for a dataset; returns the written paths."""
    from .annotate import read_dataset, write_png

    if mode not in ("2d", "3d", "both"):
        raise ValueError(f"mode must be 2d, 3d or both, got {mode!r}")
    ds = read_dataset(root)
    out_root = str(out_root or root)
    written = []
    modes = ("2d", "3d") if mode == "both" else (mode,)
    for m in modes:
        os.makedirs(os.path.join(out_root, "viz" + m), exist_ok=True)
    for iid in image_ids or ds.image_ids:
        rgb = ds.rgb(iid)
        name = os.path.basename(ds.images[iid]["file_name"])
        if "2d" in modes:
            img = overlay_2d(rgb, ds.annotations(iid), style, ds.categories)
            p = os.path.join(out_root, "viz2d", name)
            write_png(p, img)
            written.append(p)
        if "3d" in modes:
            img = rgb
            k = ds.intrinsics(iid)
            visible = {a.get("instance_id") for a in ds.annotations(iid)}
            for rec in ds.scene_gt.get(iid, []):
                if rec.instance_id not in visible:
                    continue
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", BehindCameraWarning)
                    img = overlay_3d(img, rec, ds.models_info[rec.obj_id], k, style)
            p = os.path.join(out_root, "viz3d", name)
            write_png(p, img)
            written.append(p)
    return written
