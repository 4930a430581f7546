"""Dataset writer and reader.

On-disk layout of a dataset root::

    rgb/000000.png        8-bit RGB
    depth/000000.png      16-bit, meters = value * depth_scale, 0 = no geometry
    class/000000.png      16-bit category ids
    instance/000000.png   16-bit per-image instance ids
    scene_gt.json         image_id -> list of pose records (camera from model)
    scene_camera.json     image_id -> intrinsics, depth scale, world-to-camera pose
    models_info.json      obj_id -> diameter / min / size in meters
    coco_annotations.json COCO detection annotations
    manifest.json         per-image provenance and train/test split

Image ids are the zero-based file number plus one. Every file is written to a
temporary name first and then renamed, so readers never see a torn file.
"""

from __future__ import annotations

import json
import os
import shutil
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DatasetValidationError, DatasetWriteError
from .geometry import CameraIntrinsics, Mesh, ModelInfo, RigidTransform, mesh_stats

DEPTH_SCALE = 1e-4  # meters per depth unit
UNITS = "m"
MAP_KINDS = ("rgb", "depth", "class", "instance")
FORMAT = "synthforge-dataset/1"
DET_TOL = 1e-6


def file_stem(index: int) -> str:
    return f"{int(index):06d}"


def bbox_from_mask(instance_map: np.ndarray, instance_id: int):
    """Tight ``([x, y, w, h], area)`` of the pixels equal to ``instance_id``, or None if absent."""
    if instance_id <= 0:
        raise ValueError("instance id must be positive")
    mask = np.asarray(instance_map) == instance_id
    rows = np.flatnonzero(mask.any(axis=1))
    if len(rows) == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    x, y = int(cols[0]), int(rows[0])
    bbox = [x, y, int(cols[-1]) - x + 1, int(rows[-1]) - y + 1]
    return bbox, int(mask.sum())


@dataclass(frozen=True, eq=False)
class PoseRecord:
    image_id: int
    obj_id: int
    rotation: np.ndarray  # (3, 3) camera from model
    translation: np.ndarray  # (3,) meters
    instance_id: int

    @property
    def pose(self) -> RigidTransform:
        return RigidTransform(self.rotation, self.translation)

    def to_dict(self) -> dict:
        return {
            "obj_id": int(self.obj_id),
            "instance_id": int(self.instance_id),
            "cam_R_m2c": [float(x) for x in np.asarray(self.rotation).reshape(9)],
            "cam_t_m2c": [float(x) for x in np.asarray(self.translation).reshape(3)],
        }

    @classmethod
    def from_dict(cls, image_id: int, d: dict) -> "PoseRecord":
        return cls(int(image_id), int(d["obj_id"]), np.array(d["cam_R_m2c"], dtype=float).reshape(3, 3),
                   np.array(d["cam_t_m2c"], dtype=float), int(d["instance_id"]))


def _check_pose(p: PoseRecord) -> None:
    r = np.asarray(p.rotation, dtype=float)
    t = np.asarray(p.translation, dtype=float)
    if r.shape != (3, 3) or t.shape != (3,) or not (np.isfinite(r).all() and np.isfinite(t).all()):
        raise DatasetValidationError(f"image {p.image_id}: malformed pose for instance {p.instance_id}")
    if abs(np.linalg.det(r) - 1.0) > DET_TOL or np.abs(r @ r.T - np.eye(3)).max() > DET_TOL:
        raise DatasetValidationError(
            f"image {p.image_id}: rotation of instance {p.instance_id} is not a proper rotation "
            f"(det {np.linalg.det(r):.6g})"
        )


# ---------------------------------------------------------------- files


def _atomic(path: str, write) -> None:
    tmp = path + ".tmp"
    write(tmp)
    os.replace(tmp, path)


def write_png(path: str, array: np.ndarray) -> None:
    a = np.ascontiguousarray(array)
    if a.dtype == np.uint16:
        im = Image.fromarray(a)  # mode I;16
    elif a.dtype == np.uint8:
        im = Image.fromarray(a)
    else:
        raise TypeError(f"unsupported image dtype {a.dtype}")
    _atomic(path, lambda p: im.save(p, format="PNG", compress_level=1))


def read_png(path: str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im).copy()


def encode_depth(depth: np.ndarray, scale: float = DEPTH_SCALE) -> np.ndarray:
    """Meters to uint16 units, rounded to nearest. Out-of-range depths become 0 (no data)."""
    units = np.rint(np.asarray(depth, dtype=np.float64) / scale)
    units[(units > 65535) | ~np.isfinite(units) | (units < 0)] = 0
    return units.astype(np.uint16)


def decode_depth(units: np.ndarray, scale: float = DEPTH_SCALE) -> np.ndarray:
    return np.asarray(units, dtype=np.float64) * scale


def write_json(path: str, obj) -> None:
    def w(p):
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=1, allow_nan=False)
            fh.write("\n")

    _atomic(path, w)


def read_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------- models info


def write_models_info(meshes: dict, categories=None, path: str | None = None) -> dict:
    """``{obj_id: ModelInfo fields}`` from one mesh per category (keys as strings for JSON)."""
    ids = sorted(set(meshes) | set(categories or ()))
    out = {}
    for cid in ids:
        mesh = meshes.get(cid)
        if not isinstance(mesh, Mesh):
            raise DatasetValidationError(f"category {cid} has no mesh")
        out[str(int(cid))] = mesh_stats(mesh).to_dict()
    if path is not None:
        write_json(path, out)
    return out


# ---------------------------------------------------------------- writer


@dataclass
class DatasetManifest:
    root: str
    images: list  # dicts: image_id, file_name, procedure, seed, scene, view, split [, source]
    seed: int | None = None
    split_ratio: float | None = None
    extra: dict = field(default_factory=dict)

    def counts(self) -> dict:
        return dict(sorted(Counter(im["procedure"] for im in self.images).items()))

    def split_counts(self) -> dict:
        out: dict = {}
        for im in self.images:
            c = out.setdefault(im["procedure"], {"train": 0, "test": 0})
            c[im["split"]] += 1
        return dict(sorted(out.items()))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "root": self.root,
            "seed": self.seed,
            "split_ratio": self.split_ratio,
            "num_images": len(self.images),
            "counts": self.counts(),
            "split_counts": self.split_counts(),
            **self.extra,
            "images": self.images,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        known = {"format", "root", "seed", "split_ratio", "num_images", "counts", "split_counts", "images"}
        return cls(d.get("root", "."), list(d["images"]), d.get("seed"), d.get("split_ratio"),
                   {k: v for k, v in d.items() if k not in known})


def camera_entry(k: CameraIntrinsics, camera: RigidTransform, depth_scale: float = DEPTH_SCALE) -> dict:
    return {
        "cam_K": [float(x) for x in k.matrix.reshape(9)],
        "width": int(k.width),
        "height": int(k.height),
        "depth_scale": depth_scale,
        "units": UNITS,
        "cam_R_w2c": [float(x) for x in camera.rotation.reshape(9)],
        "cam_t_w2c": [float(x) for x in camera.translation],
    }


def annotations_for(instance_map: np.ndarray, poses) -> list[dict]:
    """COCO annotation bodies (no ids) for every pose whose instance has a visible pixel."""
    out = []
    for p in poses:
        got = bbox_from_mask(instance_map, p.instance_id)
        if got is None:
            continue
        bbox, area = got
        out.append({"category_id": int(p.obj_id), "bbox": bbox, "area": area, "iscrowd": 0,
                    "instance_id": int(p.instance_id)})
    return out


class DatasetWriter:
    """Incremental writer: image files go out as they arrive, indexes once in :meth:`finish`."""

    def __init__(self, root, categories: dict, models_info: dict, seed=None, split_ratio=None, extra=None):
        self.root = str(root)
        self.categories = {int(k): str(v) for k, v in categories.items()}
        self.models_info = {str(int(k)): (v.to_dict() if isinstance(v, ModelInfo) else dict(v))
                            for k, v in models_info.items()}
        missing = [c for c in self.categories if str(c) not in self.models_info]
        if missing:
            raise DatasetValidationError(f"no model info for categories {missing}")
        self.seed = seed
        self.split_ratio = split_ratio
        self.extra = dict(extra or {})
        self._images: dict[int, dict] = {}
        self._indices: set[int] = set()
        self._written: list[str] = []
        for kind in MAP_KINDS:
            os.makedirs(os.path.join(self.root, kind), exist_ok=True)

    # validation happens before any file of the image is touched
    def _validate(self, image_id: int, index: int, poses, size) -> None:
        if image_id <= 0 or index < 0:
            raise DatasetValidationError(f"image id {image_id} / index {index} out of range")
        if image_id in self._images or index in self._indices:
            raise DatasetValidationError(f"image id {image_id} or file index {index} used twice")
        seen = set()
        for p in poses:
            if p.image_id != image_id:
                raise DatasetValidationError(f"pose for image {p.image_id} filed under image {image_id}")
            if p.obj_id not in self.categories:
                raise DatasetValidationError(f"image {image_id}: unknown obj_id {p.obj_id}")
            if not 0 < p.instance_id <= 65535 or p.instance_id in seen:
                raise DatasetValidationError(f"image {image_id}: bad or repeated instance id {p.instance_id}")
            seen.add(p.instance_id)
            _check_pose(p)
        w, h = size
        if w <= 0 or h <= 0:
            raise DatasetValidationError(f"image {image_id}: empty frame")

    def _register(self, image_id, index, k, camera_json, poses, annotations, provenance):
        self._images[image_id] = {
            "index": index,
            "width": int(k.width),
            "height": int(k.height),
            "camera": camera_json,
            "poses": [p.to_dict() for p in poses],
            "annotations": annotations,
            "provenance": dict(provenance),
        }
        self._indices.add(index)

    def _paths(self, index: int) -> dict:
        stem = file_stem(index)
        return {kind: os.path.join(self.root, kind, stem + ".png") for kind in MAP_KINDS}

    def add_frames(self, image_id: int, index: int, frames, poses, provenance: dict) -> list[dict]:
        """Validate, then write the four image files of one rendered frame."""
        k = frames.intrinsics
        self._validate(image_id, index, poses, (k.width, k.height))
        shapes = {frames.rgb.shape[:2], frames.depth.shape, frames.class_map.shape, frames.instance_map.shape}
        if shapes != {(k.height, k.width)}:
            raise DatasetValidationError(f"image {image_id}: buffer shapes {shapes} disagree with {k.width}x{k.height}")
        stray = set(np.unique(frames.instance_map).tolist()) - {0} - {p.instance_id for p in poses}
        if stray:
            raise DatasetValidationError(f"image {image_id}: instance ids {sorted(stray)} have no pose")
        paths = self._paths(index)
        arrays = {
            "rgb": frames.rgb.astype(np.uint8),
            "depth": encode_depth(frames.depth),
            "class": frames.class_map.astype(np.uint16),
            "instance": frames.instance_map.astype(np.uint16),
        }
        try:
            for kind in MAP_KINDS:
                write_png(paths[kind], arrays[kind])
                self._written.append(paths[kind])
        except OSError as e:
            raise DatasetWriteError(f"writing image {image_id} failed: {e}", self._written) from e
        anns = annotations_for(frames.instance_map, poses)
        self._register(image_id, index, k, camera_entry(k, frames.camera), poses, anns, provenance)
        return anns

    def add_copy(self, src_root: str, src_index: int, image_id: int, index: int, poses, annotations,
                 camera_json: dict, provenance: dict) -> None:
        """Copy an already written image (all four maps) under a new id."""
        k = CameraIntrinsics.from_matrix(np.array(camera_json["cam_K"]).reshape(3, 3),
                                         camera_json["width"], camera_json["height"])
        self._validate(image_id, index, poses, (k.width, k.height))
        src = {kind: os.path.join(src_root, kind, file_stem(src_index) + ".png") for kind in MAP_KINDS}
        dst = self._paths(index)
        try:
            for kind in MAP_KINDS:
                _atomic(dst[kind], lambda p, s=src[kind]: shutil.copyfile(s, p))
                self._written.append(dst[kind])
        except OSError as e:
            raise DatasetWriteError(f"copying image {image_id} failed: {e}", self._written) from e
        anns = [{key: a[key] for key in ("category_id", "bbox", "area", "iscrowd", "instance_id") if key in a}
                for a in annotations]
        self._register(image_id, index, k, dict(camera_json), poses, anns, provenance)

    def finish(self) -> DatasetManifest:
        """Write the JSON indexes (images in id order) and return the manifest."""
        images, anns, scene_gt, scene_camera, man_images = [], [], {}, {}, []
        ann_id = 0
        for image_id in sorted(self._images):
            rec = self._images[image_id]
            name = file_stem(rec["index"]) + ".png"
            images.append({"id": image_id, "file_name": "rgb/" + name, "width": rec["width"], "height": rec["height"]})
            for a in rec["annotations"]:
                ann_id += 1
                anns.append({"id": ann_id, "image_id": image_id, **a})
            scene_gt[str(image_id)] = rec["poses"]
            scene_camera[str(image_id)] = rec["camera"]
            man_images.append({"image_id": image_id, "file_name": name, **rec["provenance"]})
        coco = {
            "images": images,
            "annotations": anns,
            "categories": [{"id": c, "name": n} for c, n in sorted(self.categories.items())],
        }
        manifest = DatasetManifest(".", man_images, self.seed, self.split_ratio, self.extra)
        try:
            write_json(os.path.join(self.root, "models_info.json"), dict(sorted(self.models_info.items(), key=lambda kv: int(kv[0]))))
            write_json(os.path.join(self.root, "scene_gt.json"), scene_gt)
            write_json(os.path.join(self.root, "scene_camera.json"), scene_camera)
            write_json(os.path.join(self.root, "coco_annotations.json"), coco)
            write_json(os.path.join(self.root, "manifest.json"), manifest.to_dict())
        except OSError as e:
            raise DatasetWriteError(f"writing dataset indexes failed: {e}", self._written) from e
        return manifest


@dataclass(eq=False)
class ImageEntry:
    """One rendered image with its ground truth, as handed to :func:`write_dataset`."""

    image_id: int
    frames: object  # render.FrameSet
    poses: list
    provenance: dict = field(default_factory=dict)
    index: int | None = None  # file number, defaults to image_id - 1


def write_dataset(entries, root, categories: dict, meshes: dict, seed=None, split_ratio=None, extra=None) -> DatasetManifest:
    """Write a complete dataset. All entries are validated before the first file is created."""
    entries = list(entries)
    ids = [e.image_id for e in entries]
    idx = [e.image_id - 1 if e.index is None else e.index for e in entries]
    if len(set(ids)) != len(ids) or len(set(idx)) != len(idx):
        raise DatasetValidationError("image ids or file indices collide")
    for e in entries:
        for p in e.poses:
            if p.obj_id not in categories:
                raise DatasetValidationError(f"image {e.image_id}: unknown obj_id {p.obj_id}")
            _check_pose(p)
    info = write_models_info(meshes, categories)
    writer = DatasetWriter(root, categories, info, seed, split_ratio, extra)
    for e, i in zip(entries, idx):
        writer.add_frames(e.image_id, i, e.frames, e.poses, e.provenance)
    return writer.finish()


# ---------------------------------------------------------------- reader


class Dataset:
    """Read access to a dataset root."""

    def __init__(self, root):
        self.root = str(root)
        j = lambda name: read_json(os.path.join(self.root, name))  # noqa: E731
        self.coco = j("coco_annotations.json")
        self.scene_camera = {int(k): v for k, v in j("scene_camera.json").items()}
        self.scene_gt = {int(k): [PoseRecord.from_dict(int(k), d) for d in v] for k, v in j("scene_gt.json").items()}
        self.models_info = {int(k): ModelInfo.from_dict(v) for k, v in j("models_info.json").items()}
        self.manifest = DatasetManifest.from_dict(j("manifest.json"))
        self.images = {im["id"]: im for im in self.coco["images"]}
        self.categories = {c["id"]: c["name"] for c in self.coco["categories"]}
        self._anns: dict[int, list] = {i: [] for i in self.images}
        for a in self.coco["annotations"]:
            self._anns.setdefault(a["image_id"], []).append(a)

    @property
    def image_ids(self) -> list[int]:
        return sorted(self.images)

    def annotations(self, image_id: int) -> list[dict]:
        return self._anns.get(image_id, [])

    def path(self, kind: str, image_id: int) -> str:
        name = os.path.basename(self.images[image_id]["file_name"])
        return os.path.join(self.root, kind, name)

    def rgb(self, image_id: int) -> np.ndarray:
        return read_png(self.path("rgb", image_id))

    def depth(self, image_id: int) -> np.ndarray:
        return decode_depth(read_png(self.path("depth", image_id)), self.scene_camera[image_id]["depth_scale"])

    def class_map(self, image_id: int) -> np.ndarray:
        return read_png(self.path("class", image_id))

    def instance_map(self, image_id: int) -> np.ndarray:
        return read_png(self.path("instance", image_id))

    def intrinsics(self, image_id: int) -> CameraIntrinsics:
        c = self.scene_camera[image_id]
        return CameraIntrinsics.from_matrix(np.array(c["cam_K"]).reshape(3, 3), c["width"], c["height"])

    def camera(self, image_id: int) -> RigidTransform:
        c = self.scene_camera[image_id]
        return RigidTransform(np.array(c["cam_R_w2c"]).reshape(3, 3), np.array(c["cam_t_w2c"]))


def read_dataset(root) -> Dataset:
    return Dataset(root)
