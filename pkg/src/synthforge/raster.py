"""Z-buffer triangle rasterizer (numba).

Pixel (x, y) samples the image point (x, y): pixel centers sit on integer
coordinates, matching :func:`synthforge.geometry.project`. Depth is
interpolated as 1/z, which is exact for planar triangles under perspective.
Shared edges follow a top-left style tie rule so no pixel is covered twice
by adjacent triangles.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _edge(ax, ay, bx, by, px, py):
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax)


@njit(cache=True)
def _owns(ax, ay, bx, by):
    dy = by - ay
    return dy > 0.0 or (dy == 0.0 and bx - ax < 0.0)


@njit(cache=True)
def _clip_near(tri, near, out):
    """Clip one camera-space triangle against z >= near. Returns the vertex count (0, 3 or 4)."""
    n = 0
    for i in range(3):
        j = (i + 1) % 3
        zi = tri[i, 2]
        zj = tri[j, 2]
        if zi >= near:
            out[n, 0] = tri[i, 0]
            out[n, 1] = tri[i, 1]
            out[n, 2] = tri[i, 2]
            n += 1
        if (zi >= near) != (zj >= near):
            t = (near - zi) / (zj - zi)
            out[n, 0] = tri[i, 0] + t * (tri[j, 0] - tri[i, 0])
            out[n, 1] = tri[i, 1] + t * (tri[j, 1] - tri[i, 1])
            out[n, 2] = near
            n += 1
    return n


@njit(cache=True)
def rasterize(tris, fx, fy, cx, cy, width, height, near, far, depth, ids):
    """Rasterize camera-space triangles ``tris`` (T, 3, 3) into ``depth`` / ``ids`` in place.

    ``depth`` must be initialised to +inf and ``ids`` to -1. The nearest
    fragment wins; on exact depth ties the earlier triangle is kept.
    """
    poly = np.empty((4, 3))
    sx = np.empty(4)
    sy = np.empty(4)
    iz = np.empty(4)
    for t in range(tris.shape[0]):
        n = _clip_near(tris[t], near, poly)
        if n < 3:
            continue
        for k in range(n):
            iz[k] = 1.0 / poly[k, 2]
            sx[k] = fx * poly[k, 0] * iz[k] + cx
            sy[k] = fy * poly[k, 1] * iz[k] + cy
        for f in range(1, n - 1):
            i0, i1, i2 = 0, f, f + 1
            area = _edge(sx[i0], sy[i0], sx[i1], sy[i1], sx[i2], sy[i2])
            if area == 0.0 or not math.isfinite(area):
                continue
            if area < 0.0:
                i1, i2 = i2, i1
                area = -area
            x0, y0, x1, y1, x2, y2 = sx[i0], sy[i0], sx[i1], sy[i1], sx[i2], sy[i2]
            xmin = max(0, int(math.ceil(min(x0, x1, x2))))
            xmax = min(width - 1, int(math.floor(max(x0, x1, x2))))
            ymin = max(0, int(math.ceil(min(y0, y1, y2))))
            ymax = min(height - 1, int(math.floor(max(y0, y1, y2))))
            if xmin > xmax or ymin > ymax:
                continue
            own0 = _owns(x1, y1, x2, y2)
            own1 = _owns(x2, y2, x0, y0)
            own2 = _owns(x0, y0, x1, y1)
            for py in range(ymin, ymax + 1):
                fy_ = float(py)
                for px in range(xmin, xmax + 1):
                    fx_ = float(px)
                    w0 = _edge(x1, y1, x2, y2, fx_, fy_)
                    if w0 < 0.0 or (w0 == 0.0 and not own0):
                        continue
                    w1 = _edge(x2, y2, x0, y0, fx_, fy_)
                    if w1 < 0.0 or (w1 == 0.0 and not own1):
                        continue
                    w2 = _edge(x0, y0, x1, y1, fx_, fy_)
                    if w2 < 0.0 or (w2 == 0.0 and not own2):
                        continue
                    inv = (w0 * iz[i0] + w1 * iz[i1] + w2 * iz[i2]) / area
                    if inv <= 0.0:
                        continue
                    z = 1.0 / inv
                    if z < near or z > far:
                        continue
                    if z < depth[py, px]:
                        depth[py, px] = z
                        ids[py, px] = t
    return depth, ids
