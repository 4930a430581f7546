"""Rigid transforms, pinhole projection, bounding volumes and mesh statistics.

Conventions used throughout the package:

* lengths are meters, angles in external files are degrees;
* cameras are right handed with +Z forward, +X right and +Y down, so a point
  in the camera frame projects without any axis flip;
* a :class:`RigidTransform` maps points from its source frame to its target
  frame, ``p_target = R @ p_source + t``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .errors import BehindCameraError, EmptyMeshError, SynthForgeError

ORTHONORMAL_TOL = 1e-9

# Corner i of a box is (bx, by, bz) = itertools.product((0, 1), repeat=3)[i].
BOX_CORNER_BITS = np.array(list(itertools.product((0, 1), repeat=3)), dtype=float)
BOX_EDGES = tuple(
    (i, j)
    for i in range(8)
    for j in range(i + 1, 8)
    if np.count_nonzero(BOX_CORNER_BITS[i] != BOX_CORNER_BITS[j]) == 1
)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Indexed triangle mesh in meters."""

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_colors: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise SynthForgeError(f"mesh {self.name!r} has non-finite coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise SynthForgeError(f"mesh {self.name!r} has triangle indices out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if self.vertex_colors is not None:
            c = np.ascontiguousarray(self.vertex_colors, dtype=np.float64).reshape(-1, 3)
            if len(c) != len(v):
                raise SynthForgeError("vertex_colors must have one row per vertex")
            object.__setattr__(self, "vertex_colors", c)

    @property
    def centroid(self) -> np.ndarray:
        """Mean of the vertices (used as center of mass)."""
        return self.vertices.mean(axis=0)

    def transformed(self, pose: "RigidTransform") -> "Mesh":
        return Mesh(pose.apply(self.vertices), self.triangles, self.vertex_colors, self.name)

    def scaled(self, factor: float) -> "Mesh":
        return Mesh(self.vertices * factor, self.triangles, self.vertex_colors, self.name)


@dataclass(frozen=True, eq=False)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise SynthForgeError("non-finite rigid transform")
        if not is_rotation(r, ORTHONORMAL_TOL):
            raise SynthForgeError("rotation is not orthonormal with det +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


def is_rotation(r: np.ndarray, tol: float = ORTHONORMAL_TOL) -> bool:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3):
        return False
    err = np.abs(r.T @ r - np.eye(3)).max()
    return bool(err <= tol and abs(np.linalg.det(r) - 1.0) <= tol)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform that applies ``b`` first, then ``a``."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def rot_x(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_to_rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation for roll/pitch/yaw in degrees, extrinsic X then Y then Z.

    ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``.
    """
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def quaternion_to_rotation(q) -> np.ndarray:
    """Rotation matrix of a quaternion given as (w, x, y, z); normalizes first."""
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Closest rotation to ``r`` (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(r)
    m = u @ vt
    if np.linalg.det(m) < 0:
        u[:, -1] *= -1
        m = u @ vt
    return m


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise SynthForgeError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise SynthForgeError("principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @classmethod
    def from_matrix(cls, k, width: int, height: int) -> "CameraIntrinsics":
        k = np.asarray(k, dtype=np.float64).reshape(3, 3)
        return cls(float(k[0, 0]), float(k[1, 1]), float(k[0, 2]), float(k[1, 2]), int(width), int(height))


def project(k: CameraIntrinsics, p_cam) -> tuple[float, float]:
    """Pixel coordinates of a camera-frame point. Pixel centers sit on integer coordinates."""
    x, y, z = (float(c) for c in p_cam)
    if not z > 0:
        raise BehindCameraError(f"point has z={z} <= 0 in the camera frame")
    return k.fx * x / z + k.cx, k.fy * y / z + k.cy


def project_points(k: CameraIntrinsics, points) -> np.ndarray:
    """Vectorized :func:`project`; rows with z <= 0 raise."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if np.any(p[:, 2] <= 0):
        raise BehindCameraError("point behind the camera")
    return np.column_stack((k.fx * p[:, 0] / p[:, 2] + k.cx, k.fy * p[:, 1] / p[:, 2] + k.cy))


def unproject(k: CameraIntrinsics, u: float, v: float, z: float) -> np.ndarray:
    """Camera-frame point at depth ``z`` that projects to pixel (u, v)."""
    return np.array([(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z])


@dataclass(frozen=True)
class ModelInfo:
    diameter: float
    min_x: float
    min_y: float
    min_z: float
    size_x: float
    size_y: float
    size_z: float

    @property
    def minimum(self) -> np.ndarray:
        return np.array([self.min_x, self.min_y, self.min_z])

    @property
    def size(self) -> np.ndarray:
        return np.array([self.size_x, self.size_y, self.size_z])

    def to_dict(self) -> dict:
        return {
            "diameter": self.diameter,
            "min_x": self.min_x,
            "min_y": self.min_y,
            "min_z": self.min_z,
            "size_x": self.size_x,
            "size_y": self.size_y,
            "size_z": self.size_z,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelInfo":
        return cls(*(float(d[k]) for k in ("diameter", "min_x", "min_y", "min_z", "size_x", "size_y", "size_z")))


BRUTE_FORCE_DIAMETER_LIMIT = 10_000


def _max_pairwise_distance(points: np.ndarray, chunk: int = 1024) -> float:
    best = 0.0
    for start in range(0, len(points), chunk):
        block = points[start : start + chunk]
        d = block[:, None, :] - points[None, :, :]
        sq = (d * d).sum(axis=2)
        best = max(best, float(sq.max()))
    return float(np.sqrt(best))


def mesh_stats(mesh: Mesh) -> ModelInfo:
    v = mesh.vertices
    if len(v) == 0 or len(mesh.triangles) == 0:
        raise EmptyMeshError(f"mesh {mesh.name!r} is empty")
    if len(v) > BRUTE_FORCE_DIAMETER_LIMIT:
        try:
            # The farthest pair is always a pair of hull vertices.
            v_diam = v[ConvexHull(v).vertices]
        except Exception:
            v_diam = v
    else:
        v_diam = v
    lo = v.min(axis=0)
    size = v.max(axis=0) - lo
    return ModelInfo(
        _max_pairwise_distance(v_diam),
        float(lo[0]),
        float(lo[1]),
        float(lo[2]),
        float(size[0]),
        float(size[1]),
        float(size[2]),
    )


@dataclass(frozen=True, eq=False)
class Obb:
    corners: np.ndarray  # (8, 3), ordered like BOX_CORNER_BITS

    def axes(self) -> np.ndarray:
        """Unit edge directions as rows (x, y, z); zero rows for degenerate extents."""
        c = self.corners
        out = np.zeros((3, 3))
        for row, idx in enumerate((4, 2, 1)):
            e = c[idx] - c[0]
            n = np.linalg.norm(e)
            if n > 0:
                out[row] = e / n
        return out

    @property
    def center(self) -> np.ndarray:
        return self.corners.mean(axis=0)


def local_box_corners(info: ModelInfo) -> np.ndarray:
    return info.minimum + BOX_CORNER_BITS * info.size


def obb_corners(info: ModelInfo, pose: RigidTransform) -> Obb:
    return Obb(pose.apply(local_box_corners(info)))
