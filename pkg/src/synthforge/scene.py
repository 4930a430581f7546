"""Scene composition for the five generation procedures.

==========  ==============================  ===========================
procedure   floor / background              object poses
==========  ==============================  ===========================
P1          textured plane                  settled on the plane
P2          textured plane                  floating in a 3D region
P3          backdrop + invisible plane      settled on the plane
P4          backdrop                        floating in a 3D region
P5          backdrop                        assembly placements
==========  ==============================  ===========================
"""

from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .assembly import Catalog
from .errors import ConfigError, PlacementError
from .geometry import (
    Mesh,
    ModelInfo,
    Obb,
    RigidTransform,
    mesh_stats,
    obb_corners,
    quaternion_to_rotation,
    rot_z,
)
from .settle import DEFAULT_MIN_TIP_ANGLE_DEG, place_on_plane, settle_on_plane

log = logging.getLogger(__name__)

PROCEDURES = ("P1", "P2", "P3", "P4", "P5")
SETTLED = ("P1", "P3")
FLOATING = ("P2", "P4")
TEXTURED_FLOOR = ("P1", "P2")
WITH_BACKDROP = ("P3", "P4", "P5")


@dataclass(frozen=True)
class Material:
    base_color: tuple = (0.8, 0.8, 0.8)
    roughness: float = 0.5
    specular: float = 0.5
    metalness: float = 0.0

    def __post_init__(self):
        vals = list(self.base_color) + [self.roughness, self.specular, self.metalness]
        if len(self.base_color) != 3 or not all(0.0 <= v <= 1.0 for v in vals):
            raise ValueError(f"material values must lie in [0, 1]: {self}")


@dataclass(frozen=True)
class MaterialRanges:
    base_color: tuple = (0.0, 1.0)
    roughness: tuple = (0.0, 1.0)
    specular: tuple = (0.0, 1.0)
    metalness: tuple = (0.0, 1.0)

    def __post_init__(self):
        for name in ("base_color", "roughness", "specular", "metalness"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                raise ConfigError(f"material range {name} must satisfy 0 <= lo <= hi <= 1")


@dataclass(frozen=True)
class LightSpec:
    kind: str  # "sun", "point" or "plane"
    color: tuple
    intensity: float
    position: tuple = (0.0, 0.0, 0.0)
    direction: tuple = (0.0, 0.0, 1.0)  # towards the sun, used by "sun" only
    plane_half_extent: float = 0.0  # "plane" only


@dataclass(frozen=True)
class LightRanges:
    sun_intensity: tuple = (2.0, 6.0)
    point_intensity: tuple = (80.0, 400.0)
    plane_intensity: tuple = (80.0, 400.0)
    color: tuple = (0.7, 1.0)  # per channel
    plane_half_extent: tuple = (0.1, 0.5)


@dataclass(frozen=True)
class ProcedureConfig:
    procedure: str = "P1"
    num_scenes: int = 10
    views_per_scene: int = 5
    objects_per_scene: tuple = (1, 3)
    distractors_per_scene: tuple = (2, 6)
    floating_bounds: tuple = ((-0.25, -0.25, 0.1), (0.25, 0.25, 0.4))
    plane_size: float = 2.0
    camera_radius: tuple = (0.6, 1.2)
    max_pose_retries: int = 100
    seed: int = 0
    elevation_deg: tuple | None = None  # default: (5, 85) for settled procedures, full sphere otherwise
    roll_deg: tuple = (-15.0, 15.0)
    placement_extent: float = 0.25  # settled objects: |x|, |y| <= placement_extent * plane_size
    structure_as_distractors: bool = False
    min_tip_angle_deg: float = DEFAULT_MIN_TIP_ANGLE_DEG
    materials: MaterialRanges = field(default_factory=MaterialRanges)
    lights: LightRanges = field(default_factory=LightRanges)
    textures: tuple = ()  # image files; empty means procedural textures
    backdrops: tuple = ()  # image files; empty means procedural backdrops

    def __post_init__(self):
        if self.procedure not in PROCEDURES:
            raise ConfigError(f"unknown procedure {self.procedure!r}")
        if self.num_scenes < 1 or self.views_per_scene < 1:
            raise ConfigError("num_scenes and views_per_scene must be positive")
        for name in ("objects_per_scene", "distractors_per_scene", "camera_radius"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ConfigError(f"{name} must be a non-empty range, got {(lo, hi)}")
        if self.objects_per_scene[0] < 1:
            raise ConfigError("objects_per_scene must allow at least one object")
        if self.camera_radius[0] <= 0:
            raise ConfigError("camera_radius must be positive")
        lo, hi = np.asarray(self.floating_bounds, dtype=float)
        if np.any(hi - lo <= 0):
            raise ConfigError("floating_bounds must have positive volume")
        if self.max_pose_retries < 1:
            raise ConfigError("max_pose_retries must be >= 1")
        if self.plane_size <= 0:
            raise ConfigError("plane_size must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def elevation_range(self) -> tuple:
        if self.elevation_deg is not None:
            return tuple(self.elevation_deg)
        return (5.0, 85.0) if self.procedure in SETTLED else (-90.0, 90.0)


@dataclass(frozen=True, eq=False)
class PlacedObject:
    mesh: Mesh
    category_id: int
    instance_id: int
    pose: RigidTransform
    material: Material
    name: str = ""


@dataclass(frozen=True, eq=False)
class SceneItem:
    mesh: Mesh
    pose: RigidTransform
    material: Material
    name: str = ""


@dataclass(frozen=True)
class Floor:
    kind: str  # "textured-plane", "invisible-plane" or "none"
    texture: str | None = None
    size: float = 0.0


@dataclass(frozen=True, eq=False)
class SceneSpec:
    procedure: str
    placed_objects: tuple
    distractors: tuple = ()
    structure: tuple = ()
    floor: Floor = Floor("none")
    backdrop: str | None = None
    lights: tuple = ()

    def object_centroids(self) -> np.ndarray:
        return np.array([o.pose.apply(o.mesh.centroid) for o in self.placed_objects])


_INFO_CACHE: "weakref.WeakKeyDictionary[Mesh, ModelInfo]" = weakref.WeakKeyDictionary()


def model_info(mesh: Mesh) -> ModelInfo:
    info = _INFO_CACHE.get(mesh)
    if info is None:
        info = _INFO_CACHE[mesh] = mesh_stats(mesh)
    return info


def mesh_obb(mesh: Mesh, pose: RigidTransform) -> Obb:
    return obb_corners(model_info(mesh), pose)


# -- overlap test -----------------------------------------------------------


def _box_frame(box: Obb):
    c = box.corners
    edges = np.array([c[4] - c[0], c[2] - c[0], c[1] - c[0]])
    half = 0.5 * np.linalg.norm(edges, axis=1)
    return box.center, edges, half


def check_overlap(a: Obb, b: Obb) -> bool:
    """True iff the boxes intersect with positive volume (separating axis test).

    Boxes that only share a face, edge or corner do not overlap.
    """
    ca, ea, ha = _box_frame(a)
    cb, eb, hb = _box_frame(b)
    if np.any(ha <= 0) or np.any(hb <= 0):
        return False
    ua = ea / (2 * ha)[:, None]
    ub = eb / (2 * hb)[:, None]
    scale = max(ha.max(), hb.max(), np.abs(cb - ca).max())
    tol = 1e-12 * scale
    axes = [*ua, *ub]
    for i in range(3):
        for j in range(3):
            axis = np.cross(ua[i], ub[j])
            n = np.linalg.norm(axis)
            if n > 1e-9:
                axes.append(axis / n)
    d = cb - ca
    for axis in axes:
        ra = np.sum(ha * np.abs(ua @ axis))
        rb = np.sum(hb * np.abs(ub @ axis))
        if abs(d @ axis) >= ra + rb - tol:
            return False
    return True


# -- random draws -------------------------------------------------------------


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation from a uniformly distributed unit quaternion."""
    q = rng.normal(size=4)
    while np.linalg.norm(q) < 1e-12:
        q = rng.normal(size=4)
    return quaternion_to_rotation(q)


def sample_floating_pose(bounds, rng: np.random.Generator) -> RigidTransform:
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds)
    t = lo + (hi - lo) * rng.random(3)
    return RigidTransform(random_rotation(rng), t)


def randomize_material(rng: np.random.Generator, ranges: MaterialRanges = MaterialRanges()) -> Material:
    def draw(r, n=None):
        lo, hi = r
        return lo + (hi - lo) * rng.random(n)

    color = draw(ranges.base_color, 3)
    return Material(
        tuple(float(c) for c in color),
        float(draw(ranges.roughness)),
        float(draw(ranges.specular)),
        float(draw(ranges.metalness)),
    )


LIGHT_KINDS = ("sun", "point", "plane")


def sample_light(rng: np.random.Generator, plane_size: float, ranges: LightRanges = LightRanges()) -> LightSpec:
    if plane_size <= 0:
        raise ValueError("plane_size must be positive")
    kind = LIGHT_KINDS[int(rng.integers(3))]
    lo, hi = ranges.color
    color = tuple(float(c) for c in lo + (hi - lo) * rng.random(3))
    half = plane_size / 2
    position = (
        float(rng.uniform(-half, half)),
        float(rng.uniform(-half, half)),
        float(rng.uniform(0.5 * plane_size, 1.5 * plane_size)),
    )
    if kind == "sun":
        # upper hemisphere, uniform in solid angle
        z = rng.uniform(0.0, 1.0)
        phi = rng.uniform(0.0, 2 * np.pi)
        r = np.sqrt(max(0.0, 1 - z * z))
        direction = (float(r * np.cos(phi)), float(r * np.sin(phi)), float(z))
        intensity = float(rng.uniform(*ranges.sun_intensity))
        return LightSpec(kind, color, intensity, position, direction)
    if kind == "point":
        return LightSpec(kind, color, float(rng.uniform(*ranges.point_intensity)), position)
    half_extent = float(rng.uniform(*ranges.plane_half_extent)) * plane_size / 2
    return LightSpec(kind, color, float(rng.uniform(*ranges.plane_intensity)), position,
                     plane_half_extent=half_extent)


def look_at(center, target, roll_deg: float = 0.0) -> RigidTransform:
    """World-to-camera transform for a camera at ``center`` looking at ``target``.

    Image +Y points as close to world -Z as possible before the roll.
    """
    center = np.asarray(center, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - center
    f /= np.linalg.norm(f)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(f, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(f, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(f, right)
    a = np.radians(roll_deg)
    right, down = np.cos(a) * right + np.sin(a) * down, -np.sin(a) * right + np.cos(a) * down
    r = np.vstack([right, down, f])
    return RigidTransform(r, -r @ center)


def sample_camera(
    scene: SceneSpec,
    radius: float,
    rng: np.random.Generator,
    elevation_deg: tuple = (-90.0, 90.0),
    roll_deg: tuple = (0.0, 0.0),
) -> RigidTransform:
    """World-to-camera pose on a sphere of ``radius`` around the mean object centroid."""
    if not scene.placed_objects:
        raise PlacementError("cannot aim a camera at a scene without objects")
    if radius <= 0:
        raise ValueError("radius must be positive")
    target = scene.object_centroids().mean(axis=0)
    lo, hi = np.radians(elevation_deg)
    z = rng.uniform(np.sin(lo), np.sin(hi))
    phi = rng.uniform(0.0, 2 * np.pi)
    r = np.sqrt(max(0.0, 1 - z * z))
    direction = np.array([r * np.cos(phi), r * np.sin(phi), z])
    direction /= np.linalg.norm(direction)
    roll = rng.uniform(*roll_deg)
    return look_at(target + radius * direction, target, roll)


def camera_center(world_to_cam: RigidTransform) -> np.ndarray:
    return -world_to_cam.rotation.T @ world_to_cam.translation


def random_convex_mesh(rng: np.random.Generator, name: str = "distractor") -> Mesh:
    """Convex polyhedron spanned by 8 to 20 random points, outward-facing triangles."""
    n = int(rng.integers(8, 21))
    half = rng.uniform(0.02, 0.08, size=3)
    while True:
        pts = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
        try:
            hull = ConvexHull(pts)
        except Exception:
            continue
        if hull.volume > 0:
            break
    verts = pts[hull.vertices]
    remap = {int(v): i for i, v in enumerate(hull.vertices)}
    tris = np.array([[remap[int(i)] for i in s] for s in hull.simplices])
    # orient outward
    center = verts.mean(axis=0)
    for k, (a, b, c) in enumerate(tris):
        if np.dot(np.cross(verts[b] - verts[a], verts[c] - verts[a]), verts[a] - center) < 0:
            tris[k] = (a, c, b)
    return Mesh(verts, tris, name=name)


# -- composition ----------------------------------------------------------------


def _settled_pose(mesh, cfg, rng):
    r0 = random_rotation(rng)
    rest = settle_on_plane(mesh, r0, (0.0, 0.0), cfg.min_tip_angle_deg)
    yaw = rng.uniform(-180.0, 180.0)
    extent = cfg.placement_extent * cfg.plane_size
    xy = rng.uniform(-extent, extent, size=2)
    return place_on_plane(mesh, rot_z(yaw) @ rest.rotation, xy)


def _floating_pose(mesh, bounds, rng):
    p = sample_floating_pose(bounds, rng)
    # the sampled point is where the centroid goes
    return RigidTransform(p.rotation, p.translation - p.rotation @ mesh.centroid)


def _place(mesh, cfg, rng, boxes, bounds, what):
    settled = cfg.procedure in SETTLED
    for _ in range(cfg.max_pose_retries):
        if settled:
            pose = _settled_pose(mesh, cfg, rng)
        else:
            pose = _floating_pose(mesh, bounds, rng)
        box = mesh_obb(mesh, pose)
        if not any(check_overlap(box, other) for other in boxes):
            return pose, box
    raise PlacementError(f"could not place {what} without overlap after {cfg.max_pose_retries} attempts")


def _pick(rng, refs):
    if refs:
        return str(refs[int(rng.integers(len(refs)))])
    return f"procedural:{int(rng.integers(2**31))}"


def compose_scene(cfg: ProcedureConfig, catalog: Catalog, rng: np.random.Generator) -> SceneSpec:
    """One randomized scene for ``cfg.procedure``; a pure function of its inputs."""
    if not catalog.classes:
        raise PlacementError("the catalog has no class meshes")
    proc = cfg.procedure
    objects: list[PlacedObject] = []
    boxes: list[Obb] = []
    structure: list[SceneItem] = []
    bounds = cfg.floating_bounds

    if proc == "P5":
        root = RigidTransform.identity()
        for entry in catalog.classes:
            if entry.placement is None:
                raise PlacementError(f"P5 needs an assembly placement for {entry.name!r}")
        for entry in catalog.structure:
            if entry.placement is None:
                raise PlacementError(f"P5 needs an assembly placement for structure {entry.name!r}")
        for k, entry in enumerate(catalog.classes, start=1):
            pose = root @ entry.placement.to_pose()
            box = mesh_obb(entry.mesh, pose)
            clash = [o.name for o, b in zip(objects, boxes) if check_overlap(box, b)]
            if clash:
                raise PlacementError(f"assembly placement of {entry.name!r} overlaps {clash[0]!r}")
            objects.append(PlacedObject(entry.mesh, entry.category_id, k, pose,
                                        randomize_material(rng, cfg.materials), entry.name))
            boxes.append(box)
        for entry in catalog.structure:
            structure.append(SceneItem(entry.mesh, root @ entry.placement.to_pose(),
                                       randomize_material(rng, cfg.materials), entry.name))
        # distractors float in a region centered on the assembled objects
        center = np.mean([o.pose.apply(o.mesh.centroid) for o in objects], axis=0)
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        shift = center - (lo + hi) / 2
        bounds = (lo + shift, hi + shift)
    else:
        n = int(rng.integers(cfg.objects_per_scene[0], cfg.objects_per_scene[1] + 1))
        for k in range(1, n + 1):
            entry = catalog.classes[int(rng.integers(len(catalog.classes)))]
            pose, box = _place(entry.mesh, cfg, rng, boxes, bounds, f"object {k} ({entry.name})")
            objects.append(PlacedObject(entry.mesh, entry.category_id, k, pose,
                                        randomize_material(rng, cfg.materials), entry.name))
            boxes.append(box)

    distractors: list[SceneItem] = []
    n_dis = int(rng.integers(cfg.distractors_per_scene[0], cfg.distractors_per_scene[1] + 1))
    pool = catalog.structure if (cfg.structure_as_distractors and proc != "P5") else []
    for k in range(n_dis):
        if pool and rng.random() < 0.5:
            mesh = pool[int(rng.integers(len(pool)))].mesh
        else:
            mesh = random_convex_mesh(rng, f"distractor{k}")
        try:
            pose, box = _place(mesh, cfg, rng, boxes, bounds, f"distractor {k}")
        except PlacementError:
            log.debug("dropping distractor %d: no free pose", k)
            continue
        distractors.append(SceneItem(mesh, pose, randomize_material(rng, cfg.materials), mesh.name))
        boxes.append(box)

    if proc in TEXTURED_FLOOR:
        floor = Floor("textured-plane", _pick(rng, cfg.textures), cfg.plane_size)
    elif proc == "P3":
        floor = Floor("invisible-plane", None, cfg.plane_size)
    else:
        floor = Floor("none")
    backdrop = _pick(rng, cfg.backdrops) if proc in WITH_BACKDROP else None
    lights = (sample_light(rng, cfg.plane_size, cfg.lights),)
    return SceneSpec(proc, tuple(objects), tuple(distractors), tuple(structure), floor, backdrop, lights)

