"""Deterministic rendering of a :class:`~synthforge.scene.SceneSpec`.

Produces aligned RGB, metric depth, class-id and instance-id buffers. Only
active class objects are labelled; floor, distractors and structure show up
in RGB and depth with label 0. Shading is direct lighting only: Lambert
diffuse plus a GGX specular lobe, plus a constant ambient term. No shadows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import textures
from .geometry import CameraIntrinsics, RigidTransform
from .raster import rasterize
from .scene import SceneSpec, camera_center

NEAR = 0.01
FAR = 100.0
AMBIENT_STRENGTH = 0.35
DEFAULT_AMBIENT = (0.5, 0.5, 0.5)
FLOOR_ROUGHNESS = 0.8


@dataclass(frozen=True, eq=False)
class FrameSet:
    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float64 meters, 0 = no geometry
    class_map: np.ndarray  # (H, W) uint16
    instance_map: np.ndarray  # (H, W) uint16
    intrinsics: CameraIntrinsics
    camera: RigidTransform  # world to camera


@dataclass(eq=False)
class SceneGeometry:
    """All visible triangles of a scene in world coordinates plus per-triangle attributes."""

    tris: np.ndarray  # (T, 3, 3)
    item: np.ndarray  # (T,) index into the per-item arrays
    tri_color: np.ndarray  # (T, 3) vertex-color tint, 1 when the mesh has none
    one_sided: np.ndarray  # (T,) True for the floor (visible from above only)
    category: np.ndarray  # (I,)
    instance: np.ndarray  # (I,)
    base_color: np.ndarray  # (I, 3)
    roughness: np.ndarray  # (I,)
    specular: np.ndarray  # (I,)
    metalness: np.ndarray  # (I,)
    floor_item: int  # -1 without a visible floor

    def visible_from(self, center) -> np.ndarray:
        """Triangle mask after dropping one-sided triangles seen from below."""
        if center[2] > 0:
            return np.ones(len(self.tris), dtype=bool)
        return ~self.one_sided


def scene_geometry(scene: SceneSpec) -> SceneGeometry:
    tris, item, tint, one_sided = [], [], [], []
    cat, inst, color, rough, spec, metal = [], [], [], [], [], []

    def add(mesh, pose, material, category=0, instance=0):
        idx = len(cat)
        w = pose.apply(mesh.vertices)[mesh.triangles]
        tris.append(w)
        item.append(np.full(len(w), idx))
        if mesh.vertex_colors is not None:
            tint.append(mesh.vertex_colors[mesh.triangles].mean(axis=1))
        else:
            tint.append(np.ones((len(w), 3)))
        one_sided.append(np.zeros(len(w), dtype=bool))
        cat.append(category)
        inst.append(instance)
        color.append(material.base_color)
        rough.append(material.roughness)
        spec.append(material.specular)
        metal.append(material.metalness)

    for o in scene.placed_objects:
        add(o.mesh, o.pose, o.material, o.category_id, o.instance_id)
    for d in scene.distractors:
        add(d.mesh, d.pose, d.material)
    for s in scene.structure:
        add(s.mesh, s.pose, s.material)
    floor_item = -1
    if scene.floor.kind == "textured-plane":
        h = scene.floor.size / 2
        quad = np.array([[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]])
        w = quad[[[0, 1, 2], [0, 2, 3]]]
        floor_item = len(cat)
        tris.append(w)
        item.append(np.full(2, floor_item))
        tint.append(np.ones((2, 3)))
        one_sided.append(np.ones(2, dtype=bool))
        cat.append(0)
        inst.append(0)
        color.append((1.0, 1.0, 1.0))
        rough.append(FLOOR_ROUGHNESS)
        spec.append(0.5)
        metal.append(0.0)
    if tris:
        all_tris = np.concatenate(tris)
        all_item = np.concatenate(item)
        all_tint = np.concatenate(tint)
        all_one = np.concatenate(one_sided)
    else:
        all_tris = np.zeros((0, 3, 3))
        all_item = np.zeros(0, dtype=np.int64)
        all_tint = np.zeros((0, 3))
        all_one = np.zeros(0, dtype=bool)
    return SceneGeometry(
        all_tris,
        all_item,
        all_tint,
        all_one,
        np.array(cat, dtype=np.int64),
        np.array(inst, dtype=np.int64),
        np.array(color, dtype=np.float64).reshape(-1, 3),
        np.array(rough, dtype=np.float64),
        np.array(spec, dtype=np.float64),
        np.array(metal, dtype=np.float64),
        floor_item,
    )


def _light_samples(light, points):
    """List of (direction to light, irradiance rgb) arrays for ``points`` (N, 3)."""
    color = np.asarray(light.color, dtype=np.float64)
    if light.kind == "sun":
        d = np.asarray(light.direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        return [(np.broadcast_to(d, points.shape), np.broadcast_to(light.intensity * color, points.shape))]
    pos = np.asarray(light.position, dtype=np.float64)
    if light.kind == "point":
        vec = pos - points
        d2 = np.maximum((vec * vec).sum(axis=1, keepdims=True), 1e-8)
        return [(vec / np.sqrt(d2), light.intensity * color / (4 * np.pi * d2))]
    out = []
    q = light.plane_half_extent / 2
    for ox, oy in ((-q, -q), (q, -q), (-q, q), (q, q)):
        vec = pos + np.array([ox, oy, 0.0]) - points
        d2 = np.maximum((vec * vec).sum(axis=1, keepdims=True), 1e-8)
        direction = vec / np.sqrt(d2)
        cos_emit = np.maximum(direction[:, 2:3], 0.0)  # emitter faces -Z
        out.append((direction, 0.25 * light.intensity * color * cos_emit / (np.pi * d2)))
    return out


def _shade(albedo, normal, view, rough, spec, metal, lights, points, ambient):
    color = ambient * albedo
    n_dot_v = np.maximum((normal * view).sum(axis=1, keepdims=True), 1e-4)
    alpha = np.maximum(rough * rough, 1e-3)[:, None]
    a2 = alpha * alpha
    k = alpha / 2
    metal = metal[:, None]
    f0 = (0.08 * spec[:, None]) * (1 - metal) + albedo * metal
    for light in lights:
        for direction, irradiance in _light_samples(light, points):
            n_dot_l = (normal * direction).sum(axis=1, keepdims=True)
            lit = n_dot_l > 0
            n_dot_l = np.maximum(n_dot_l, 0.0)
            half = direction + view
            half /= np.maximum(np.linalg.norm(half, axis=1, keepdims=True), 1e-12)
            n_dot_h = np.maximum((normal * half).sum(axis=1, keepdims=True), 0.0)
            v_dot_h = np.maximum((view * half).sum(axis=1, keepdims=True), 0.0)
            dist = a2 / (np.pi * (n_dot_h * n_dot_h * (a2 - 1) + 1) ** 2)
            geo = (n_dot_v / (n_dot_v * (1 - k) + k)) * (n_dot_l / (n_dot_l * (1 - k) + k))
            fresnel = f0 + (1 - f0) * (1 - v_dot_h) ** 5
            specular = dist * geo * fresnel / (4 * n_dot_v * np.maximum(n_dot_l, 1e-4))
            diffuse = (1 - fresnel) * (1 - metal) * albedo / np.pi
            color = color + np.where(lit, (diffuse + specular) * irradiance * n_dot_l, 0.0)
    return color


def _encode_srgb(linear: np.ndarray) -> np.ndarray:
    return np.round(np.clip(linear, 0.0, 1.0) ** (1 / 2.2) * 255.0).astype(np.uint8)


def render(
    scene: SceneSpec,
    camera: RigidTransform,
    k: CameraIntrinsics,
    clear_color=(0.0, 0.0, 0.0),
    near: float = NEAR,
    far: float = FAR,
) -> FrameSet:
    """Render one view. ``camera`` is the world-to-camera transform."""
    h, w = k.height, k.width
    geom = scene_geometry(scene)
    center = camera_center(camera)
    visible = geom.visible_from(center)
    tri_idx = np.flatnonzero(visible)
    tris_cam = geom.tris[tri_idx] @ camera.rotation.T + camera.translation

    zbuf = np.full((h, w), np.inf)
    ids = np.full((h, w), -1, dtype=np.int64)
    rasterize(np.ascontiguousarray(tris_cam), float(k.fx), float(k.fy), float(k.cx), float(k.cy),
              w, h, float(near), float(far), zbuf, ids)
    hit = ids >= 0
    depth = np.where(hit, zbuf, 0.0)

    class_map = np.zeros((h, w), dtype=np.uint16)
    instance_map = np.zeros((h, w), dtype=np.uint16)
    tri = tri_idx[ids[hit]]
    item = geom.item[tri]
    class_map[hit] = geom.category[item]
    instance_map[hit] = geom.instance[item]

    if scene.backdrop is not None:
        background = textures.backdrop(scene.backdrop, w, h)
        ambient = AMBIENT_STRENGTH * background.reshape(-1, 3).mean(axis=0)
        rgb = _encode_srgb(background)
    else:
        ambient = AMBIENT_STRENGTH * np.asarray(DEFAULT_AMBIENT)
        rgb = np.empty((h, w, 3), dtype=np.uint8)
        rgb[:] = _encode_srgb(np.asarray(clear_color, dtype=np.float64))

    if hit.any():
        vs, us = np.nonzero(hit)
        z = depth[hit]
        rays = np.column_stack(((us - k.cx) / k.fx, (vs - k.cy) / k.fy, np.ones_like(z)))
        points = (rays * z[:, None]) @ camera.rotation + center
        t = geom.tris[tri]
        normal = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        normal /= np.maximum(np.linalg.norm(normal, axis=1, keepdims=True), 1e-300)
        view = center - points
        view /= np.maximum(np.linalg.norm(view, axis=1, keepdims=True), 1e-300)
        flip = (normal * view).sum(axis=1) < 0
        normal[flip] *= -1

        albedo = geom.base_color[item] * geom.tri_color[tri]
        if geom.floor_item >= 0:
            on_floor = item == geom.floor_item
            if on_floor.any():
                tex = textures.texture(scene.floor.texture)
                th, tw = tex.shape[:2]
                size = scene.floor.size
                p = points[on_floor]
                col = np.clip(((p[:, 0] / size + 0.5) * tw).astype(np.int64), 0, tw - 1)
                row = np.clip(((0.5 - p[:, 1] / size) * th).astype(np.int64), 0, th - 1)
                albedo[on_floor] = tex[row, col]
        lin = _shade(albedo, normal, view, geom.roughness[item], geom.specular[item],
                     geom.metalness[item], scene.lights, points, ambient)
        rgb[hit] = _encode_srgb(lin)

    return FrameSet(rgb, depth, class_map, instance_map, k, camera)


def pixel_ray(k: CameraIntrinsics, camera: RigidTransform, pixel):
    """World-space origin and direction of a pixel's ray; the direction has camera z = 1."""
    u, v = pixel
    d_cam = np.array([(u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0])
    return camera_center(camera), camera.rotation.T @ d_cam


def raycast_depth_oracle(scene: SceneSpec, camera: RigidTransform, k: CameraIntrinsics, pixel,
                         near: float = NEAR, far: float = FAR) -> float:
    """Camera-frame depth of the nearest surface hit by a pixel's ray, 0 if nothing is hit.

    Independent ray/triangle intersection (Moller-Trumbore) over every
    triangle the renderer would draw.
    """
    geom = scene_geometry(scene)
    origin, direction = pixel_ray(k, camera, pixel)
    tris = geom.tris[geom.visible_from(origin)]
    if len(tris) == 0:
        return 0.0
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    e1, e2 = v1 - v0, v2 - v0
    p = np.cross(direction, e2)
    det = (e1 * p).sum(axis=1)
    ok = np.abs(det) > 1e-18
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origin - v0
    u = (s * p).sum(axis=1) * inv
    q = np.cross(s, e1)
    v = (q @ direction) * inv
    t = (e2 * q).sum(axis=1) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= near) & (t <= far)
    return float(t[hit].min()) if hit.any() else 0.0
