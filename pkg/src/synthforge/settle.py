"""Quasi-static resting pose of a rigid mesh dropped on the plane z = 0.

The object is represented by its convex hull with the center of mass at the
vertex centroid. Starting from the initial orientation, the hull rolls so
that the center of mass always descends:

* on a single contact vertex it pivots about that vertex,
* on a contact edge it rotates about the edge,
* on a contact face it stays if the projected center of mass lies inside
  the face, otherwise it tips over the nearest boundary edge or vertex.

Everything is expressed through the body-frame "down" direction ``d``
(gravity in body coordinates). Each phase is solved in closed form, so the
result is exact up to floating point and fully deterministic.

Faces that are statically stable but can be tipped by less than
``min_tip_angle_deg`` (a thin plate standing on its rim) are treated as
marginal and the object topples to the neighbouring face across the edge
nearest to the projected center of mass.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import SettleError
from .geometry import Mesh, RigidTransform

DEFAULT_MIN_TIP_ANGLE_DEG = 5.0


@dataclass
class Face:
    normal: np.ndarray  # outward unit normal, body frame
    offset: float  # normal . x = offset on the face plane (COM at origin)
    loop: np.ndarray  # hull point indices, counter-clockwise seen from outside
    neighbours: dict  # (i, j) directed edge of ``loop`` -> adjacent face index


class StableSupport:
    """Convex hull of a mesh, centered on its center of mass, with merged planar faces."""

    def __init__(self, mesh: Mesh):
        com = mesh.centroid
        pts = mesh.vertices - com
        try:
            hull = ConvexHull(pts)
        except (QhullError, ValueError) as exc:
            raise SettleError(f"mesh {mesh.name!r} has a degenerate convex hull: {exc}") from None
        if hull.volume <= 0:
            raise SettleError(f"mesh {mesh.name!r} has zero hull volume")
        self.com = com
        self.points = pts[hull.vertices]
        remap = {int(v): i for i, v in enumerate(hull.vertices)}
        self.scale = float(np.abs(self.points).max())
        self.eps = 1e-9 * self.scale
        self.faces = self._merge_faces(hull, remap)

    def _merge_faces(self, hull: ConvexHull, remap: dict) -> list[Face]:
        groups: list[list[int]] = []
        keys: list[np.ndarray] = []
        for s, eq in enumerate(hull.equations):
            n = eq[:3] / np.linalg.norm(eq[:3])
            for g, k in enumerate(keys):
                if np.dot(n, k[:3]) > 1 - 1e-9 and abs(-eq[3] - k[3]) <= 1e-7 * self.scale:
                    groups[g].append(s)
                    break
            else:
                keys.append(np.append(n, -eq[3]))
                groups.append([s])
        faces = []
        for key, members in zip(keys, groups):
            idx = sorted({remap[int(v)] for s in members for v in hull.simplices[s]})
            faces.append(Face(key[:3], float(key[3]), self._ordered_loop(np.array(idx), key[:3]), {}))
        edge_owner = {}
        for fi, f in enumerate(faces):
            loop = f.loop
            for k in range(len(loop)):
                edge_owner[(int(loop[k]), int(loop[(k + 1) % len(loop)]))] = fi
        for fi, f in enumerate(faces):
            loop = f.loop
            for k in range(len(loop)):
                i, j = int(loop[k]), int(loop[(k + 1) % len(loop)])
                if (j, i) in edge_owner:
                    f.neighbours[(i, j)] = edge_owner[(j, i)]
        return faces

    def _ordered_loop(self, idx: np.ndarray, normal: np.ndarray) -> np.ndarray:
        p = self.points[idx]
        center = p.mean(axis=0)
        u = p[0] - center
        u = u - np.dot(u, normal) * normal
        u /= np.linalg.norm(u)
        v = np.cross(normal, u)
        ang = np.arctan2((p - center) @ v, (p - center) @ u)
        loop = idx[np.argsort(ang, kind="stable")]
        # drop points lying on an edge of the polygon
        keep = []
        m = len(loop)
        for k in range(m):
            a, b, c = self.points[loop[k - 1]], self.points[loop[k]], self.points[loop[(k + 1) % m]]
            if np.linalg.norm(np.cross(b - a, c - b)) > 1e-12 * self.scale**2:
                keep.append(loop[k])
        return np.array(keep, dtype=np.int64)

    # -- rolling -----------------------------------------------------------

    def support(self, d: np.ndarray) -> np.ndarray:
        h = self.points @ d
        return np.flatnonzero(h >= h.max() - self.eps)

    def _face_for(self, d: np.ndarray) -> int:
        dots = np.array([np.dot(f.normal, d) for f in self.faces])
        return int(np.argmax(dots))

    def _advance(self, d, w, exclude) -> np.ndarray:
        """Rotate ``d`` towards ``w`` until a new hull point joins the contact set."""
        pivot = self.points[exclude[0]]
        rel = self.points - pivot
        a = rel @ d
        b = rel @ w
        mask = b > 1e-12 * self.scale
        mask[list(exclude)] = False
        if not mask.any():
            raise SettleError("rolling did not reach a new contact")
        theta = np.arctan2(np.maximum(-a[mask], 0.0), b[mask]).min()
        nd = np.cos(theta) * d + np.sin(theta) * w
        return nd / np.linalg.norm(nd)

    def _pivot_vertex(self, p: int, d: np.ndarray) -> np.ndarray:
        a = self.points[p]
        at = a - np.dot(a, d) * d
        norm = np.linalg.norm(at)
        if norm <= 1e-12 * self.scale:
            # center of mass exactly above the vertex: fall along a fixed direction
            ref = np.eye(3)[int(np.argmin(np.abs(d)))]
            at = ref - np.dot(ref, d) * d
            norm = np.linalg.norm(at)
        return self._advance(d, -at / norm, [p])

    def _pivot_edge(self, p: int, q: int, d: np.ndarray):
        pp, pq = self.points[p], self.points[q]
        e = (pq - pp) / np.linalg.norm(pq - pp)
        d = d - np.dot(d, e) * e
        d /= np.linalg.norm(d)
        if np.dot(pq, pq - pp) < -self.eps * np.linalg.norm(pq - pp):
            return "vertex", q, d
        if np.dot(pp, pp - pq) < -self.eps * np.linalg.norm(pq - pp):
            return "vertex", p, d
        a_perp = pp - np.dot(pp, e) * e
        at = a_perp - np.dot(a_perp, d) * d
        norm = np.linalg.norm(at)
        w = np.cross(e, d) if norm <= 1e-12 * self.scale else -at / norm
        return "rolled", None, self._advance(d, w, [p, q])

    def _face_exit(self, fi: int):
        """Return (kind, data) describing how the object leaves face ``fi``, or ("stable", tip)."""
        f = self.faces[fi]
        n, loop = f.normal, f.loop
        c = f.offset * n  # projected center of mass
        pts = self.points[loop]
        m = len(loop)
        signed = np.empty(m)
        for k in range(m):
            a, b = pts[k], pts[(k + 1) % m]
            out = np.cross(b - a, n)
            out /= np.linalg.norm(out)
            signed[k] = np.dot(out, c - a)
        if signed.max() <= self.eps:
            return "stable", signed
        best = None
        for k in np.flatnonzero(signed > self.eps):
            a, b = pts[k], pts[(k + 1) % m]
            ab = b - a
            t = np.clip(np.dot(c - a, ab) / np.dot(ab, ab), 0.0, 1.0)
            dist = np.linalg.norm(c - (a + t * ab))
            key = (dist, -signed[k], k)
            if best is None or key < best[0]:
                best = (key, k, t)
        _, k, t = best
        i, j = int(loop[k]), int(loop[(k + 1) % m])
        if 0.0 < t < 1.0:
            return "edge", (i, j)
        return "vertex", i if t == 0.0 else j

    def rest(self, d0, min_tip_angle_deg: float = DEFAULT_MIN_TIP_ANGLE_DEG) -> int:
        """Index of the face the hull comes to rest on from body down-direction ``d0``."""
        d = np.asarray(d0, dtype=np.float64)
        d = d / np.linalg.norm(d)
        state, data = None, None
        marginal_seen: dict[int, float] = {}
        min_tip = np.radians(min_tip_angle_deg)
        for _ in range(20 * len(self.faces) + 100):
            if state is None:
                s = self.support(d)
                if len(s) == 1:
                    state, data = "vertex", int(s[0])
                elif len(s) == 2:
                    state, data = "edge", (int(s[0]), int(s[1]))
                else:
                    fi = self._face_for(d)
                    if np.dot(self.faces[fi].normal, d) > 1 - 1e-9:
                        state, data = "face", fi
                    else:
                        # collinear contact points: keep the two extremes
                        sub = self.points[s]
                        dist = np.linalg.norm(sub[:, None] - sub[None], axis=2)
                        i, j = np.unravel_index(np.argmax(dist), dist.shape)
                        state, data = "edge", (int(s[min(i, j)]), int(s[max(i, j)]))
            if state == "vertex":
                d = self._pivot_vertex(data, d)
                state = None
            elif state == "edge":
                kind, p, nd = self._pivot_edge(data[0], data[1], d)
                d = nd
                state, data = (("vertex", p) if kind == "vertex" else (None, None))
            elif state == "face":
                fi = data
                d = self.faces[fi].normal.copy()
                kind, info = self._face_exit(fi)
                if kind != "stable":
                    state, data = kind, info
                    continue
                height = self.faces[fi].offset
                tip = float(np.arctan2(-info.max(), height))
                if tip >= min_tip or fi in marginal_seen:
                    if fi in marginal_seen:
                        return max(marginal_seen, key=lambda k: (marginal_seen[k], -k))
                    return fi
                marginal_seen[fi] = tip
                f = self.faces[fi]
                k = int(np.argmax(info))
                edge = (int(f.loop[k]), int(f.loop[(k + 1) % len(f.loop)]))
                nxt = f.neighbours.get(edge, self._across(fi, *edge))
                if nxt is None:
                    return fi
                state, data = "face", nxt
        raise SettleError("settling did not converge")

    def _across(self, fi: int, i: int, j: int):
        for gi, g in enumerate(self.faces):
            if gi != fi and i in g.loop and j in g.loop:
                return gi
        return None

    def resting_rotation(self, fi: int) -> np.ndarray:
        """Rotation (body to world) that puts face ``fi`` on the ground, with canonical yaw.

        The yaw is fixed by aligning the most horizontal body axis with world +X.
        """
        n = self.faces[fi].normal
        r3 = -n
        k = int(np.argmin(np.abs(n) + np.arange(3) * 1e-12))
        r1 = np.eye(3)[k] - n[k] * n
        r1 /= np.linalg.norm(r1)
        r2 = np.cross(r3, r1)
        return np.vstack([r1, r2, r3])


_SUPPORT_CACHE: "weakref.WeakKeyDictionary[Mesh, StableSupport]" = weakref.WeakKeyDictionary()


def stable_support(mesh: Mesh) -> StableSupport:
    s = _SUPPORT_CACHE.get(mesh)
    if s is None:
        s = StableSupport(mesh)
        _SUPPORT_CACHE[mesh] = s
    return s


def place_on_plane(mesh: Mesh, rotation: np.ndarray, xy) -> RigidTransform:
    """Pose with the given rotation whose lowest vertex touches z = 0 and centroid sits over ``xy``."""
    rv = mesh.vertices @ rotation.T
    c = rv.mean(axis=0)
    t = np.array([xy[0] - c[0], xy[1] - c[1], -rv[:, 2].min()])
    return RigidTransform(rotation, t)


def settle_on_plane(mesh: Mesh, initial_rotation, xy, min_tip_angle_deg: float = DEFAULT_MIN_TIP_ANGLE_DEG) -> RigidTransform:
    """Resting pose of ``mesh`` dropped with ``initial_rotation`` onto z = 0 above ``xy``."""
    if len(mesh.triangles) == 0:
        raise SettleError(f"mesh {mesh.name!r} is empty")
    support = stable_support(mesh)
    r0 = np.asarray(initial_rotation, dtype=np.float64)
    d0 = r0.T @ np.array([0.0, 0.0, -1.0])
    fi = support.rest(d0, min_tip_angle_deg)
    return place_on_plane(mesh, support.resting_rotation(fi), xy)
