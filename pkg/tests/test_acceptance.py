"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The generated datasets (200 images per procedure at 640x480) are produced
once per session through the command line front end and shared by the
criteria that inspect them.
"""

import contextlib
import itertools
import json
import math
import os
import struct
import time

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from conftest import ACCEPTANCE_LINES
from synthforge.annotate import bbox_from_mask, read_dataset
from synthforge.cli import main
from synthforge.config import load_config
from synthforge.geometry import compose, local_box_corners, mesh_stats
from synthforge.meshio import load_mesh
from synthforge.metrics import average_precision, map_metrics, matrix_report
from synthforge.mixer import DEFAULT_COMBINATIONS, MixPlan, assemble, plan_counts, plan_splits
from synthforge.pipeline import camera_for, catalog_for, scene_for
from synthforge.render import raycast_depth_oracle
from synthforge.scene import check_overlap, mesh_obb, random_rotation
from synthforge.settle import settle_on_plane
from synthforge.demo import box_mesh
from test_metrics import brute_map, random_instance
from test_settle import AXIS_ALIGNED

PROCS = ("P1", "P2", "P3", "P4", "P5")
IMAGES_PER_PROC = 200
TIME_BUDGET_S = 600.0
CONFIG = """\
seed: 2024
output_root: out
camera: {width: 640, height: 480, fx: 572.4, fy: 572.4, cx: 320, cy: 240}
defaults: {num_scenes: 40, views_per_scene: 5}
"""
LAYOUT = {"P1": ("textured-plane", False), "P2": ("textured-plane", False), "P3": ("invisible-plane", True),
          "P4": ("none", True), "P5": ("none", True)}
COMBINATION_PERCENT = {"C1": (20, 20, 10, 30, 20), "C2": (40, 0, 0, 40, 20), "C3": (0, 40, 0, 40, 20),
          "C4": (0, 0, 0, 80, 20), "C5": (50, 0, 0, 50, 0)}


@contextlib.contextmanager
def criterion(number, title):
    details = []
    try:
        yield details
    except BaseException:
        line = f"criterion {number} FAIL  {title}" + (f"  [{'; '.join(details)}]" if details else "")
        print(line)
        ACCEPTANCE_LINES.append(line)
        raise
    line = f"criterion {number} PASS  {title}" + (f"  [{'; '.join(details)}]" if details else "")
    print(line)
    ACCEPTANCE_LINES.append(line)


def _generate(workdir):
    os.makedirs(workdir, exist_ok=True)
    cfg_path = os.path.join(workdir, "config.yaml")
    with open(cfg_path, "w") as fh:
        fh.write(CONFIG)
    t0 = time.perf_counter()
    for p in PROCS:
        assert main(["generate", "--config", cfg_path, "--procedure", p, "-q"]) == 0
    return load_config(cfg_path, env={}), time.perf_counter() - t0


@pytest.fixture(scope="module")
def run_a(tmp_path_factory):
    return _generate(str(tmp_path_factory.mktemp("run_a")))


@pytest.fixture(scope="module")
def datasets(run_a):
    cfg, _ = run_a
    return {p: read_dataset(os.path.join(cfg.output_root, p)) for p in PROCS}


@pytest.fixture(scope="module")
def acc_catalog(run_a):
    return catalog_for(run_a[0])


def _manifest_entry(ds, iid):
    return next(im for im in ds.manifest.images if im["image_id"] == iid)


# ---------------------------------------------------------------- 1


def test_criterion_1_procedure_invariants(run_a, datasets, acc_catalog):
    cfg, seconds = run_a
    with criterion(1, "procedure invariants, 200 images per procedure") as info:
        info.append(f"generation {seconds:.0f} s for {IMAGES_PER_PROC * len(PROCS)} images")
        assert seconds < TIME_BUDGET_S
        bad = []
        for p in PROCS:
            ds = datasets[p]
            assert len(ds.image_ids) == IMAGES_PER_PROC
            pcfg = cfg.procedure(p)
            for s in range(pcfg.num_scenes):
                scene = scene_for(pcfg, acc_catalog, s)
                floor, backdrop = LAYOUT[p]
                if scene.floor.kind != floor or (scene.backdrop is not None) != backdrop:
                    bad.append(f"{p}/{s} floor or backdrop")
                if p in ("P1", "P3"):
                    for o in scene.placed_objects:
                        if abs(o.pose.apply(o.mesh.vertices)[:, 2].min()) > 1e-6:
                            bad.append(f"{p}/{s} min-z")
                if p == "P5":
                    for o, e in zip(scene.placed_objects, acc_catalog.classes):
                        ref = e.placement.to_pose()
                        if not (np.array_equal(o.pose.rotation, ref.rotation)
                                and np.array_equal(o.pose.translation, ref.translation)):
                            bad.append(f"{p}/{s} placement")
                boxes = [mesh_obb(o.mesh, o.pose) for o in (*scene.placed_objects, *scene.distractors)]
                if any(check_overlap(a, b) for i, a in enumerate(boxes) for b in boxes[i + 1:]):
                    bad.append(f"{p}/{s} overlap")
                # the stored poses are the ones of this scene
                for v in range(pcfg.views_per_scene):
                    iid = s * pcfg.views_per_scene + v + 1
                    cam = camera_for(pcfg, scene, s, v)
                    for rec, o in zip(ds.scene_gt[iid], scene.placed_objects):
                        m2c = compose(cam, o.pose)
                        if not (np.array_equal(rec.rotation, m2c.rotation) and np.array_equal(rec.translation, m2c.translation)):
                            bad.append(f"{p}/{iid} stored pose")
        info.append(f"{len(bad)} violations over {len(PROCS) * 40} scenes")
        assert not bad, bad[:10]


# ---------------------------------------------------------------- 2


def _mask_in_hull(points_xy, corners_cam, k, near=1e-2):
    """True where pixel centres lie within the projected box hull grown by one pixel."""
    pts = []
    for i, j in itertools.combinations(range(8), 2):
        a, b = corners_cam[i], corners_cam[j]
        if a[2] < near and b[2] < near:
            continue
        if a[2] < near:
            a = a + (near - a[2]) / (b[2] - a[2]) * (b - a)
        if b[2] < near:
            b = b + (near - b[2]) / (a[2] - b[2]) * (a - b)
        pts += [a, b]
    pts = np.array(pts)
    uv = np.column_stack((k.fx * pts[:, 0] / pts[:, 2] + k.cx, k.fy * pts[:, 1] / pts[:, 2] + k.cy))
    hull = ConvexHull(uv)
    poly = uv[hull.vertices]
    eq = hull.equations  # n.x + c <= 0 inside, n unit
    signed = points_xy @ eq[:, :2].T + eq[:, 2]
    inside = (signed <= 1e-9).all(axis=1)
    out = ~inside
    if out.any():
        q = points_xy[out]
        best = np.full(len(q), np.inf)
        for a, b in zip(poly, np.roll(poly, -1, axis=0)):
            d = b - a
            t = np.clip(((q - a) @ d) / (d @ d), 0.0, 1.0)
            best = np.minimum(best, np.linalg.norm(q - (a + t[:, None] * d), axis=1))
        inside[out] = best <= 1.0 + 1e-9
    return inside


def test_criterion_2_annotation_consistency(datasets):
    with criterion(2, "bbox/area re-derived from instance PNGs; masks inside projected box hull") as info:
        mismatches = outside = n_ann = 0
        for p in PROCS:
            ds = datasets[p]
            for iid in ds.image_ids:
                inst = ds.instance_map(iid)
                anns = {a["instance_id"]: a for a in ds.annotations(iid)}
                present = set(np.unique(inst).tolist()) - {0}
                if present != set(anns):
                    mismatches += 1
                k = ds.intrinsics(iid)
                for rec in ds.scene_gt[iid]:
                    a = anns.get(rec.instance_id)
                    if a is None:
                        continue
                    n_ann += 1
                    bbox, area = bbox_from_mask(inst, rec.instance_id)
                    if bbox != a["bbox"] or area != a["area"] or rec.obj_id != a["category_id"]:
                        mismatches += 1
                    ys, xs = np.nonzero(inst == rec.instance_id)
                    corners = rec.pose.apply(local_box_corners(ds.models_info[rec.obj_id]))
                    if not _mask_in_hull(np.column_stack((xs, ys)).astype(float), corners, k).all():
                        outside += 1
        info.append(f"{n_ann} annotations, {mismatches} mismatches, {outside} masks outside hull")
        assert n_ann > 0 and mismatches == 0 and outside == 0


# ---------------------------------------------------------------- 3


def _boundary(inst):
    pad = np.pad(inst, 1, mode="edge")
    h, w = inst.shape
    out = np.zeros_like(inst, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            out |= pad[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] != inst
    return out


def test_criterion_3_depth_oracle(run_a, datasets, acc_catalog):
    cfg, _ = run_a
    rng = np.random.default_rng(3)
    all_ids = [(p, iid) for p in PROCS for iid in datasets[p].image_ids]
    picks = [all_ids[i] for i in rng.choice(len(all_ids), 20, replace=False)]
    with criterion(3, "ray-cast depth oracle, 20 images x 500 hit pixels") as info:
        good = total = 0
        worst = 1.0
        for p, iid in picks:
            ds = datasets[p]
            m = _manifest_entry(ds, iid)
            pcfg = cfg.procedure(p)
            scene = scene_for(pcfg, acc_catalog, m["scene"])
            cam = camera_for(pcfg, scene, m["scene"], m["view"])
            stored_cam = ds.camera(iid)
            assert np.array_equal(cam.rotation, stored_cam.rotation)
            depth = ds.depth(iid)
            ok = (depth > 0) & ~_boundary(ds.instance_map(iid))
            vs, us = np.nonzero(ok)
            sel = rng.choice(len(vs), min(500, len(vs)), replace=False)
            hits = 0
            for i in sel:
                d = depth[vs[i], us[i]]
                o = raycast_depth_oracle(scene, cam, ds.intrinsics(iid), (float(us[i]), float(vs[i])))
                hits += abs(o - d) <= max(1e-4, 1e-3 * d)
            good += hits
            total += len(sel)
            worst = min(worst, hits / len(sel))
        info.append(f"{good}/{total} = {good / total:.4f} within tolerance, worst image {worst:.3f}")
        assert total >= 20 * 500 * 0.9
        assert good >= 0.99 * total


# ---------------------------------------------------------------- 4


def test_criterion_4_settling():
    rng = np.random.default_rng(4)
    cube = box_mesh((1.0, 1.0, 1.0))
    plate = box_mesh((0.1, 0.1, 0.002), origin=(-0.05, -0.05, -0.001))
    with criterion(4, "settling: unit cube and 100x100x2 mm plate") as info:
        cube_ok = 0
        for _ in range(1000):
            pose = settle_on_plane(cube, random_rotation(rng), (0.0, 0.0))
            aligned = min(np.abs(pose.rotation - r).max() for r in AXIS_ALIGNED) < 1e-9
            grounded = abs(pose.apply(cube.vertices)[:, 2].min()) <= 1e-9
            cube_ok += aligned and grounded
        flat = 0
        for _ in range(1000):
            pose = settle_on_plane(plate, random_rotation(rng), (0.0, 0.0))
            flat += abs(abs(pose.rotation[2, 2]) - 1.0) < 1e-9
        info.append(f"cube {cube_ok}/1000 axis-aligned, plate {flat}/1000 on a large face")
        assert cube_ok == 1000
        assert flat >= 990


# ---------------------------------------------------------------- 5


def test_criterion_5_mixer(datasets, tmp_path):
    with criterion(5, "mixer counts for the five combinations, 70% train per procedure") as info:
        for name, pct in COMBINATION_PERCENT.items():
            plan = MixPlan.from_percent(15000, DEFAULT_COMBINATIONS[name])
            assert plan_counts(plan) == {p: 15000 * v // 100 for p, v in zip(PROCS, pct)}
            for p, (tr, te) in plan_splits(plan).items():
                assert abs(tr - 0.7 * (tr + te)) <= 1
        c2 = plan_counts(MixPlan.from_percent(15000, DEFAULT_COMBINATIONS["C2"]))
        assert (c2["P1"], c2["P4"], c2["P5"]) == (6000, 6000, 3000)
        info.append("C2 at 15000: 6000/6000/3000")
        sources = {p: datasets[p] for p in PROCS}
        for name in ("C1", "C2"):
            plan = MixPlan.from_percent(IMAGES_PER_PROC, DEFAULT_COMBINATIONS[name], name=name)
            man = assemble(plan, sources, tmp_path / name)
            expect = {p: n for p, n in plan_counts(plan).items() if n}
            assert man.counts() == expect
            for p, c in man.split_counts().items():
                assert abs(c["train"] - 0.7 * expect[p]) <= 1
            out = read_dataset(tmp_path / name)
            for iid in out.image_ids:
                inst = out.instance_map(iid)
                for a in out.annotations(iid):
                    assert list(bbox_from_mask(inst, a["instance_id"])) == [a["bbox"], a["area"]]
            info.append(f"{name} at {IMAGES_PER_PROC}: {man.split_counts()}")


# ---------------------------------------------------------------- 6


def test_criterion_6_evaluator_oracle():
    rng = np.random.default_rng(6)
    with criterion(6, "map_metrics vs brute-force evaluator on 1000 random instances") as info:
        worst = 0.0
        for _ in range(1000):
            dets, gts = random_instance(rng)
            rep = map_metrics(dets, gts, categories=[1, 2])
            m50, m5095 = brute_map(dets, gts)
            worst = max(worst, abs(rep.map50 - m50), abs(rep.map50_95 - m5095))
        gts = [{"image_id": 1, "bbox": [0, 0, 10, 10]}, {"image_id": 1, "bbox": [30, 30, 10, 10]}]
        dets = [{"image_id": 1, "bbox": [0, 0, 10, 10], "score": 0.9},
                {"image_id": 1, "bbox": [60, 60, 5, 5], "score": 0.8}]
        hand = average_precision(dets, gts)
        info.append(f"max deviation {worst:.3g}, hand case {hand!r}")
        assert worst <= 1e-9
        assert hand == 51 / 101


# ---------------------------------------------------------------- 7


def test_criterion_7_matrix(run_a, tmp_path, capsys):
    cfg, _ = run_a
    roots = {p: os.path.join(cfg.output_root, p) for p in PROCS}
    # stand-ins for the two real validation sets
    roots["Real parts loose"] = roots["P2"]
    roots["Real assembly"] = roots["P5"]
    models = [*PROCS, "C1", "C2", "C3", "C4", "C5"]
    spec = {"sets": roots, "models": {}, "metric": "map50_95"}
    for set_name, root in roots.items():
        coco = json.load(open(os.path.join(root, "coco_annotations.json")))
        perfect = [{"image_id": a["image_id"], "category_id": a["category_id"], "bbox": a["bbox"], "score": 1.0}
                   for a in coco["annotations"]]
        path = tmp_path / f"{set_name.replace(' ', '_')}.json"
        path.write_text(json.dumps(perfect))
        for m in models:
            spec["models"].setdefault(m, {})[set_name] = str(path)
    (tmp_path / "matrix.json").write_text(json.dumps(spec))
    with criterion(7, "comparison matrix layout and perfect-detection entries") as info:
        capsys.readouterr()
        assert main(["evaluate", "--matrix", str(tmp_path / "matrix.json"), "--csv", str(tmp_path / "m.csv")]) == 0
        printed = capsys.readouterr().out
        rows = [line.split(",") for line in (tmp_path / "m.csv").read_text().splitlines()]
        assert rows[0] == ["Validated on", *models]
        assert [r[0] for r in rows[1:]] == [*PROCS, "Average Sim", "Real parts loose", "Real assembly", "Average Real"]
        assert all(float(v) == 1.0 for r in rows[1:] for v in r[1:])
        assert "Average Sim" in printed and "Average Real" in printed
        # non-trivial values: averages are the group means
        gt = {s: json.load(open(os.path.join(r, "coco_annotations.json"))) for s, r in roots.items()}
        half = {s: [{**a, "score": 1.0} for a in g["annotations"][::2]] for s, g in gt.items()}
        rep = matrix_report([("A", half)], gt)
        sims = [rep.values[(s, "A")] for s in PROCS]
        assert rep.averages["Average Sim"]["A"] == float(np.mean(sims))
        info.append(f"{len(rows) - 1} rows x {len(models)} models")


# ---------------------------------------------------------------- 8


def test_criterion_8_determinism(run_a, tmp_path_factory):
    cfg_a, _ = run_a
    cfg_b, seconds = _generate(str(tmp_path_factory.mktemp("run_b")))
    with criterion(8, "two generate runs are byte-identical") as info:
        diffs = []
        for p in PROCS:
            a, b = os.path.join(cfg_a.output_root, p), os.path.join(cfg_b.output_root, p)
            for name in ("manifest.json", "coco_annotations.json", "scene_gt.json", "scene_camera.json", "models_info.json"):
                if open(os.path.join(a, name), "rb").read() != open(os.path.join(b, name), "rb").read():
                    diffs.append(f"{p}/{name}")
            da, db = read_dataset(a), read_dataset(b)
            for iid in da.image_ids:
                for get in (da.rgb, da.depth, da.class_map, da.instance_map):
                    other = getattr(db, get.__name__)
                    if not np.array_equal(get(iid), other(iid)):
                        diffs.append(f"{p}/{iid}/{get.__name__}")
        info.append(f"second run {seconds:.0f} s, {len(diffs)} differences")
        assert not diffs, diffs[:10]


# ---------------------------------------------------------------- 9

CORNERS = [(x, y, z) for x in (0, 1000) for y in (0, 1000) for z in (0, 1000)]
FACES = [(0, 3, 2), (0, 1, 3), (4, 7, 5), (4, 6, 7), (0, 5, 1), (0, 4, 5),
         (2, 7, 6), (2, 3, 7), (0, 6, 4), (0, 2, 6), (1, 7, 3), (1, 5, 7)]


def _emit(fmt):
    if fmt == "stl-ascii":
        body = "".join("facet normal 0 0 0\nouter loop\n" + "".join("vertex %d %d %d\n" % CORNERS[i] for i in f)
                       + "endloop\nendfacet\n" for f in FACES)
        return ("solid c\n" + body + "endsolid c\n").encode()
    if fmt == "stl-binary":
        out = b"\0" * 80 + struct.pack("<I", len(FACES))
        for f in FACES:
            out += struct.pack("<12fH", 0, 0, 0, *(c for i in f for c in CORNERS[i]), 0)
        return out
    if fmt == "ply":
        head = ("ply\nformat ascii 1.0\nelement vertex 8\nproperty float x\nproperty float y\nproperty float z\n"
                "element face 12\nproperty list uchar int vertex_indices\nend_header\n")
        return (head + "".join("%d %d %d\n" % c for c in CORNERS) + "".join("3 %d %d %d\n" % f for f in FACES)).encode()
    return ("".join("v %d %d %d\n" % c for c in CORNERS) + "".join("f %d %d %d\n" % tuple(i + 1 for i in f) for f in FACES)).encode()


def test_criterion_9_parsers(tmp_path):
    ext = {"stl-ascii": "stl", "stl-binary": "stl", "ply": "ply", "obj": "obj"}
    with criterion(9, "cube round trips through STL ascii/binary, PLY, OBJ") as info:
        stats = []
        for fmt in ("stl-ascii", "stl-binary", "ply", "obj"):
            p = tmp_path / f"cube_{fmt}.{ext[fmt]}"
            p.write_bytes(_emit(fmt))
            m = load_mesh(p)
            assert (len(m.vertices), len(m.triangles)) == (8, 12), fmt
            brute = max(math.dist(a, b) for a, b in itertools.combinations(m.vertices.tolist(), 2))
            s = mesh_stats(m)
            assert s.diameter == brute
            assert s.diameter == pytest.approx(math.sqrt(3), abs=1e-12)
            stats.append(s.to_dict())
        assert all(s == stats[0] for s in stats)
        info.append(f"diameter {stats[0]['diameter']!r}")
