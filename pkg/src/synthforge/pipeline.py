"""Dataset generation: compose scenes, render views, write the dataset.

Every scene and view draws from its own seeded stream, so output does not
depend on the number of worker processes. A run writes into
``<output_root>/_incomplete/<name>`` and is moved to ``<output_root>/<name>``
only after the indexes are complete; a failed run stays quarantined.
"""

from __future__ import annotations

import logging
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .annotate import DatasetManifest, DatasetWriter, PoseRecord, write_models_info
from .assembly import Catalog, load_catalog
from .config import DEMO_ASSEMBLY, PipelineConfig
from .errors import SynthForgeError
from .geometry import CameraIntrinsics, RigidTransform, compose
from .mixer import assemble, split_counts
from .render import FrameSet, render
from .rng import image_hash, scene_stream, view_stream
from .scene import ProcedureConfig, SceneSpec, compose_scene, sample_camera

log = logging.getLogger(__name__)

INCOMPLETE = "_incomplete"


def catalog_for(cfg: PipelineConfig) -> Catalog:
    if cfg.assembly == DEMO_ASSEMBLY:
        from .demo import write_demo_assembly

        with tempfile.TemporaryDirectory() as tmp:
            return load_catalog(write_demo_assembly(tmp), cfg.unit_scale)
    return load_catalog(cfg.assembly, cfg.unit_scale)


def scene_for(pcfg: ProcedureConfig, catalog: Catalog, scene_index: int) -> SceneSpec:
    return compose_scene(pcfg, catalog, scene_stream(pcfg.seed, pcfg.procedure, scene_index))


def camera_for(pcfg: ProcedureConfig, scene: SceneSpec, scene_index: int, view_index: int) -> RigidTransform:
    rng = view_stream(pcfg.seed, pcfg.procedure, scene_index, view_index)
    radius = rng.uniform(*pcfg.camera_radius)
    return sample_camera(scene, radius, rng, pcfg.elevation_range, pcfg.roll_deg)


def object_poses(objects, camera: RigidTransform, image_id: int) -> list[PoseRecord]:
    """Camera-from-model poses of placed objects."""
    out = []
    for o in objects:
        m2c = compose(camera, o.pose)
        out.append(PoseRecord(image_id, o.category_id, m2c.rotation, m2c.translation, o.instance_id))
    return out


def train_indices(seed: int, n: int, split_ratio: float) -> set:
    """Image indices assigned to train: the lowest-hash round(ratio * n) indices."""
    n_train, _ = split_counts(n, split_ratio)
    ranked = sorted(range(n), key=lambda i: (image_hash(seed, i), i))
    return set(ranked[:n_train])


def render_scene(pcfg: ProcedureConfig, catalog: Catalog, k: CameraIntrinsics, scene_index: int):
    """All views of one scene as ``(view_index, FrameSet, scene, camera)``."""
    scene = scene_for(pcfg, catalog, scene_index)
    out = []
    for v in range(pcfg.views_per_scene):
        cam = camera_for(pcfg, scene, scene_index, v)
        out.append((v, render(scene, cam, k), scene, cam))
    return out


# worker-process state, set by _init_worker
_W: dict = {}


def _init_worker(pcfg, catalog, k):
    _W.update(pcfg=pcfg, catalog=catalog, k=k)


def _work(scene_index: int):
    return [(v, f, s.placed_objects, cam) for v, f, s, cam in render_scene(_W["pcfg"], _W["catalog"], _W["k"], scene_index)]


def _scenes_serial(pcfg, catalog, k):
    for s in range(pcfg.num_scenes):
        yield s, [(v, f, sc.placed_objects, cam) for v, f, sc, cam in render_scene(pcfg, catalog, k, s)]


def _scenes_parallel(pcfg, catalog, k, jobs):
    with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(pcfg, catalog, k)) as ex:
        window = 2 * jobs
        pending = {}
        nxt = 0
        for s in range(pcfg.num_scenes):
            while nxt < pcfg.num_scenes and nxt < s + window:
                pending[nxt] = ex.submit(_work, nxt)
                nxt += 1
            yield s, pending.pop(s).result()


def _prepare_staging(output_root: str, name: str) -> tuple[str, str]:
    final = os.path.join(output_root, name)
    staging = os.path.join(output_root, INCOMPLETE, name)
    if os.path.exists(staging):
        shutil.rmtree(staging)
    os.makedirs(staging)
    return staging, final


def _publish(staging: str, final: str) -> None:
    if os.path.exists(final):
        shutil.rmtree(final)
    os.replace(staging, final)
    parent = os.path.dirname(staging)
    if os.path.isdir(parent) and not os.listdir(parent):
        os.rmdir(parent)


def generate_dataset(pcfg: ProcedureConfig, catalog: Catalog, k: CameraIntrinsics, out_dir: str,
                     split_ratio: float = 0.7, jobs: int = 1, progress=None) -> DatasetManifest:
    """Render ``num_scenes * views_per_scene`` images of one procedure into ``out_dir`` (written in place)."""
    n = pcfg.num_scenes * pcfg.views_per_scene
    train = train_indices(pcfg.seed, n, split_ratio)
    info = write_models_info(catalog.category_meshes(), catalog.categories)
    extra = {"procedure": pcfg.procedure, "num_scenes": pcfg.num_scenes, "views_per_scene": pcfg.views_per_scene}
    writer = DatasetWriter(out_dir, catalog.categories, info, pcfg.seed, split_ratio, extra)
    scenes = _scenes_parallel(pcfg, catalog, k, jobs) if jobs > 1 else _scenes_serial(pcfg, catalog, k)
    for s, views in scenes:
        for v, frames, objects, cam in views:
            index = s * pcfg.views_per_scene + v
            image_id = index + 1
            poses = object_poses(objects, cam, image_id)
            prov = {"procedure": pcfg.procedure, "seed": pcfg.seed, "scene": s, "view": v,
                    "split": "train" if index in train else "test"}
            writer.add_frames(image_id, index, frames, poses, prov)
        if progress is not None:
            progress(s + 1, pcfg.num_scenes)
    return writer.finish()


def run_generate(cfg: PipelineConfig, procedure: str, jobs: int = 1, progress=None) -> str:
    """Generate the dataset of one procedure under ``cfg.output_root``; returns its root."""
    pcfg = cfg.procedure(procedure)
    catalog = catalog_for(cfg)
    staging, final = _prepare_staging(cfg.output_root, procedure)
    try:
        generate_dataset(pcfg, catalog, cfg.intrinsics, staging, cfg.split_ratio, jobs, progress)
    except (SynthForgeError, OSError):
        log.error("generation of %s failed; partial output left in %s", procedure, staging)
        raise
    _publish(staging, final)
    return final


def run_mix(cfg: PipelineConfig, combination: str, sources: dict | None = None) -> str:
    """Assemble a combination dataset from the per-procedure datasets under ``cfg.output_root``."""
    plan = cfg.mix(combination)
    if sources is None:
        sources = {p: os.path.join(cfg.output_root, p) for p in plan.proportions
                   if os.path.isdir(os.path.join(cfg.output_root, p))}
    staging, final = _prepare_staging(cfg.output_root, combination)
    try:
        assemble(plan, sources, staging)
    except (SynthForgeError, OSError):
        log.error("mix %s failed; partial output left in %s", combination, staging)
        raise
    _publish(staging, final)
    return final


def frame_digest(frames: FrameSet) -> str:
    import hashlib

    h = hashlib.sha256()
    for a in (frames.rgb, frames.depth, frames.class_map, frames.instance_map):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()
