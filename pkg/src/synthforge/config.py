"""Pipeline configuration (YAML).

Example, with every key optional except ``assembly``::

    seed: 0
    output_root: out
    assembly: export/          # folder with PartList.csv, CategoryList.csv, Classes/, Structure/
    unit_scale: 0.001          # mesh file units to meters
    split_ratio: 0.7
    camera: {width: 640, height: 480, fx: 572.4, fy: 572.4, cx: 320, cy: 240}
    textures_dir: null         # image files for floor textures, procedural if unset
    backdrops_dir: null        # image files for backdrops, procedural if unset
    materials: {base_color: [0, 1], roughness: [0, 1], specular: [0, 1], metalness: [0, 1]}
    lights: {sun_intensity: [2, 6], point_intensity: [80, 400], plane_intensity: [80, 400],
             color: [0.7, 1.0], plane_half_extent: [0.1, 0.5]}
    defaults:                  # applied to every procedure
      num_scenes: 10
      views_per_scene: 5
    procedures:                # per-procedure overrides; listed procedures are enabled
      P1: {num_scenes: 40}
      P4: {}
    mix_total_images: 100
    mixes:                     # percent per procedure; C1-C5 are built in
      C6: {percent: {P1: 50, P4: 50}, total_images: 40}

Relative paths are resolved against the directory of the config file. The
``SYNTHFORGE_SEED`` environment variable overrides ``seed``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError
from .geometry import CameraIntrinsics
from .mixer import DEFAULT_COMBINATIONS, DEFAULT_SPLIT_RATIO, MixPlan
from .scene import PROCEDURES, LightRanges, MaterialRanges, ProcedureConfig

SEED_ENV = "SYNTHFORGE_SEED"
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
DEFAULT_CAMERA = {"width": 640, "height": 480, "fx": 572.4, "fy": 572.4, "cx": 320.0, "cy": 240.0}
DEFAULT_MIX_TOTAL = 100
DEMO_ASSEMBLY = "demo"

_TOP_KEYS = {
    "seed", "output_root", "assembly", "unit_scale", "split_ratio", "camera", "textures_dir", "backdrops_dir",
    "materials", "lights", "defaults", "procedures", "mix_total_images", "mixes",
}
_TUPLE_FIELDS = {"objects_per_scene", "distractors_per_scene", "camera_radius", "elevation_deg", "roll_deg"}


@dataclass
class PipelineConfig:
    intrinsics: CameraIntrinsics = field(default_factory=lambda: CameraIntrinsics(**DEFAULT_CAMERA))
    procedures: dict = field(default_factory=dict)  # procedure id -> ProcedureConfig
    assembly: str = DEMO_ASSEMBLY
    unit_scale: float = 1e-3
    output_root: str = "out"
    seed: int = 0
    split_ratio: float = DEFAULT_SPLIT_RATIO
    textures_dir: str | None = None
    backdrops_dir: str | None = None
    mixes: dict = field(default_factory=dict)  # name -> MixPlan
    config_path: str | None = None

    def procedure(self, proc: str) -> ProcedureConfig:
        if proc not in self.procedures:
            raise ConfigError(f"procedure {proc} is not enabled in the config (enabled: {sorted(self.procedures)})")
        return self.procedures[proc]

    def mix(self, name: str) -> MixPlan:
        if name not in self.mixes:
            raise ConfigError(f"unknown combination {name!r} (known: {sorted(self.mixes)})")
        return self.mixes[name]


def _images_in(folder: str | None) -> tuple:
    if folder is None:
        return ()
    return tuple(sorted(os.path.join(folder, f) for f in os.listdir(folder) if f.lower().endswith(IMAGE_EXTENSIONS)))


def _range(value, name):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a [low, high] pair, got {value!r}")
    return tuple(float(v) for v in value)


def _ranges(cls, block: dict | None, name: str):
    block = block or {}
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    return cls(**{k: _range(v, f"{name}.{k}") for k, v in block.items()})


def _procedure(proc: str, block: dict, **shared) -> ProcedureConfig:
    known = {f.name for f in dataclasses.fields(ProcedureConfig)} - {"procedure", "seed", "materials", "lights", "textures", "backdrops"}
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"unknown keys for procedure {proc}: {sorted(unknown)}")
    kw = {}
    for k, v in block.items():
        if k in _TUPLE_FIELDS and v is not None:
            kw[k] = tuple(v)
        elif k == "floating_bounds":
            kw[k] = tuple(tuple(float(x) for x in corner) for corner in v)
        else:
            kw[k] = v
    try:
        return ProcedureConfig(procedure=proc, **kw, **shared)
    except TypeError as e:
        raise ConfigError(f"procedure {proc}: {e}") from None


def parse_config(data: dict | None, base_dir: str = ".", env=None) -> PipelineConfig:
    """Build a :class:`PipelineConfig` from a parsed YAML mapping."""
    data = dict(data or {})
    env = os.environ if env is None else env
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    def path(key):
        v = data.get(key)
        if v is None:
            return None
        p = v if os.path.isabs(v) else os.path.normpath(os.path.join(base_dir, v))
        return p

    seed = data.get("seed", 0)
    if env.get(SEED_ENV, "") != "":
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    cam = {**DEFAULT_CAMERA, **(data.get("camera") or {})}
    if set(cam) - set(DEFAULT_CAMERA):
        raise ConfigError(f"unknown camera keys: {sorted(set(cam) - set(DEFAULT_CAMERA))}")
    try:
        k = CameraIntrinsics(float(cam["fx"]), float(cam["fy"]), float(cam["cx"]), float(cam["cy"]),
                             int(cam["width"]), int(cam["height"]))
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad camera block: {e}") from None

    textures_dir, backdrops_dir = path("textures_dir"), path("backdrops_dir")
    for key, d in (("textures_dir", textures_dir), ("backdrops_dir", backdrops_dir)):
        if d is not None and not os.path.isdir(d):
            raise ConfigError(f"{key} {d} does not exist")
    assembly = data.get("assembly", DEMO_ASSEMBLY)
    if assembly != DEMO_ASSEMBLY:
        assembly = path("assembly")
        if not os.path.isdir(assembly):
            raise ConfigError(f"assembly folder {assembly} does not exist")

    shared = dict(
        seed=seed,
        materials=_ranges(MaterialRanges, data.get("materials"), "materials"),
        lights=_ranges(LightRanges, data.get("lights"), "lights"),
        textures=_images_in(textures_dir),
        backdrops=_images_in(backdrops_dir),
    )
    defaults = data.get("defaults") or {}
    proc_blocks = data.get("procedures")
    if proc_blocks is None:
        proc_blocks = {p: {} for p in PROCEDURES}
    if set(proc_blocks) - set(PROCEDURES):
        raise ConfigError(f"unknown procedures: {sorted(set(proc_blocks) - set(PROCEDURES))}")
    try:
        procedures = {p: _procedure(p, {**defaults, **(proc_blocks[p] or {})}, **shared) for p in PROCEDURES if p in proc_blocks}
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from None

    split_ratio = float(data.get("split_ratio", DEFAULT_SPLIT_RATIO))
    mix_total = data.get("mix_total_images", DEFAULT_MIX_TOTAL)
    mixes = {name: MixPlan.from_percent(int(mix_total), pct, split_ratio, name) for name, pct in DEFAULT_COMBINATIONS.items()}
    for name, block in (data.get("mixes") or {}).items():
        if not isinstance(block, dict) or "percent" not in block:
            raise ConfigError(f"mix {name} needs a 'percent' mapping")
        mixes[name] = MixPlan.from_percent(int(block.get("total_images", mix_total)), block["percent"], split_ratio, name)

    if not procedures and not mixes:
        raise ConfigError("the config enables no procedure and no mix")
    return PipelineConfig(
        intrinsics=k,
        procedures=procedures,
        assembly=assembly,
        unit_scale=float(data.get("unit_scale", 1e-3)),
        output_root=path("output_root") or os.path.normpath(os.path.join(base_dir, "out")),
        seed=seed,
        split_ratio=split_ratio,
        textures_dir=textures_dir,
        backdrops_dir=backdrops_dir,
        mixes=mixes,
    )


def load_config(path, env=None) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    cfg = parse_config(data, os.path.dirname(os.path.abspath(str(path))), env)
    cfg.config_path = os.path.abspath(str(path))
    return cfg


SAMPLE_CONFIG = """\
# synthforge pipeline configuration
seed: 0
output_root: out
assembly: assembly
split_ratio: 0.7
camera: {width: 640, height: 480, fx: 572.4, fy: 572.4, cx: 320, cy: 240}
defaults:
  num_scenes: 4
  views_per_scene: 5
procedures:
  P1: {}
  P2: {}
  P3: {}
  P4: {}
  P5: {}
mix_total_images: 10
"""
