"""Combination datasets built from per-procedure datasets.

Counts are apportioned by the largest-remainder method (ties go to the
earlier procedure), and each procedure's share is split into train and test
the same way, so the train fraction holds per procedure, not only overall.
Images are reused from the sources: the first N train and first M test images
of each procedure, in image id order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

from .annotate import Dataset, DatasetWriter, PoseRecord, read_dataset
from .errors import ConfigError, InsufficientImagesError, SchemaError
from .scene import PROCEDURES

DEFAULT_SPLIT_RATIO = 0.7

# percent of images per procedure
DEFAULT_COMBINATIONS = {
    "C1": {"P1": 20, "P2": 20, "P3": 10, "P4": 30, "P5": 20},
    "C2": {"P1": 40, "P2": 0, "P3": 0, "P4": 40, "P5": 20},
    "C3": {"P1": 0, "P2": 40, "P3": 0, "P4": 40, "P5": 20},
    "C4": {"P1": 0, "P2": 0, "P3": 0, "P4": 80, "P5": 20},
    "C5": {"P1": 50, "P2": 0, "P3": 0, "P4": 50, "P5": 0},
}


def _exact(x) -> Fraction:
    # str() of a float is its shortest round-trip decimal, so 0.3 becomes 3/10
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass(frozen=True)
class MixPlan:
    total_images: int
    proportions: dict  # procedure -> fraction in [0, 1]
    split_ratio: float = DEFAULT_SPLIT_RATIO
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.total_images, int) or self.total_images <= 0:
            raise ConfigError(f"total_images must be a positive integer, got {self.total_images!r}")
        unknown = set(self.proportions) - set(PROCEDURES)
        if unknown:
            raise ConfigError(f"unknown procedures in mix plan: {sorted(unknown)}")
        for p, f in self.proportions.items():
            if not (0.0 <= float(f) <= 1.0) or not math.isfinite(float(f)):
                raise ConfigError(f"fraction for {p} must lie in [0, 1], got {f!r}")
        if abs(sum(float(f) for f in self.proportions.values()) - 1.0) > 1e-9:
            raise ConfigError(f"mix fractions sum to {sum(self.proportions.values())!r}, not 1")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio!r}")

    @classmethod
    def from_percent(cls, total_images: int, percent: dict, split_ratio: float = DEFAULT_SPLIT_RATIO, name: str = ""):
        return cls(total_images, {p: float(_exact(v) / 100) for p, v in percent.items()}, split_ratio, name)

    def ordered(self) -> list[tuple[str, Fraction]]:
        return [(p, _exact(self.proportions[p])) for p in PROCEDURES if p in self.proportions]


def largest_remainder(total: int, weights) -> list[int]:
    """Integer parts of ``total * w`` summing to ``total``; ties favour earlier weights."""
    w = [_exact(x) for x in weights]
    s = sum(w)
    if s <= 0:
        raise ConfigError("weights must have a positive sum")
    quotas = [total * x / s for x in w]
    base = [math.floor(q) for q in quotas]
    short = total - sum(base)
    order = sorted(range(len(w)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def split_counts(n: int, split_ratio: float) -> tuple[int, int]:
    """(train, test) for ``n`` images."""
    if n == 0:
        return 0, 0
    r = _exact(split_ratio)
    train, test = largest_remainder(n, [r, 1 - r])
    return train, test


def plan_counts(plan: MixPlan) -> dict:
    """Images per procedure, summing exactly to ``plan.total_images``."""
    items = plan.ordered()
    counts = largest_remainder(plan.total_images, [f for _, f in items])
    return {p: c for (p, _), c in zip(items, counts)}


def plan_splits(plan: MixPlan) -> dict:
    """Procedure -> (train, test) counts."""
    return {p: split_counts(n, plan.split_ratio) for p, n in plan_counts(plan).items()}


@dataclass
class _Pick:
    procedure: str
    source: Dataset
    source_name: str
    image_ids: list = field(default_factory=list)


def _check_compatible(sources: dict) -> None:
    ref_name, ref = next(iter(sources.items()))
    for name, ds in sources.items():
        if ds.categories != ref.categories:
            raise SchemaError(f"category ids of {name} {ds.categories} differ from {ref_name} {ref.categories}")
        if ds.models_info != ref.models_info:
            raise SchemaError(f"models_info of {name} differs from {ref_name}")
        sizes = {(im["width"], im["height"]) for im in ds.images.values()}
        ref_sizes = {(im["width"], im["height"]) for im in ref.images.values()}
        if len(sizes | ref_sizes) > 1:
            raise SchemaError(f"camera resolution of {name} {sorted(sizes)} differs from {ref_name} {sorted(ref_sizes)}")


def select(plan: MixPlan, sources: dict) -> list[_Pick]:
    """Choose source images for every procedure; raises before anything is written."""
    picks = []
    short = []
    for proc, (n_train, n_test) in plan_splits(plan).items():
        if n_train + n_test == 0:
            continue
        if proc not in sources:
            short.append(f"{proc}: no source dataset")
            continue
        ds = sources[proc]
        by_split = {"train": [], "test": []}
        man = {im["image_id"]: im for im in ds.manifest.images}
        for iid in ds.image_ids:
            m = man.get(iid, {})
            if m.get("procedure", proc) == proc:
                by_split[m.get("split", "train")].append(iid)
        if len(by_split["train"]) < n_train or len(by_split["test"]) < n_test:
            short.append(f"{proc}: need {n_train} train / {n_test} test, source has "
                         f"{len(by_split['train'])} / {len(by_split['test'])}")
            continue
        picks.append(_Pick(proc, ds, proc, by_split["train"][:n_train] + by_split["test"][:n_test]))
    if short:
        raise InsufficientImagesError("; ".join(short))
    return picks


def assemble(plan: MixPlan, sources: dict, out_root) -> "object":
    """Write the combination dataset for ``plan`` under ``out_root`` and return its manifest.

    ``sources`` maps procedure id to a dataset root or a loaded :class:`Dataset`.
    """
    loaded = {p: (s if isinstance(s, Dataset) else read_dataset(s)) for p, s in sources.items()}
    needed = {p: loaded[p] for p, n in plan_counts(plan).items() if n > 0 and p in loaded}
    if needed:
        _check_compatible(needed)
    picks = select(plan, loaded)
    ref = next(iter(needed.values()))
    extra = {
        "combination": plan.name,
        "total_images": plan.total_images,
        "proportions": {p: float(f) for p, f in plan.ordered()},
    }
    writer = DatasetWriter(out_root, ref.categories, ref.models_info, None, plan.split_ratio, extra)
    man_by_src = {p.procedure: {im["image_id"]: im for im in p.source.manifest.images} for p in picks}
    new_id = 0
    for pick in picks:
        ds = pick.source
        for src_id in pick.image_ids:
            new_id += 1
            poses = [PoseRecord(new_id, q.obj_id, q.rotation, q.translation, q.instance_id) for q in ds.scene_gt.get(src_id, [])]
            src_man = man_by_src[pick.procedure].get(src_id, {})
            prov = {k: v for k, v in src_man.items() if k not in ("image_id", "file_name")}
            prov.setdefault("procedure", pick.procedure)
            prov["source"] = {"dataset": pick.source_name, "image_id": src_id}
            src_index = int(os.path.splitext(os.path.basename(ds.images[src_id]["file_name"]))[0])
            writer.add_copy(ds.root, src_index, new_id, new_id - 1, poses, ds.annotations(src_id),
                            ds.scene_camera[src_id], prov)
    return writer.finish()
