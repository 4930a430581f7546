"""Detection metrics: IoU, COCO-style average precision, mAP and the comparison matrix.

AP follows the COCO primary recipe: detections sorted by descending score
(stable, so input order breaks ties), at most 100 detections per image and
category, greedy matching to the unmatched ground truth box of highest IoU,
and precision interpolated at 101 recall points 0.00, 0.01, ..., 1.00.

Empty cases: no ground truth and no detections gives AP 1.0; detections
without ground truth give 0.0. mAP averages only categories that have at
least one ground truth box or detection.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingPairError, SchemaError, UnknownCategoryError

IOU_THRESHOLDS = np.linspace(0.5, 0.95, 10)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
MAX_DETS = 100


@dataclass(frozen=True)
class Detection:
    image_id: int
    category_id: int
    bbox: tuple  # x, y, w, h in pixels
    score: float

    def __post_init__(self):
        if len(self.bbox) != 4 or not all(math.isfinite(v) for v in self.bbox):
            raise SchemaError(f"bad bbox {self.bbox!r}")
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise SchemaError(f"bbox width and height must be positive, got {self.bbox!r}")
        if not math.isfinite(self.score):
            raise SchemaError(f"score must be finite, got {self.score!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        try:
            return cls(int(d["image_id"]), int(d["category_id"]), tuple(float(v) for v in d["bbox"]), float(d["score"]))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"bad detection record {d!r}: {e}") from None


def _box(b) -> tuple:
    if isinstance(b, dict):
        b = b["bbox"]
    elif hasattr(b, "bbox"):
        b = b.bbox
    return tuple(float(v) for v in b)


def iou(a, b) -> float:
    """Intersection over union of two ``[x, y, w, h]`` boxes."""
    ax, ay, aw, ah = _box(a)
    bx, by, bw, bh = _box(b)
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _get(x, key):
    return x[key] if isinstance(x, dict) else getattr(x, key)


def _match(dets, gts, threshold: float):
    """(scores, is_tp) over all kept detections, plus the ground-truth count."""
    by_img_gt: dict = {}
    for g in gts:
        by_img_gt.setdefault(int(_get(g, "image_id")), []).append(_box(g))
    by_img_dt: dict = {}
    for d in dets:
        by_img_dt.setdefault(int(_get(d, "image_id")), []).append(d)
    scores, tps = [], []
    for img in sorted(by_img_dt):
        ds = by_img_dt[img]
        order = sorted(range(len(ds)), key=lambda i: -float(_get(ds[i], "score")))[:MAX_DETS]
        g = by_img_gt.get(img, [])
        taken = [False] * len(g)
        for i in order:
            box = _box(ds[i])
            best, best_j = -1.0, -1
            for j, gb in enumerate(g):
                if taken[j]:
                    continue
                v = iou(box, gb)
                if v >= threshold and v > best:
                    best, best_j = v, j
            if best_j >= 0:
                taken[best_j] = True
            scores.append(float(_get(ds[i], "score")))
            tps.append(best_j >= 0)
    return np.array(scores), np.array(tps, dtype=bool), len(gts)


def _ap_from(scores: np.ndarray, tps: np.ndarray, n_gt: int) -> float:
    if n_gt == 0:
        return 1.0 if len(scores) == 0 else 0.0
    if len(scores) == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(tps[order])
    fp = np.cumsum(~tps[order])
    recall = tp / n_gt
    precision = tp / (tp + fp)
    # make precision non-increasing from the right
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return float(sampled.mean())


def average_precision(dets, gts, iou_threshold: float = 0.5) -> float:
    """101-point interpolated AP for one category."""
    return _ap_from(*_match(dets, gts, iou_threshold))


@dataclass
class MetricReport:
    ap: dict  # category id -> list of AP per threshold in IOU_THRESHOLDS
    thresholds: tuple = tuple(float(t) for t in IOU_THRESHOLDS)
    map50: float = 0.0
    map50_95: float = 0.0

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "ap": {str(k): v for k, v in self.ap.items()},
            "mAP@0.5": self.map50,
            "mAP@[0.5:0.95]": self.map50_95,
        }


def map_metrics(dets, gts, categories=None) -> MetricReport:
    """Per-category AP at IoU 0.50:0.05:0.95, mAP@0.5 and mAP@[0.5:0.95].

    ``categories`` lists the known category ids (default: those in ``gts``);
    a detection of any other category is an error.
    """
    known = set(int(_get(g, "category_id")) for g in gts) if categories is None else {int(c) for c in categories}
    gt_by, dt_by = {}, {}
    for g in gts:
        c = int(_get(g, "category_id"))
        if c not in known:
            raise UnknownCategoryError(f"ground truth uses unknown category {c}")
        gt_by.setdefault(c, []).append(g)
    for d in dets:
        c = int(_get(d, "category_id"))
        if c not in known:
            raise UnknownCategoryError(f"detection uses unknown category {c}")
        dt_by.setdefault(c, []).append(d)
    active = sorted(set(gt_by) | set(dt_by))
    ap = {c: [average_precision(dt_by.get(c, []), gt_by.get(c, []), float(t)) for t in IOU_THRESHOLDS] for c in active}
    if not active:
        return MetricReport({}, map50=1.0, map50_95=1.0)
    map50 = float(np.mean([v[0] for v in ap.values()]))
    map50_95 = float(np.mean([np.mean(v) for v in ap.values()]))
    return MetricReport(ap, map50=map50, map50_95=map50_95)


def load_detections(path) -> list[Detection]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise SchemaError(f"{path}: detections must be a JSON list")
    return [Detection.from_dict(d) for d in data]


def coco_ground_truth(coco: dict) -> tuple[list[dict], list[int]]:
    """Ground-truth boxes and category ids from a COCO dict."""
    return list(coco["annotations"]), [c["id"] for c in coco["categories"]]


# ---------------------------------------------------------------- matrix


@dataclass
class MatrixReport:
    models: list
    rows: list  # validation set names in display order
    groups: dict  # group label -> set names
    values: dict  # (set, model) -> float
    metric: str = "mAP@[0.5:0.95]"
    averages: dict = field(default_factory=dict)  # "Average Sim" -> {model: value}

    def table(self) -> list[list]:
        """Header plus rows: sets of each group followed by that group's average row."""
        out = [["Validated on", *self.models]]
        for label, sets in self.groups.items():
            for s in sets:
                out.append([s, *(self.values[(s, m)] for m in self.models)])
            key = f"Average {label}"
            if key in self.averages:
                out.append([key, *(self.averages[key][m] for m in self.models)])
        return out

    def text(self, digits: int = 2) -> str:
        rows = [[r[0], *(f"{v:.{digits}f}" for v in r[1:])] if i else r for i, r in enumerate(self.table())]
        widths = [max(len(str(r[c])) for r in rows) for c in range(len(rows[0]))]
        lines = [f"{self.metric}, trained on (columns)"]
        for i, r in enumerate(rows):
            lines.append("  ".join(str(v).ljust(w) if c == 0 else str(v).rjust(w) for c, (v, w) in enumerate(zip(r, widths))))
            if i == 0:
                lines.append("-" * len(lines[-1]))
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for i, r in enumerate(self.table()):
            w.writerow(r if i == 0 else [r[0], *(repr(float(v)) for v in r[1:])])
        return buf.getvalue()


def default_groups(set_names) -> dict:
    """Sets named like procedures or combinations count as simulated, the rest as real."""
    sim = [s for s in set_names if len(s) == 2 and s[0] in "PC" and s[1].isdigit()]
    real = [s for s in set_names if s not in sim]
    return {"Sim": sim, "Real": real}


def matrix_report(models, ground_truth: dict, groups: dict | None = None, metric: str = "map50_95") -> MatrixReport:
    """Evaluate every model on every validation set.

    ``models`` is a list of ``(model_name, {set_name: detections})``;
    ``ground_truth`` maps set names to ``(gts, categories)`` or a COCO dict.
    ``groups`` maps labels such as ``"Sim"`` / ``"Real"`` to set names; each
    non-empty group gets an ``"Average <label>"`` row.
    """
    if metric not in ("map50", "map50_95"):
        raise ValueError("metric must be map50 or map50_95")
    sets = list(ground_truth)
    groups = default_groups(sets) if groups is None else {k: list(v) for k, v in groups.items()}
    grouped = [s for g in groups.values() for s in g]
    unknown = sorted(set(grouped) - set(sets))
    if unknown:
        raise MissingPairError(f"groups name validation sets without ground truth: {unknown}")
    leftover = [s for s in sets if s not in grouped]
    if leftover:
        groups.setdefault("Other", []).extend(leftover)
    gaps = [f"{m}/{s}" for m, per_set in models for s in sets if s not in per_set]
    if gaps:
        raise MissingPairError("missing detections for model/set pairs: " + ", ".join(gaps))
    values = {}
    for name, per_set in models:
        for s in sets:
            gt = ground_truth[s]
            gts, cats = coco_ground_truth(gt) if isinstance(gt, dict) else gt
            rep = map_metrics(per_set[s], gts, cats)
            values[(s, name)] = rep.map50 if metric == "map50" else rep.map50_95
    names = [m for m, _ in models]
    averages = {}
    for label, members in groups.items():
        if members and label != "Other":
            averages[f"Average {label}"] = {m: float(np.mean([values[(s, m)] for s in members])) for m in names}
    label = "mAP@0.5" if metric == "map50" else "mAP@[0.5:0.95]"
    return MatrixReport(names, [s for g in groups.values() for s in g], groups, values, label, averages)
