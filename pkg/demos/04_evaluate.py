"""
Scoring detections
==================

Build a toy validation set, perturb its boxes to imitate three detectors of
different quality, and print the trained-on / validated-on matrix.
"""

import numpy as np

from synthforge.metrics import map_metrics, matrix_report

rng = np.random.default_rng(1)


def toy_set(n_images):
    gts = []
    for img in range(1, n_images + 1):
        for _ in range(rng.integers(1, 4)):
            x, y = rng.uniform(0, 500, 2)
            w, h = rng.uniform(20, 120, 2)
            gts.append({"image_id": img, "category_id": int(rng.integers(1, 3)), "bbox": [x, y, w, h]})
    return gts


def detector(gts, jitter, miss):
    dets = []
    for g in gts:
        if rng.random() < miss:
            continue
        x, y, w, h = g["bbox"]
        dx, dy = rng.normal(0, jitter * w), rng.normal(0, jitter * h)
        dets.append({**g, "bbox": [x + dx, y + dy, w, h], "score": float(rng.uniform(0.3, 1.0))})
    return dets


sets = {"P1": toy_set(30), "P4": toy_set(30), "Real parts loose": toy_set(20), "Real assembly": toy_set(20)}
gt = {name: (g, [1, 2]) for name, g in sets.items()}

rep = map_metrics(detector(sets["P1"], 0.05, 0.1), sets["P1"], [1, 2])
print(f"one model on P1: mAP@0.5 = {rep.map50:.3f}, mAP@[0.5:0.95] = {rep.map50_95:.3f}")

models = [
    ("sharp", {s: detector(g, 0.02, 0.05) for s, g in sets.items()}),
    ("blurry", {s: detector(g, 0.10, 0.05) for s, g in sets.items()}),
    ("sparse", {s: detector(g, 0.02, 0.50) for s, g in sets.items()}),
]
print(matrix_report(models, gt).text())
