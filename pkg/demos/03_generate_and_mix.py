"""
Procedure datasets and a combination
====================================

Generate a small dataset for each procedure, then mix them the way the C2
combination does (40% P1, 40% P4, 20% P5) and look at the manifest.

The same steps from the shell::

    synthforge init-demo work
    synthforge generate --config work/config.yaml --procedure P1
    synthforge mix --config work/config.yaml --combination C2
"""

import os
import sys

from synthforge.annotate import read_dataset
from synthforge.config import load_config
from synthforge.mixer import plan_counts, plan_splits
from synthforge.pipeline import run_generate, run_mix

work = sys.argv[1] if len(sys.argv) > 1 else "demo_output/mix"
os.makedirs(work, exist_ok=True)
cfg_path = os.path.join(work, "config.yaml")
with open(cfg_path, "w") as fh:
    fh.write("""\
seed: 11
output_root: out
camera: {width: 320, height: 240, fx: 286.2, fy: 286.2, cx: 160, cy: 120}
defaults: {num_scenes: 4, views_per_scene: 5}
procedures: {P1: {}, P4: {}, P5: {}}
mix_total_images: 20
""")
cfg = load_config(cfg_path)

for proc in cfg.procedures:
    root = run_generate(cfg, proc)
    ds = read_dataset(root)
    print(f"{proc}: {len(ds.image_ids)} images, {len(ds.coco['annotations'])} boxes, split {ds.manifest.split_counts()[proc]}")

plan = cfg.mix("C2")
print("C2 counts:", plan_counts(plan), "train/test:", plan_splits(plan))
mix = read_dataset(run_mix(cfg, "C2"))
print("C2 manifest counts:", mix.manifest.counts())
first = mix.manifest.images[0]
print("first image came from", first["source"])
