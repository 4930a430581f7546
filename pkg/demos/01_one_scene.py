"""
One scene, end to end
=====================

Compose a randomized scene with the bundled demo assembly, render one view,
and write the image, its label maps and the ground truth overlays.

Run with ``python demos/01_one_scene.py [output_dir]``.
"""

import os
import sys
import tempfile

import numpy as np

from synthforge.annotate import annotations_for, write_png
from synthforge.assembly import load_catalog
from synthforge.demo import write_demo_assembly
from synthforge.geometry import CameraIntrinsics, compose, mesh_stats
from synthforge.gtviz import overlay_2d, overlay_3d
from synthforge.pipeline import camera_for, object_poses, scene_for
from synthforge.render import render
from synthforge.scene import ProcedureConfig

out = sys.argv[1] if len(sys.argv) > 1 else "demo_output/one_scene"
os.makedirs(out, exist_ok=True)

# the demo assembly: two active classes and a handful of structure parts, in mm
catalog = load_catalog(write_demo_assembly(tempfile.mkdtemp()))
print("categories:", catalog.categories)

# P1: objects dropped on a textured floor
cfg = ProcedureConfig("P1", seed=7, objects_per_scene=(2, 3))
scene = scene_for(cfg, catalog, 0)
for o in scene.placed_objects:
    lowest = o.pose.apply(o.mesh.vertices)[:, 2].min()
    print(f"{o.name:15s} instance {o.instance_id}  lowest point z = {lowest:+.2e} m")

# one camera on a sphere around the objects, looking at their mean centroid
k = CameraIntrinsics(572.4, 572.4, 320.0, 240.0, 640, 480)
cam = camera_for(cfg, scene, 0, 0)
frames = render(scene, cam, k)
print("pixels covered by labelled objects:", int((frames.instance_map > 0).sum()))

# ground truth: COCO boxes from the instance map, poses in the camera frame
poses = object_poses(scene.placed_objects, cam, image_id=1)
anns = annotations_for(frames.instance_map, poses)
for a in anns:
    print("bbox", a["bbox"], "area", a["area"])

write_png(os.path.join(out, "rgb.png"), frames.rgb)
# scale the small ids so the maps are visible in an image viewer
write_png(os.path.join(out, "instance.png"), (frames.instance_map * 60).astype(np.uint8))
img2d = overlay_2d(frames.rgb, anns, categories=catalog.categories)
img3d = frames.rgb
for o in scene.placed_objects:
    img3d = overlay_3d(img3d, compose(cam, o.pose), mesh_stats(o.mesh), k, category_id=o.category_id)
write_png(os.path.join(out, "overlay_2d.png"), img2d)
write_png(os.path.join(out, "overlay_3d.png"), img3d)
print("wrote", sorted(os.listdir(out)), "to", out)
