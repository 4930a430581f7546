"""
Where does a dropped plate land?
================================

A thin plate dropped in a random orientation almost always ends up flat.
Floating poses, by contrast, show the plate edge-on quite often. This
script counts both.
"""

import numpy as np

from synthforge.demo import box_mesh
from synthforge.scene import random_rotation
from synthforge.settle import settle_on_plane, stable_support

rng = np.random.default_rng(0)
plate = box_mesh((100.0, 100.0, 2.0), origin=(-50.0, -50.0, -1.0), name="plate").scaled(1e-3)

# the convex hull has six faces; only two of them are large
support = stable_support(plate)
print("hull faces:", len(support.faces))

n = 2000
flat = 0
for _ in range(n):
    pose = settle_on_plane(plate, random_rotation(rng), (0.0, 0.0))
    flat += abs(pose.rotation[2, 2]) > 1 - 1e-9
print(f"settled: {flat}/{n} on a large face")

# floating: how often is the plate normal within 20 degrees of the image plane?
normals = np.array([random_rotation(rng)[:, 2] for _ in range(n)])
edge_on = np.abs(normals[:, 2]) < np.sin(np.radians(20))
print(f"floating: {edge_on.mean():.1%} of random poses show the plate within 20 deg of edge-on")
