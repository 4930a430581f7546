"""A small synthetic assembly export for tests and demonstrations.

Writes the same files a CAD export produces: a part list, a category list,
class and structure meshes in millimeters, and their assembly placements.
Two categorized parts (a box with features on all sides and a flat plate)
sit on a hand cart built from simple bars.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .geometry import Mesh
from .meshio import save_mesh

_BOX_TRIS = np.array(
    [
        [0, 3, 2], [0, 1, 3],  # x = 0
        [4, 7, 5], [4, 6, 7],  # x = 1
        [0, 5, 1], [0, 4, 5],  # y = 0
        [2, 7, 6], [2, 3, 7],  # y = 1
        [0, 6, 4], [0, 2, 6],  # z = 0
        [1, 7, 3], [1, 5, 7],  # z = 1
    ]
)


def box_mesh(size, origin=(0.0, 0.0, 0.0), name: str = "box") -> Mesh:
    """Closed box [origin, origin + size] with outward triangles, corners in binary order."""
    corners = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    return Mesh(np.asarray(origin, dtype=float) + corners * np.asarray(size, dtype=float), _BOX_TRIS, name=name)


def prism_mesh(radius: float, height: float, sides: int = 8, origin=(0.0, 0.0, 0.0), name: str = "prism") -> Mesh:
    ang = 2 * np.pi * np.arange(sides) / sides
    ring = np.column_stack((radius * np.cos(ang), radius * np.sin(ang), np.zeros(sides)))
    verts = np.vstack([ring, ring + [0, 0, height], [[0, 0, 0], [0, 0, height]]]) + origin
    bottom, top = 2 * sides, 2 * sides + 1
    tris = []
    for i in range(sides):
        j = (i + 1) % sides
        tris += [[i, j, sides + j], [i, sides + j, sides + i], [bottom, j, i], [top, sides + i, sides + j]]
    return Mesh(verts, np.array(tris), name=name)


def merge_meshes(meshes, name: str) -> Mesh:
    verts, tris, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + off)
        off += len(m.vertices)
    return Mesh(np.vstack(verts), np.vstack(tris), name=name)


def manhole_box() -> Mesh:
    """160 x 120 x 90 mm box with a boss on top, a flange and a side lug."""
    return merge_meshes(
        [
            box_mesh((160, 120, 90), name="body"),
            prism_mesh(30, 25, 8, origin=(55, 60, 90)),
            box_mesh((200, 20, 10), origin=(-20, 50, 0)),
            box_mesh((25, 40, 30), origin=(160, 10, 30)),
        ],
        "ManholeBox",
    )


def geometric_plate() -> Mesh:
    """220 x 160 x 6 mm plate with a rib and a corner tab."""
    return merge_meshes(
        [
            box_mesh((220, 160, 6)),
            box_mesh((120, 20, 10), origin=(30, 40, 6)),
            box_mesh((30, 30, 14), origin=(175, 115, 6)),
        ],
        "GeometricPlate",
    )


STRUCTURE = {
    # name: (size mm, translation mm, rpy deg)
    "Platform": ((900, 600, 30), (-450, -300, 300), (0, 0, 0)),
    "LegFrontLeft": ((40, 40, 300), (-440, -290, 0), (0, 0, 0)),
    "LegFrontRight": ((40, 40, 300), (400, -290, 0), (0, 0, 0)),
    "LegRearLeft": ((40, 40, 300), (-440, 250, 0), (0, 0, 0)),
    "LegRearRight": ((40, 40, 300), (400, 250, 0), (0, 0, 0)),
    "HandleLeft": ((30, 30, 600), (-450, -300, 330), (0, 0, 0)),
    "HandleRight": ((30, 30, 600), (-450, 270, 330), (0, 0, 0)),
    "HandleBar": ((600, 30, 30), (-435, -300, 930), (0, 0, 90)),
    "MountRail": ((700, 40, 40), (-350, 200, 330), (0, 0, 0)),
}


def write_demo_assembly(root) -> str:
    """Write the demo export under ``root`` and return the directory path."""
    root = str(root)
    classes = os.path.join(root, "Classes")
    structure = os.path.join(root, "Structure")
    os.makedirs(classes, exist_ok=True)
    os.makedirs(structure, exist_ok=True)

    m_to_mm = 1e3
    save_mesh(manhole_box().scaled(1e-3), os.path.join(classes, "ManholeBox.ply"))
    save_mesh(geometric_plate().scaled(1e-3), os.path.join(classes, "GeometricPlate.stl"))
    class_tf = {
        "ManholeBox": {"translation_mm": [-250.0, -150.0, 330.0], "rpy_deg": [0.0, 0.0, 0.0]},
        "GeometricPlate": {"translation_mm": [100.0, -200.0, 330.0], "rpy_deg": [0.0, 0.0, 30.0]},
    }
    struct_tf = {}
    for name, (size, origin, rpy) in STRUCTURE.items():
        save_mesh(box_mesh(np.asarray(size) / m_to_mm, name=name), os.path.join(structure, name + ".stl"))
        struct_tf[name] = {"translation_mm": list(map(float, origin)), "rpy_deg": list(map(float, rpy))}
    with open(os.path.join(classes, "transforms.json"), "w") as fh:
        json.dump(class_tf, fh, indent=2)
    with open(os.path.join(structure, "transforms.json"), "w") as fh:
        json.dump(struct_tf, fh, indent=2)

    with open(os.path.join(root, "PartList.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component_name", "kind"])
        w.writerow(["HandCart", "main-assembly"])
        w.writerow(["Frame", "sub-assembly"])
        for name in ("ManholeBox", "GeometricPlate", *STRUCTURE):
            w.writerow([name, "part"])
    with open(os.path.join(root, "CategoryList.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component_name", "category_name"])
        w.writerow(["ManholeBox", "ManholeBox"])
        w.writerow(["GeometricPlate", "GeometricPlate"])
    return root
