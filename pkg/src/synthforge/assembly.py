"""Readers for the CAD export: part list, category list, placements and mesh folders.

Expected layout of an assembly export directory::

    PartList.csv            component_name,kind
    CategoryList.csv        component_name,category_name[,category_id]
    Classes/<name>.ply      meshes of categorized components (.ply, .stl or .obj)
    Classes/transforms.json
    Structure/<name>.ply    meshes of every other component
    Structure/transforms.json

``transforms.json`` maps component name to
``{"translation_mm": [x, y, z], "rpy_deg": [roll, pitch, yaw]}`` in the
main-assembly frame.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateComponentError,
    SchemaError,
    UnresolvedComponentError,
)
from .geometry import Mesh, RigidTransform, rpy_to_rotation
from .meshio import MM_TO_M, load_mesh

KINDS = ("part", "sub-assembly", "main-assembly")
MESH_EXTENSIONS = (".ply", ".stl", ".obj")


@dataclass(frozen=True)
class ComponentRecord:
    component_name: str
    kind: str = "part"


@dataclass(frozen=True)
class CategoryAssignment:
    component_name: str
    category_name: str
    category_id: int


@dataclass(frozen=True)
class AssemblyPlacement:
    component_name: str
    translation_mm: tuple
    rpy_deg: tuple
    role: str  # "class" or "structure"

    def to_pose(self) -> RigidTransform:
        return RigidTransform(rpy_to_rotation(*self.rpy_deg), np.asarray(self.translation_mm) * MM_TO_M)


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if not rows:
        return [], []
    header = [h.strip() for h in rows[0]]
    return header, [[c.strip() for c in r] for r in rows[1:]]


def parse_part_list(csv_path) -> list[ComponentRecord]:
    header, rows = _read_rows(csv_path)
    if not rows:
        raise SchemaError(f"{csv_path}: part list is empty")
    if "component_name" not in header:
        raise SchemaError(f"{csv_path}: header must contain 'component_name'")
    name_col = header.index("component_name")
    kind_col = header.index("kind") if "kind" in header else None
    seen: dict[str, int] = {}
    out = []
    for lineno, row in enumerate(rows, start=2):
        name = row[name_col] if name_col < len(row) else ""
        if not name:
            raise SchemaError(f"{csv_path}:{lineno}: empty component_name")
        if name in seen:
            raise DuplicateComponentError(
                f"{csv_path}:{lineno}: duplicate component {name!r} (first on line {seen[name]})"
            )
        seen[name] = lineno
        kind = row[kind_col] if kind_col is not None and kind_col < len(row) and row[kind_col] else "part"
        if kind not in KINDS:
            raise SchemaError(f"{csv_path}:{lineno}: unknown kind {kind!r}")
        out.append(ComponentRecord(name, kind))
    return out


def parse_category_list(csv_path, parts: list[ComponentRecord] | None = None) -> list[CategoryAssignment]:
    """Category rows in file order.

    Ids come from an explicit ``category_id`` column when present, otherwise
    from first appearance of each category name, starting at 1.
    """
    header, rows = _read_rows(csv_path)
    if not rows:
        return []
    for col in ("component_name", "category_name"):
        if col not in header:
            raise SchemaError(f"{csv_path}: header must contain {col!r}")
    nc, cc = header.index("component_name"), header.index("category_name")
    ic = header.index("category_id") if "category_id" in header else None
    known = None if parts is None else {p.component_name for p in parts}
    ids: dict[str, int] = {}
    names_by_id: dict[int, str] = {}
    seen: set[str] = set()
    out = []
    for lineno, row in enumerate(rows, start=2):
        comp, cat = row[nc], row[cc]
        if not comp or not cat:
            raise SchemaError(f"{csv_path}:{lineno}: empty component or category name")
        if known is not None and comp not in known:
            raise UnresolvedComponentError(f"{csv_path}:{lineno}: component {comp!r} is not in the part list")
        if comp in seen:
            raise DuplicateComponentError(f"{csv_path}:{lineno}: component {comp!r} categorized twice")
        seen.add(comp)
        if ic is not None:
            try:
                cid = int(row[ic])
            except (IndexError, ValueError):
                raise SchemaError(f"{csv_path}:{lineno}: category_id must be an integer") from None
            if cid < 1:
                raise SchemaError(f"{csv_path}:{lineno}: category_id must be >= 1")
            if ids.get(cat, cid) != cid:
                raise SchemaError(f"{csv_path}:{lineno}: category {cat!r} given two ids")
            ids[cat] = cid
        else:
            cid = ids.setdefault(cat, len(ids) + 1)
        if names_by_id.setdefault(cid, cat) != cat:
            raise SchemaError(f"{csv_path}:{lineno}: id {cid} used by {names_by_id[cid]!r} and {cat!r}")
        out.append(CategoryAssignment(comp, cat, cid))
    return out


def split_components(parts, categories) -> tuple[list[str], list[str]]:
    """Partition the part list into (class, structure) component names, in part-list order."""
    cat = {c.component_name for c in categories}
    classes = [p.component_name for p in parts if p.component_name in cat]
    structure = [p.component_name for p in parts if p.component_name not in cat]
    return classes, structure


def _as_vec3(value, path: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise SchemaError(f"{path}: expected a list of 3 numbers")
    out = []
    for i, x in enumerate(value):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise SchemaError(f"{path}[{i}]: expected a finite number, got {x!r}")
        out.append(float(x))
    return tuple(out)


def parse_placements(json_path, role: str) -> list[AssemblyPlacement]:
    if role not in ("class", "structure"):
        raise ValueError(f"role must be 'class' or 'structure', got {role!r}")
    with open(json_path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{json_path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError(f"{json_path}: $ must be an object mapping component names to transforms")
    out = []
    for name, entry in doc.items():
        path = f"$[{name!r}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{json_path}: {path} must be an object")
        for key in ("translation_mm", "rpy_deg"):
            if key not in entry:
                raise SchemaError(f"{json_path}: {path}.{key} is missing")
        out.append(
            AssemblyPlacement(
                name,
                _as_vec3(entry["translation_mm"], f"{json_path}: {path}.translation_mm"),
                _as_vec3(entry["rpy_deg"], f"{json_path}: {path}.rpy_deg"),
                role,
            )
        )
    return out


def resolve_mesh_path(folder, component_name: str):
    for ext in MESH_EXTENSIONS:
        p = os.path.join(folder, component_name + ext)
        if os.path.isfile(p):
            return p
    raise UnresolvedComponentError(f"no mesh for {component_name!r} in {folder}")


@dataclass
class CatalogEntry:
    name: str
    mesh: Mesh
    placement: AssemblyPlacement | None = None
    category_id: int = 0
    category_name: str = ""


@dataclass
class Catalog:
    """Meshes and placements needed to compose scenes."""

    classes: list[CatalogEntry]
    structure: list[CatalogEntry] = field(default_factory=list)

    @property
    def categories(self) -> dict[int, str]:
        out: dict[int, str] = {}
        for e in self.classes:
            out.setdefault(e.category_id, e.category_name)
        return dict(sorted(out.items()))

    def category_meshes(self) -> dict[int, Mesh]:
        out: dict[int, Mesh] = {}
        for e in self.classes:
            out.setdefault(e.category_id, e.mesh)
        return dict(sorted(out.items()))


def load_catalog(root, unit_scale: float = MM_TO_M) -> Catalog:
    parts = parse_part_list(os.path.join(root, "PartList.csv"))
    cats = parse_category_list(os.path.join(root, "CategoryList.csv"), parts)
    class_names, structure_names = split_components(parts, cats)

    def placements(folder, role):
        p = os.path.join(root, folder, "transforms.json")
        return {pl.component_name: pl for pl in parse_placements(p, role)} if os.path.isfile(p) else {}

    class_pl = placements("Classes", "class")
    struct_pl = placements("Structure", "structure")
    by_comp = {c.component_name: c for c in cats}
    classes = []
    for name in class_names:
        path = resolve_mesh_path(os.path.join(root, "Classes"), name)
        c = by_comp[name]
        classes.append(CatalogEntry(name, load_mesh(path, unit_scale=unit_scale), class_pl.get(name),
                                    c.category_id, c.category_name))
    structure = []
    known_structure = set(structure_names)
    for name, pl in struct_pl.items():
        if name not in known_structure:
            raise UnresolvedComponentError(f"Structure/transforms.json names {name!r}, which is not a structure component")
        path = resolve_mesh_path(os.path.join(root, "Structure"), name)
        structure.append(CatalogEntry(name, load_mesh(path, unit_scale=unit_scale), pl))
    for name in class_pl:
        if name not in by_comp:
            raise UnresolvedComponentError(f"Classes/transforms.json names uncategorized component {name!r}")
    return Catalog(classes, structure)
