"""STL (ASCII and binary), PLY (ASCII) and OBJ readers plus matching writers.

Files are assumed to be in millimeters (CAD exports) and are scaled to meters
on load unless another ``unit_scale`` is given.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import EmptyMeshError, MeshFormatError
from .geometry import Mesh

MM_TO_M = 1e-3
FORMATS = ("stl-ascii", "stl-binary", "ply", "obj")


def detect_format(path, data: bytes | None = None) -> str:
    ext = os.path.splitext(str(path))[1].lower()
    if data is None:
        with open(path, "rb") as fh:
            data = fh.read(512)
    if ext == ".ply":
        return "ply"
    if ext == ".obj":
        return "obj"
    if ext == ".stl":
        # Binary files may also start with "solid"; trust the size field when it matches.
        if len(data) >= 84:
            n = struct.unpack_from("<I", data, 80)[0]
            try:
                size = os.path.getsize(path)
            except OSError:
                size = -1
            if size == 84 + 50 * n:
                return "stl-binary"
        head = data[:5].lower()
        return "stl-ascii" if head == b"solid" else "stl-binary"
    raise MeshFormatError(f"cannot infer mesh format of {path!s}")


def load_mesh(path, format: str | None = None, unit_scale: float = MM_TO_M, name: str | None = None) -> Mesh:
    """Read a mesh file and return it in meters.

    STL vertices are welded by exact coordinate equality, in order of first
    appearance, so identical bytes always yield an identical mesh.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    fmt = format or detect_format(path, data)
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    colors = None
    if fmt == "stl-ascii":
        verts, tris = _weld(_parse_stl_ascii(data))
    elif fmt == "stl-binary":
        verts, tris = _weld(_parse_stl_binary(data))
    elif fmt == "ply":
        verts, tris, colors = _parse_ply(data)
    elif fmt == "obj":
        verts, tris = _parse_obj(data)
    else:
        raise MeshFormatError(f"unknown mesh format {fmt!r}")
    if len(tris) == 0:
        raise EmptyMeshError(f"{path!s} contains no triangles")
    return Mesh(np.asarray(verts, dtype=np.float64) * unit_scale, tris, colors, name)


def _weld(corners: np.ndarray):
    """(n, 3, 3) triangle corners -> unique vertices in first-seen order + index triples."""
    flat = corners.reshape(-1, 3)
    if len(flat) == 0:
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)
    _, first, inverse = np.unique(flat, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    verts = flat[first[order]]
    return verts, rank[inverse].reshape(-1, 3)


def _parse_stl_ascii(data: bytes) -> np.ndarray:
    text = data.decode("ascii", errors="replace")
    if not text.lstrip().lower().startswith("solid"):
        raise MeshFormatError("ASCII STL must start with 'solid'", 0)
    corners = []
    pos = 0
    facet = []
    for line in text.splitlines(keepends=True):
        tok = line.split()
        if tok and tok[0].lower() == "vertex":
            if len(tok) != 4:
                raise MeshFormatError("vertex line needs three coordinates", pos)
            try:
                facet.append([float(t) for t in tok[1:]])
            except ValueError:
                raise MeshFormatError(f"bad vertex coordinate in {line.strip()!r}", pos) from None
        elif tok and tok[0].lower() == "endloop":
            if len(facet) != 3:
                raise MeshFormatError(f"facet loop has {len(facet)} vertices, expected 3", pos)
            corners.append(facet)
            facet = []
        pos += len(line.encode("ascii", errors="replace"))
    return np.array(corners, dtype=np.float64).reshape(-1, 3, 3)


def _xyz(p) -> str:
    # repr of a Python float round-trips exactly
    return " ".join(repr(float(x)) for x in p)


_STL_RECORD = np.dtype(
    [("normal", "<f4", (3,)), ("corners", "<f4", (3, 3)), ("attr", "<u2")]
)


def _parse_stl_binary(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise MeshFormatError("binary STL shorter than its 84-byte header", len(data))
    n = struct.unpack_from("<I", data, 80)[0]
    need = 84 + 50 * n
    if len(data) < need:
        raise MeshFormatError(f"binary STL declares {n} triangles but is truncated", len(data))
    rec = np.frombuffer(data, dtype=_STL_RECORD, count=n, offset=84)
    return rec["corners"].astype(np.float64)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply(data: bytes):
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise MeshFormatError("missing 'ply' magic or 'end_header'", 0)
    header_end = data.index(b"\n", end) + 1
    header = data[:header_end].decode("ascii", errors="replace").splitlines()
    fmt = None
    elements = []  # [name, count, [(prop_name, kind)]]
    offset = 0
    for line in header:
        tok = line.split()
        if not tok:
            pass
        elif tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise MeshFormatError(f"bad element line {line!r}", offset)
            elements.append([tok[1], int(tok[2]), []])
        elif tok[0] == "property":
            if not elements:
                raise MeshFormatError("property before any element", offset)
            if tok[1] == "list":
                elements[-1][2].append((tok[-1], "list"))
            elif tok[1] in _PLY_TYPES:
                elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
            else:
                raise MeshFormatError(f"unknown property type {tok[1]!r}", offset)
        offset += len(line) + 1
    if fmt != "ascii":
        raise MeshFormatError(f"only ASCII PLY is supported, got format {fmt!r}", 0)

    tokens = data[header_end:].decode("ascii", errors="replace").split()
    cursor = 0
    verts = colors = None
    tris: list = []
    for name, count, props in elements:
        if name == "vertex":
            width = len(props)
            if any(kind == "list" for _, kind in props):
                raise MeshFormatError("list properties on vertices are not supported", header_end)
            block = tokens[cursor : cursor + width * count]
            if len(block) != width * count:
                raise MeshFormatError("vertex data truncated", header_end)
            try:
                arr = np.array(block, dtype=np.float64).reshape(count, width)
            except ValueError:
                raise MeshFormatError("non-numeric vertex data", header_end) from None
            cursor += width * count
            names = [p for p, _ in props]
            try:
                verts = arr[:, [names.index("x"), names.index("y"), names.index("z")]]
            except ValueError:
                raise MeshFormatError("vertex element lacks x/y/z", header_end) from None
            if all(c in names for c in ("red", "green", "blue")):
                kinds = dict(props)
                cols = arr[:, [names.index("red"), names.index("green"), names.index("blue")]]
                scale = 255.0 if kinds["red"].startswith("u1") else 1.0
                colors = cols / scale
        elif name == "face":
            for _ in range(count):
                try:
                    n = int(tokens[cursor])
                    idx = [int(t) for t in tokens[cursor + 1 : cursor + 1 + n]]
                except (IndexError, ValueError):
                    raise MeshFormatError("face data truncated or malformed", header_end) from None
                if len(idx) != n:
                    raise MeshFormatError("face data truncated", header_end)
                cursor += 1 + n
                for k in range(1, n - 1):
                    tris.append((idx[0], idx[k], idx[k + 1]))
                # any further scalar face properties are skipped
                cursor += sum(1 for _, kind in props[1:] if kind != "list")
        else:
            # skip unknown scalar-only elements
            cursor += count * len(props)
    if verts is None:
        raise MeshFormatError("PLY has no vertex element", header_end)
    tris_arr = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if tris_arr.size and tris_arr.max() >= len(verts):
        raise MeshFormatError("face index out of range", header_end)
    return verts, tris_arr, colors


def _parse_obj(data: bytes):
    verts, tris = [], []
    pos = 0
    for line in data.splitlines(keepends=True):
        tok = line.split()
        if tok and tok[0] == b"v":
            try:
                verts.append([float(t) for t in tok[1:4]])
            except ValueError:
                raise MeshFormatError("bad vertex line", pos) from None
            if len(verts[-1]) != 3:
                raise MeshFormatError("vertex line needs three coordinates", pos)
        elif tok and tok[0] == b"f":
            idx = []
            for t in tok[1:]:
                try:
                    i = int(t.split(b"/")[0])
                except ValueError:
                    raise MeshFormatError("bad face index", pos) from None
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) < 3:
                raise MeshFormatError("face with fewer than three vertices", pos)
            for k in range(1, len(idx) - 1):
                tris.append((idx[0], idx[k], idx[k + 1]))
        pos += len(line)
    tris_arr = np.array(tris, dtype=np.int64).reshape(-1, 3)
    if tris_arr.size and (tris_arr.min() < 0 or tris_arr.max() >= len(verts)):
        raise MeshFormatError("face index out of range", pos)
    return np.array(verts, dtype=np.float64).reshape(-1, 3), tris_arr


def save_mesh(mesh: Mesh, path, format: str | None = None, unit_scale: float = MM_TO_M) -> None:
    """Write ``mesh`` so that ``load_mesh(path, unit_scale=unit_scale)`` reads it back."""
    fmt = format or {".ply": "ply", ".obj": "obj", ".stl": "stl-binary"}[os.path.splitext(str(path))[1].lower()]
    v = mesh.vertices / unit_scale
    t = mesh.triangles
    if fmt == "stl-binary":
        corners = v[t].astype("<f4")
        rec = np.zeros(len(t), dtype=_STL_RECORD)
        rec["normal"] = _face_normals(v, t)
        rec["corners"] = corners
        with open(path, "wb") as fh:
            fh.write(b"binary stl".ljust(80, b" "))
            fh.write(struct.pack("<I", len(t)))
            fh.write(rec.tobytes())
    elif fmt == "stl-ascii":
        normals = _face_normals(v, t)
        lines = [f"solid {mesh.name or 'mesh'}"]
        for n, tri in zip(normals, t):
            lines.append(f"  facet normal {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}")
            lines.append("    outer loop")
            for i in tri:
                lines.append(f"      vertex {_xyz(v[i])}")
            lines.append("    endloop")
            lines.append("  endfacet")
        lines.append(f"endsolid {mesh.name or 'mesh'}")
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "ply":
        colored = mesh.vertex_colors is not None
        head = ["ply", "format ascii 1.0", f"element vertex {len(v)}",
                "property double x", "property double y", "property double z"]
        if colored:
            head += ["property uchar red", "property uchar green", "property uchar blue"]
        head += [f"element face {len(t)}", "property list uchar int vertex_indices", "end_header"]
        body = []
        for i, p in enumerate(v):
            row = _xyz(p)
            if colored:
                c = np.clip(np.round(mesh.vertex_colors[i] * 255), 0, 255).astype(int)
                row += f" {c[0]} {c[1]} {c[2]}"
            body.append(row)
        body += [f"3 {a} {b} {c}" for a, b, c in t]
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(head + body) + "\n")
    elif fmt == "obj":
        lines = [f"v {_xyz(p)}" for p in v]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in t]
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        raise MeshFormatError(f"unknown mesh format {fmt!r}")


def _face_normals(v: np.ndarray, t: np.ndarray) -> np.ndarray:
    n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)
