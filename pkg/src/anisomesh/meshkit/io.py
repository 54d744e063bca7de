"""
ASCII Medit ``.mesh``/``.sol`` and legacy VTK readers and writers.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import SimplicialMesh

_SECTIONS = ("Vertices", "Edges", "Triangles", "Tetrahedra", "Corners")


class MeditParseError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield lineno, text


class _Reader:
    def __init__(self, path):
        self._it = _lines(path)
        self._pending: list[tuple[int, str]] = []
        self.lineno = 0

    def next_token_line(self):
        if self._pending:
            return self._pending.pop()
        try:
            self.lineno, text = next(self._it)
        except StopIteration:
            raise MeditParseError("unexpected end of file", self.lineno) from None
        return self.lineno, text

    def push(self, item):
        self._pending.append(item)

    def read_int(self):
        lineno, text = self.next_token_line()
        parts = text.split()
        try:
            value = int(parts[0])
        except ValueError:
            raise MeditParseError(f"expected an integer, got {text!r}", lineno) from None
        if len(parts) > 1:
            self.push((lineno, " ".join(parts[1:])))
        return value

    def read_rows(self, count, width, what):
        rows = []
        for _ in range(count):
            lineno, text = self.next_token_line()
            parts = text.split()
            if len(parts) < width:
                raise MeditParseError(
                    f"{what} entry has {len(parts)} values, expected {width}", lineno
                )
            try:
                rows.append([float(p) for p in parts[:width]])
            except ValueError:
                raise MeditParseError(f"non-numeric {what} entry {text!r}", lineno) from None
        return np.array(rows, dtype=float).reshape(count, width)


def _section_count(reader, keyword):
    count = reader.read_int()
    if count < 0:
        raise MeditParseError(f"negative {keyword} count", reader.lineno)
    return count


def read_medit(path) -> SimplicialMesh:
    """Read an ASCII Medit mesh of triangles (2D) or tetrahedra (3D)."""
    reader = _Reader(path)
    dim = None
    data = {}
    while True:
        try:
            lineno, text = reader.next_token_line()
        except MeditParseError:
            break
        parts = text.split()
        key = parts[0]
        if len(parts) > 1:
            reader.push((lineno, " ".join(parts[1:])))
        if key == "End":
            break
        if key == "MeshVersionFormatted":
            reader.read_int()
        elif key == "Dimension":
            dim = reader.read_int()
            if dim not in (2, 3):
                raise MeditParseError(f"unsupported dimension {dim}", lineno)
        elif key in _SECTIONS:
            if dim is None:
                raise MeditParseError(f"section {key} before Dimension", lineno)
            count = _section_count(reader, key)
            width = {
                "Vertices": dim + 1,
                "Edges": 3,
                "Triangles": 4,
                "Tetrahedra": 5,
                "Corners": 1,
            }[key]
            data[key] = reader.read_rows(count, width, key)
        else:
            raise MeditParseError(f"unknown section keyword {key!r}", lineno)
    if dim is None or "Vertices" not in data:
        raise MeditParseError("missing Dimension or Vertices section", reader.lineno)
    points = data["Vertices"][:, :dim]
    n = len(points)
    if dim == 2:
        cells_raw = data.get("Triangles", np.zeros((0, 4)))
        facets_raw = data.get("Edges", np.zeros((0, 3)))
    else:
        cells_raw = data.get("Tetrahedra", np.zeros((0, 5)))
        facets_raw = data.get("Triangles", np.zeros((0, 4)))
    cells = cells_raw[:, :dim + 1].astype(np.int64) - 1
    facets = facets_raw[:, :dim].astype(np.int64) - 1
    markers = facets_raw[:, dim].astype(np.int64)
    for name, arr in (("cell", cells), ("facet", facets)):
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise MeditParseError(f"{name} references a vertex outside 1..{n}")
    corners = None
    if "Corners" in data:
        corners = np.zeros(n, dtype=bool)
        idx = data["Corners"][:, 0].astype(np.int64) - 1
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise MeditParseError(f"corner references a vertex outside 1..{n}")
        corners[idx] = True
    if len(facets) == 0:
        return SimplicialMesh(points, cells, corners=corners)
    return SimplicialMesh(points, cells, facets, markers, corners)


def _fmt(x):
    return repr(float(x))


def write_medit(mesh: SimplicialMesh, path):
    d = mesh.dim
    out = ["MeshVersionFormatted 2", "", f"Dimension {d}", "", "Vertices", str(mesh.num_vertices)]
    out += [" ".join(_fmt(c) for c in p) + " 0" for p in mesh.points]
    cell_kw, facet_kw = ("Triangles", "Edges") if d == 2 else ("Tetrahedra", "Triangles")
    out += ["", cell_kw, str(mesh.num_cells)]
    out += [" ".join(str(i + 1) for i in c) + " 0" for c in mesh.cells.tolist()]
    out += ["", facet_kw, str(len(mesh.facets))]
    out += [
        " ".join(str(i + 1) for i in f) + f" {m}"
        for f, m in zip(mesh.facets.tolist(), mesh.facet_markers.tolist())
    ]
    corners = np.flatnonzero(mesh.corners)
    if len(corners):
        out += ["", "Corners", str(len(corners))]
        out += [str(i + 1) for i in corners]
    out += ["", "End", ""]
    Path(path).write_text("\n".join(out))


def _lower(values):
    d = values.shape[-1]
    rows, cols = np.tril_indices(d)
    return values[:, rows, cols]


def write_sol(field, path):
    """Write a metric (``MetricField`` or ``(n, d, d)`` array) as a Medit solution file."""
    values = np.asarray(getattr(field, "values", field), dtype=float)
    n, d, _ = values.shape
    packed = _lower(values)
    out = ["MeshVersionFormatted 2", "", f"Dimension {d}", "", "SolAtVertices", str(n), "1 3"]
    out += [" ".join(_fmt(v) for v in row) for row in packed]
    out += ["", "End", ""]
    Path(path).write_text("\n".join(out))


def read_sol_values(path, num_vertices=None) -> np.ndarray:
    reader = _Reader(path)
    dim = None
    values = None
    while True:
        try:
            lineno, text = reader.next_token_line()
        except MeditParseError:
            break
        parts = text.split()
        key = parts[0]
        if len(parts) > 1:
            reader.push((lineno, " ".join(parts[1:])))
        if key == "End":
            break
        if key == "MeshVersionFormatted":
            reader.read_int()
        elif key == "Dimension":
            dim = reader.read_int()
            if dim not in (2, 3):
                raise MeditParseError(f"unsupported dimension {dim}", lineno)
        elif key == "SolAtVertices":
            if dim is None:
                raise MeditParseError("SolAtVertices before Dimension", lineno)
            count = _section_count(reader, key)
            nfields = reader.read_int()
            types = [reader.read_int() for _ in range(nfields)]
            if types != [3]:
                raise MeditParseError(
                    f"expected one symmetric tensor field (type 3), got types {types}",
                    reader.lineno,
                )
            if num_vertices is not None and count != num_vertices:
                raise MeditParseError(
                    f"solution has {count} entries but the mesh has {num_vertices} vertices",
                    lineno,
                )
            width = dim * (dim + 1) // 2
            packed = reader.read_rows(count, width, "SolAtVertices")
            values = np.zeros((count, dim, dim))
            rows, cols = np.tril_indices(dim)
            values[:, rows, cols] = packed
            values[:, cols, rows] = packed
        else:
            raise MeditParseError(f"unknown section keyword {key!r}", lineno)
    if values is None:
        raise MeditParseError("missing SolAtVertices section", reader.lineno)
    return values


def read_sol(path, mesh: SimplicialMesh):
    from ..metric import MetricField

    values = read_sol_values(path, mesh.num_vertices)
    if values.shape[1] != mesh.dim:
        raise MeditParseError(
            f"solution dimension {values.shape[1]} does not match mesh dimension {mesh.dim}"
        )
    return MetricField(mesh, values)


def write_vtk(mesh: SimplicialMesh, path, point_data=None, cell_data=None, title="anisomesh"):
    """
    Legacy ASCII VTK unstructured grid.  Arrays in ``point_data``/``cell_data`` are
    written as scalars ``(n,)``, vectors ``(n, d)`` or tensors ``(n, d, d)``.
    """
    d = mesh.dim
    pts = np.zeros((mesh.num_vertices, 3))
    pts[:, :d] = mesh.points
    nv = d + 1
    ctype = 5 if d == 2 else 10
    out = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    out += [" ".join(_fmt(c) for c in p) for p in pts]
    out.append(f"CELLS {mesh.num_cells} {mesh.num_cells * (nv + 1)}")
    out += [f"{nv} " + " ".join(str(i) for i in c) for c in mesh.cells.tolist()]
    out.append(f"CELL_TYPES {mesh.num_cells}")
    out += [str(ctype)] * mesh.num_cells

    def block(kind, count, arrays):
        if not arrays:
            return
        out.append(f"{kind} {count}")
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=float)
            if len(arr) != count:
                raise ValueError(f"{kind.lower()} field {name!r} has {len(arr)} entries, expected {count}")
            if arr.ndim == 1:
                out.append(f"SCALARS {name} double 1")
                out.append("LOOKUP_TABLE default")
                out.extend(_fmt(v) for v in arr)
            elif arr.ndim == 2:
                padded = np.zeros((count, 3))
                padded[:, : arr.shape[1]] = arr
                out.append(f"VECTORS {name} double")
                out.extend(" ".join(_fmt(v) for v in row) for row in padded)
            else:
                padded = np.zeros((count, 3, 3))
                k = arr.shape[1]
                padded[:, :k, :k] = arr
                out.append(f"TENSORS {name} double")
                for t in padded:
                    out.extend(" ".join(_fmt(v) for v in row) for row in t)

    block("POINT_DATA", mesh.num_vertices, point_data)
    block("CELL_DATA", mesh.num_cells, cell_data)
    out.append("")
    Path(path).write_text("\n".join(out))
