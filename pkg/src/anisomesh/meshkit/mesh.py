"""
Simplicial mesh container with lazily derived adjacency.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class MeshError(ValueError):
    """Raised when a mesh violates a structural invariant."""

    def __init__(self, message, entities=None):
        super().__init__(message)
        self.entities = list(entities) if entities is not None else []


def signed_measures(points, cells):
    """Signed area (2D) or volume (3D) of each cell."""
    points = np.asarray(points, dtype=float)
    cells = np.asarray(cells, dtype=np.int64)
    if len(cells) == 0:
        return np.zeros(0)
    x = points[cells]
    dim = points.shape[1]
    edges = x[:, 1:, :] - x[:, :1, :]
    if dim == 2:
        return 0.5 * (edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0])
    return np.linalg.det(edges) / 6.0


def _facet_keys(cells):
    """All (cell, local vertex) facets, sorted vertex tuples opposite each local vertex."""
    nv = cells.shape[1]
    local = [tuple(j for j in range(nv) if j != i) for i in range(nv)]
    facets = np.concatenate([cells[:, idx] for idx in local], axis=0)
    owner = np.tile(np.arange(len(cells)), nv)
    opposite = np.repeat(np.arange(nv), len(cells))
    return np.sort(facets, axis=1), facets, owner, opposite


def exterior_facets(cells):
    """
    Facets incident to exactly one cell, ordered as they appear in that cell.

    In 2D the returned edges follow the counter-clockwise cell orientation, so the
    domain lies on their left.
    """
    cells = np.asarray(cells, dtype=np.int64)
    if len(cells) == 0:
        return np.zeros((0, 1), dtype=np.int64)
    keys, raw, owner, opposite = _facet_keys(cells)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    single = counts[inverse] == 1
    raw = raw[single]
    opp = opposite[single]
    if cells.shape[1] == 3:
        # local facet opposite vertex 1 is (v0, v2), which runs clockwise
        flip = opp == 1
        raw[flip] = raw[flip][:, ::-1]
    else:
        # faces opposite odd local vertices point inwards as stored
        flip = (opp % 2) == 1
        raw[flip] = raw[flip][:, [0, 2, 1]]
    order = np.lexsort(raw.T[::-1])
    return raw[order]


@dataclass(eq=False)
class SimplicialMesh:
    """
    Linear simplicial mesh of dimension 2 (triangles) or 3 (tetrahedra).

    :arg points: ``(n, d)`` vertex coordinates
    :arg cells: ``(m, d+1)`` vertex indices, positively oriented
    :arg facets: ``(k, d)`` boundary facets
    :arg facet_markers: ``(k,)`` integer boundary markers
    :arg corners: ``(n,)`` boolean flags for vertices that must never move or vanish
    """

    points: np.ndarray
    cells: np.ndarray
    facets: np.ndarray | None = None
    facet_markers: np.ndarray | None = None
    corners: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] not in (2, 3):
            raise ValueError(f"points must have shape (n, 2) or (n, 3), got {self.points.shape}")
        d = self.points.shape[1]
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64).reshape(-1, d + 1)
        if self.facets is None:
            self.facets = exterior_facets(self.cells).reshape(-1, d)
            self.facet_markers = np.ones(len(self.facets), dtype=np.int64)
        self.facets = np.ascontiguousarray(self.facets, dtype=np.int64).reshape(-1, d)
        if self.facet_markers is None:
            self.facet_markers = np.ones(len(self.facets), dtype=np.int64)
        self.facet_markers = np.asarray(self.facet_markers, dtype=np.int64).reshape(-1)
        if len(self.facet_markers) != len(self.facets):
            raise ValueError("facet marker count must match the facet count")
        if self.corners is None:
            self.corners = detect_corners(self.points, self.facets, self.facet_markers)
        self.corners = np.asarray(self.corners, dtype=bool).reshape(-1)
        if len(self.corners) != len(self.points):
            raise ValueError("corner flags must match the vertex count")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.points)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @cached_property
    def measures(self) -> np.ndarray:
        return signed_measures(self.points, self.cells)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique sorted vertex pairs, lexicographically ordered."""
        nv = self.dim + 1
        pairs = np.concatenate(
            [self.cells[:, [i, j]] for i, j in itertools.combinations(range(nv), 2)]
        )
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)

    @cached_property
    def _vertex_cells(self):
        flat = self.cells.reshape(-1)
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.num_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, order // (self.dim + 1)

    def vertex_star(self, v: int) -> np.ndarray:
        """Indices of all cells containing vertex ``v``, sorted."""
        if not 0 <= v < self.num_vertices:
            raise ValueError(f"vertex {v} out of range [0, {self.num_vertices})")
        offsets, cells = self._vertex_cells
        return np.sort(cells[offsets[v] : offsets[v + 1]])

    def star_sizes(self) -> np.ndarray:
        offsets, _ = self._vertex_cells
        return np.diff(offsets)

    @cached_property
    def cell_neighbors(self) -> np.ndarray:
        """``(m, d+1)`` index of the cell across the facet opposite each vertex, or -1."""
        m, nv = self.cells.shape
        keys, _, owner, opposite = _facet_keys(self.cells)
        _, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        nbrs = -np.ones((m, nv), dtype=np.int64)
        inv_sorted = inverse[order]
        same = inv_sorted[1:] == inv_sorted[:-1]
        a, b = order[:-1][same], order[1:][same]
        nbrs[owner[a], opposite[a]] = owner[b]
        nbrs[owner[b], opposite[b]] = owner[a]
        return nbrs

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        flags = np.zeros(self.num_vertices, dtype=bool)
        flags[self.facets.reshape(-1)] = True
        return flags

    def copy(self) -> SimplicialMesh:
        return SimplicialMesh(
            self.points.copy(),
            self.cells.copy(),
            self.facets.copy(),
            self.facet_markers.copy(),
            self.corners.copy(),
        )

    def check(self, tol: float = 0.0):
        """
        Raise :class:`MeshError` unless every cell is positively oriented and the
        boundary facets are exactly the facets with a single incident cell.
        """
        check_validity(self, tol=tol)


def detect_corners(points, facets, markers):
    """
    Flag vertices where the boundary is not locally a straight segment: 2D vertices
    whose two boundary edges are non-collinear or carry different markers.  In 3D,
    vertices touching three or more distinct boundary facet normals are flagged.
    """
    n, d = points.shape
    corners = np.zeros(n, dtype=bool)
    if len(facets) == 0:
        return corners
    if d == 2:
        tangents = points[facets[:, 1]] - points[facets[:, 0]]
        lengths = np.linalg.norm(tangents, axis=1)
        tangents = tangents / np.where(lengths > 0, lengths, 1.0)[:, None]
        seen = {}
        for k, (a, b) in enumerate(facets):
            for v in (a, b):
                seen.setdefault(int(v), []).append(k)
        for v, ks in seen.items():
            if len(ks) != 2:
                corners[v] = True
                continue
            i, j = ks
            cross = tangents[i, 0] * tangents[j, 1] - tangents[i, 1] * tangents[j, 0]
            if abs(cross) > 1e-10 or markers[i] != markers[j]:
                corners[v] = True
        return corners
    x = points[facets]
    normals = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    rounded = np.round(normals, 8)
    per_vertex = {}
    for k, tri in enumerate(facets):
        for v in tri:
            per_vertex.setdefault(int(v), set()).add(tuple(np.abs(rounded[k])))
    for v, ns in per_vertex.items():
        if len(ns) >= 3:
            corners[v] = True
    return corners


def check_validity(mesh: SimplicialMesh, tol: float = 0.0):
    meas = mesh.measures
    bad = np.flatnonzero(meas <= tol)
    if len(bad):
        raise MeshError(
            f"{len(bad)} cell(s) with non-positive measure, first: {bad[:5].tolist()}", bad
        )
    expected = {tuple(sorted(f)) for f in exterior_facets(mesh.cells).tolist()}
    present = {tuple(sorted(f)) for f in mesh.facets.tolist()}
    if expected != present:
        missing = sorted(expected - present)
        extra = sorted(present - expected)
        raise MeshError(
            f"boundary facets inconsistent: {len(missing)} missing, {len(extra)} spurious",
            missing + extra,
        )


def structured_mesh(dim: int, n: int) -> SimplicialMesh:
    """
    Uniform simplicial mesh of the unit square or cube with ``n`` divisions per side.

    Squares are cut along the (0,0)-(1,1) diagonal into two triangles; cubes are
    split into six tetrahedra around their main diagonal.  All boundary facets get
    marker 1 and the domain corners are flagged.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    n = int(n)
    ticks = np.linspace(0.0, 1.0, n + 1)
    if dim == 2:
        X, Y = np.meshgrid(ticks, ticks, indexing="ij")
        points = np.column_stack([X.ravel(), Y.ravel()])
        idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
        v00 = idx[:-1, :-1].ravel()
        v10 = idx[1:, :-1].ravel()
        v01 = idx[:-1, 1:].ravel()
        v11 = idx[1:, 1:].ravel()
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
        cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    else:
        X, Y, Z = np.meshgrid(ticks, ticks, ticks, indexing="ij")
        points = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
        idx = np.arange((n + 1) ** 3).reshape(n + 1, n + 1, n + 1)
        base = idx[:-1, :-1, :-1].ravel()
        stride = np.array([(n + 1) ** 2, n + 1, 1])
        tets = []
        for perm in itertools.permutations(range(3)):
            a = base + stride[perm[0]]
            b = a + stride[perm[1]]
            c = b + stride[perm[2]]
            tets.append(np.column_stack([base, a, b, c]))
        cells = np.stack(tets, axis=1).reshape(-1, 4)
        neg = signed_measures(points, cells) < 0
        cells[neg] = cells[neg][:, [0, 2, 1, 3]]
    corners = np.zeros(len(points), dtype=bool)
    on_corner = np.all((points == 0.0) | (points == 1.0), axis=1)
    corners[on_corner] = True
    facets = exterior_facets(cells)
    return SimplicialMesh(points, cells, facets, np.ones(len(facets), dtype=np.int64), corners)
