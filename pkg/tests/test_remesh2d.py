import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisomesh.meshkit import MeshError, SimplicialMesh, statistics, structured_mesh
from anisomesh.metric import MetricField, complexity, uniform_metric
from anisomesh.remesh2d import RemeshParams, Remesher, adapt, adapt_with_metric, edge_lengths

SQRT2 = math.sqrt(2.0)
# elements produced per unit of metric complexity on the unit square; measured on
# uniform metrics (2.0 to 3.1 depending on how h divides the side) and fixed here
ELEMENTS_PER_COMPLEXITY = 2.5


def unit_fraction(ell):
    return np.mean((ell >= (1 - 1e-9) / SQRT2) & (ell <= SQRT2 * (1 + 1e-9)))


def const(mesh, m):
    return np.broadcast_to(m, (mesh.num_vertices, 2, 2)).copy()


def lengths(mesh, values):
    return edge_lengths(mesh.points, values, mesh.edges)


def find(mesh, xy):
    return int(np.flatnonzero(np.all(np.abs(mesh.points - xy) < 1e-12, axis=1))[0])


def moved(mesh, v, xy):
    pts = mesh.points.copy()
    pts[v] = xy
    out = SimplicialMesh(pts, mesh.cells, mesh.facets, mesh.facet_markers, mesh.corners)
    out.check()
    return out


class TestParams:
    @pytest.mark.parametrize("bad", [dict(l_split=0.9), dict(l_collapse=1.1)])
    def test_thresholds(self, bad):
        with pytest.raises(ValueError):
            RemeshParams(**bad)


class TestSplit:
    def test_long_edge_split(self):
        mesh = structured_mesh(2, 1)
        r = Remesher(mesh, const(mesh, uniform_metric(2, 0.25)))
        assert r.length(0, 1) == pytest.approx(4.0)
        assert r.split_long_edges() > 0
        out, vals, _ = r.to_mesh()
        assert lengths(out, vals).max() <= SQRT2 * (1 + 1e-9)

    def test_unit_mesh_untouched(self):
        mesh = structured_mesh(2, 4)
        r = Remesher(mesh, const(mesh, uniform_metric(2, 0.25)))
        assert r.split_long_edges() == 0

    def test_refine_to_bound(self):
        mesh = structured_mesh(2, 4)
        r = Remesher(mesh, const(mesh, 64 * np.eye(2)), RemeshParams(debug=True))
        r.split_long_edges()
        out, vals, _ = r.to_mesh()
        out.check()
        assert lengths(out, vals).max() <= SQRT2 * (1 + 1e-9)
        assert len(out.edges) > len(mesh.edges)

    def test_metric_midpoint(self):
        # sizes 1 and 1/4 at the ends: both halves have equal metric length at x = 4/5
        pts = np.array([[0, 0], [1, 0], [0.5, 1]], float)
        mesh = SimplicialMesh(pts, [[0, 1, 2]])
        vals = np.array([np.eye(2), 16 * np.eye(2), 4 * np.eye(2)])
        r = Remesher(mesh, vals)
        r.split_edge(0, 1)
        x = r.X[-1]
        assert x == pytest.approx(4 / 5)
        assert r.MA[-1] == pytest.approx(0.2 * 1 + 0.8 * 16)

    def test_boundary_marker_inherited(self):
        mesh = structured_mesh(2, 1)
        markers = np.arange(1, len(mesh.facets) + 1)
        mesh = SimplicialMesh(mesh.points, mesh.cells, mesh.facets, markers)
        r = Remesher(mesh, const(mesh, 16 * np.eye(2)))
        r.split_long_edges()
        out, _, _ = r.to_mesh()
        assert set(out.facet_markers.tolist()) == set(markers.tolist())
        out.check()


class TestCollapse:
    def test_short_interior_edge(self):
        mesh = structured_mesh(2, 4)
        r = Remesher(mesh, const(mesh, uniform_metric(2, 0.25)))
        v, w = find(mesh, [0.5, 0.5]), find(mesh, [0.75, 0.5])
        r.split_edge(v, w)
        extra = len(r.X) - 1
        r.X[extra] = 0.525
        assert r.length(v, extra) == pytest.approx(0.1)
        assert r.collapse_short_edges() == 1
        out, vals, _ = r.to_mesh()
        out.check()
        assert out.num_vertices == mesh.num_vertices
        assert lengths(out, vals).min() > 0.5

    def test_corner_kept(self):
        mesh = structured_mesh(2, 4)
        r = Remesher(mesh, const(mesh, uniform_metric(2, 0.25)))
        corner, v = find(mesh, [0.0, 0.0]), find(mesh, [0.25, 0.25])
        r.split_edge(corner, v)
        extra = len(r.X) - 1
        r.X[extra] = r.Y[extra] = 0.02
        assert not r.try_collapse(corner, extra)
        assert r.collapse_short_edges() == 1
        out, _, _ = r.to_mesh()
        out.check()
        assert out.num_vertices == mesh.num_vertices
        np.testing.assert_array_equal(out.points[out.corners], mesh.points[mesh.corners])

    def test_coarsening_monotone(self):
        mesh = structured_mesh(2, 32)
        r = Remesher(mesh, const(mesh, np.eye(2)), RemeshParams(debug=True, max_outer_sweeps=30))
        r.run()
        counts = [mesh.num_vertices] + [h["vertices"] for h in r.history]
        assert all(b <= a for a, b in zip(counts, counts[1:]))
        out, _, _ = r.to_mesh()
        assert out.num_vertices <= 9
        assert out.measures.max() <= 1.0
        assert out.measures.sum() == pytest.approx(1.0, rel=1e-12)


def quad_mesh(points):
    # quad p0 p1 p2 p3 triangulated along the p0-p2 diagonal
    return SimplicialMesh(np.asarray(points, float), [[0, 1, 2], [0, 2, 3]])


def brute_force_worst(points, diag):
    from anisomesh.meshkit import triangle_quality

    pts = np.asarray(points, float)
    tris = [[0, 1, 2], [0, 2, 3]] if diag == 0 else [[0, 1, 3], [1, 2, 3]]
    m = np.broadcast_to(np.eye(2), (2, 3, 2, 2))
    return triangle_quality(pts[tris], m).max()


class TestSwap:
    KITE = [[0, 0], [1, -0.3], [2, 0], [1, 0.3]]

    def test_flat_pair_flipped(self):
        mesh = quad_mesh(self.KITE)
        assert brute_force_worst(self.KITE, 1) < brute_force_worst(self.KITE, 0)
        r = Remesher(mesh, const(mesh, np.eye(2)))
        assert r.swap_edges() == 1
        out, _, _ = r.to_mesh()
        out.check()
        assert {tuple(sorted(c)) for c in out.cells.tolist()} == {(0, 1, 3), (1, 2, 3)}

    def test_good_pair_kept(self):
        pts = [[1, -1], [2, 0], [1, 1], [0, 0]]
        assert brute_force_worst(pts, 0) <= brute_force_worst(pts, 1)
        mesh = quad_mesh(pts)
        assert Remesher(mesh, const(mesh, np.eye(2))).swap_edges() == 0

    def test_structured_no_flips(self):
        mesh = structured_mesh(2, 3)
        assert Remesher(mesh, const(mesh, np.eye(2))).swap_edges() == 0

    @given(st.integers(0, 2**16))
    @settings(max_examples=15)
    def test_boundary_never_flipped(self, seed):
        rng = np.random.default_rng(seed)
        mesh = structured_mesh(2, 5)
        pts = mesh.points.copy()
        free = ~mesh.boundary_vertices
        pts[free] += rng.uniform(-0.05, 0.05, (free.sum(), 2))
        mesh = SimplicialMesh(pts, mesh.cells, mesh.facets, mesh.facet_markers, mesh.corners)
        r = Remesher(mesh, const(mesh, np.eye(2)))
        before = dict(r.bedges)
        r.swap_edges()
        assert r.bedges == before
        r.check()


class TestSmooth:
    def test_symmetric_star_still(self):
        mesh = structured_mesh(2, 2)
        r = Remesher(mesh, const(mesh, np.eye(2)))
        c = find(mesh, [0.5, 0.5])
        r.dirty = {c}
        assert r.smooth_vertices() == 0
        assert (r.X[c], r.Y[c]) == (0.5, 0.5)

    def test_perturbed_vertex_returns(self):
        base = structured_mesh(2, 4)
        c = find(base, [0.5, 0.5])
        mesh = moved(base, c, [0.56, 0.46])
        r = Remesher(mesh, const(mesh, 16 * np.eye(2)))
        star = list(r.vtris[c])
        worst = max(r.tri_quality(*r.tris[t]) for t in star)
        r.dirty = {c}
        assert r.smooth_vertices() == 1
        assert math.hypot(r.X[c] - 0.5, r.Y[c] - 0.5) < math.hypot(0.06, 0.04)
        assert max(r.tri_quality(*r.tris[t]) for t in star) <= worst

    def test_corner_fixed(self):
        base = structured_mesh(2, 4)
        mesh = moved(base, find(base, [0.25, 0.0]), [0.1, 0.0])
        r = Remesher(mesh, const(mesh, 16 * np.eye(2)))
        corner = find(mesh, [0.0, 0.0])
        r.dirty = {corner}
        assert r.smooth_vertices() == 0

    def test_boundary_slides_along_side(self):
        base = structured_mesh(2, 4)
        v = find(base, [0.25, 0.0])
        mesh = moved(base, v, [0.1, 0.0])
        r = Remesher(mesh, const(mesh, 16 * np.eye(2)))
        r.dirty = {v}
        r.smooth_vertices()
        assert r.Y[v] == 0.0 and 0.1 < r.X[v] < 0.5


class TestAdapt:
    @pytest.mark.parametrize("h", [0.05, 0.03])
    def test_uniform(self, h):
        mesh = structured_mesh(2, 10)
        metric = const(mesh, uniform_metric(2, h))
        res = adapt_with_metric(mesh, metric, RemeshParams(debug=True))
        out = res.mesh
        expected = ELEMENTS_PER_COMPLEXITY / h**2
        assert 0.7 * expected <= out.num_cells <= 1.3 * expected
        ell = lengths(out, res.metric.values)
        assert unit_fraction(ell) >= 0.9
        assert np.median(ell) == pytest.approx(1.0, abs=0.2)

    @pytest.mark.parametrize("graded", [False, True])
    def test_unit_fraction_non_decreasing(self, graded):
        mesh = structured_mesh(2, 10)
        x = mesh.points
        h = 0.02 + 0.06 * x[:, 0] * x[:, 1] if graded else np.full(mesh.num_vertices, 0.03)
        r = Remesher(mesh, np.einsum("n,ij->nij", 1 / h**2, np.eye(2)))
        r.run()
        fractions = [e["unit_fraction"] for e in r.history]
        assert fractions[-1] >= 0.9
        assert all(b >= a - 1e-12 for a, b in zip(fractions[1:], fractions[2:]))

    def test_implied_metric_noop(self):
        mesh = structured_mesh(2, 16)
        h = 1 / 16
        # the metric under which the right triangles of the structured mesh are equilateral
        implied = np.array([[1.0, -0.5], [-0.5, 1.0]]) / h**2
        r = Remesher(mesh, const(mesh, implied))
        assert r.unit_edge_fraction() == 1.0
        r.run()
        edits = sum(e["splits"] + e["collapses"] + e["swaps"] + e["moves"] for e in r.history)
        assert edits < 0.01 * len(mesh.edges)

    def test_anisotropic(self):
        mesh = structured_mesh(2, 10)
        metric = const(mesh, np.diag([1 / 0.01**2, 1 / 0.4**2]))
        res = adapt_with_metric(mesh, metric, RemeshParams(debug=True))
        out = res.mesh
        stats = statistics(out)
        assert stats.ar_mean > 5
        x = out.points[out.cells]
        extent = x.max(axis=1) - x.min(axis=1)
        # elements are tall and thin: long along y, short along x
        assert np.median(extent[:, 1] / extent[:, 0]) > 5
        ell = lengths(out, res.metric.values)
        assert unit_fraction(ell) >= 0.9

    def test_deterministic(self):
        mesh = structured_mesh(2, 6)
        x = mesh.points
        vals = np.einsum("n,ij->nij", 200 + 2000 * x[:, 0] ** 2, np.eye(2))
        a = adapt_with_metric(mesh, vals)
        b = adapt_with_metric(mesh, vals)
        np.testing.assert_array_equal(a.mesh.points, b.mesh.points)
        np.testing.assert_array_equal(a.mesh.cells, b.mesh.cells)
        np.testing.assert_array_equal(a.metric.values, b.metric.values)

    def test_origin_and_frozen(self):
        mesh = structured_mesh(2, 6)
        frozen = frozenset(range(0, 12))
        res = adapt_with_metric(mesh, const(mesh, uniform_metric(2, 0.05)), RemeshParams(frozen_cells=frozen))
        pinned = np.unique(mesh.cells[list(frozen)])
        where = {o: i for i, o in enumerate(res.origin.tolist()) if o >= 0}
        assert set(pinned.tolist()) <= set(where)
        np.testing.assert_array_equal(res.mesh.points[[where[v] for v in pinned]], mesh.points[pinned])
        old = {tuple(sorted(mesh.points[c].round(12).ravel().tolist())) for c in mesh.cells[list(frozen)]}
        new = {tuple(sorted(p.round(12).ravel().tolist())) for p in res.mesh.points[res.mesh.cells]}
        assert old <= new

    def test_invalid_inputs(self):
        mesh = structured_mesh(2, 2)
        bad_cells = mesh.cells.copy()
        bad_cells[0] = bad_cells[0][[0, 2, 1]]
        bad = SimplicialMesh(mesh.points, bad_cells, mesh.facets, mesh.facet_markers)
        with pytest.raises(MeshError):
            Remesher(bad, const(mesh, np.eye(2)))
        with pytest.raises(ValueError):
            Remesher(mesh, const(mesh, np.diag([1.0, -1.0])))
        with pytest.raises(ValueError):
            Remesher(mesh, np.ones((3, 2, 2)))
        with pytest.raises(ValueError):
            Remesher(structured_mesh(3, 1), np.ones((8, 3, 3)))
        with pytest.raises(ValueError):
            Remesher(mesh, const(mesh, np.eye(2)), RemeshParams(frozen_cells={99}))

    def test_metric_field_accepted(self):
        mesh = structured_mesh(2, 3)
        out = adapt(mesh, MetricField(mesh, const(mesh, uniform_metric(2, 0.2))))
        out.check()


@st.composite
def smooth_metrics(draw):
    h0 = draw(st.floats(0.04, 0.2))
    ratio = draw(st.floats(1.0, 8.0))
    angle = draw(st.floats(0, math.pi))
    wave = draw(st.floats(0.0, 0.8))
    return h0, ratio, angle, wave


@given(smooth_metrics())
@settings(max_examples=12)
def test_random_smooth_metrics_stay_valid(case):
    h0, ratio, angle, wave = case
    mesh = structured_mesh(2, 6)
    x = mesh.points
    h = h0 * (1 + wave * np.sin(2 * math.pi * x[:, 0]) * np.cos(math.pi * x[:, 1]))
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    lam = np.stack([1 / h**2, 1 / (ratio * h) ** 2], axis=1)
    vals = np.einsum("ik,nk,jk->nij", rot, lam, rot)
    res = adapt_with_metric(mesh, vals, RemeshParams(debug=True, max_outer_sweeps=4))
    out = res.mesh
    out.check()
    assert out.measures.sum() == pytest.approx(1.0, rel=1e-10)
    assert out.corners.sum() == 4
    corners = out.points[out.corners]
    assert {tuple(p) for p in corners.tolist()} == {(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)}
    assert complexity(res.metric) > 0
