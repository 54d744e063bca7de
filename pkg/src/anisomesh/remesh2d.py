"""
Anisotropic local remeshing of triangle meshes.

A :class:`Remesher` holds a mutable copy of the mesh and its vertex metric and
applies four local operators aiming at edges of unit metric length:

* edge split (node insertion) for edges longer than ``l_split``;
* edge collapse (node deletion) for edges shorter than ``l_collapse``;
* edge swap (diagonal flip) when it improves the worse of the two triangles;
* vertex smoothing (node movement) towards a metric-length weighted average.

Candidates are screened with vectorized numpy passes, edits are applied one at a
time in pure Python on set-based adjacency.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .meshkit import MeshError, SimplicialMesh, exterior_facets, triangle_quality
from .metric import MetricField, eigendecompose

log = logging.getLogger(__name__)

__all__ = ["RemeshParams", "RemeshResult", "Remesher", "adapt", "adapt_with_metric", "edge_lengths"]

_SQRT3x4 = 4.0 * math.sqrt(3.0)
# collapses may not create triangles worse than this unless the star was already worse
_COLLAPSE_QUALITY_CAP = 2.0
# splits may not create triangles worse than this unless the parent was already worse
_SPLIT_QUALITY_CAP = 10.0
# edges sitting exactly on a threshold (e.g. diagonals of refined squares) are left alone
_ROUNDOFF = 1e-9


@dataclass
class RemeshParams:
    l_split: float = math.sqrt(2.0)
    l_collapse: float = 1.0 / math.sqrt(2.0)
    max_outer_sweeps: int = 10
    quality_swap_threshold: float = 1e-3
    smoothing_relaxation: float = 1.0
    frozen_cells: frozenset = field(default_factory=frozenset)
    min_edit_fraction: float = 0.005
    max_split_passes: int = 100
    debug: bool = False

    def __post_init__(self):
        if not self.l_collapse < 1.0 < self.l_split:
            raise ValueError("need l_collapse < 1 < l_split")
        self.frozen_cells = frozenset(int(c) for c in self.frozen_cells)


@dataclass
class RemeshResult:
    mesh: SimplicialMesh
    metric: MetricField
    origin: np.ndarray
    """Index of each output vertex in the input mesh, or -1 for inserted vertices."""
    history: list


def _quality(xa, ya, xb, yb, xc, yc, m11, m21, m22):
    e1x, e1y = xb - xa, yb - ya
    e2x, e2y = xc - xb, yc - yb
    e3x, e3y = xa - xc, ya - yc
    area = 0.5 * (e1x * e2y - e1y * e2x)
    det = m11 * m22 - m21 * m21
    if area <= 0.0 or det <= 0.0:
        return math.inf
    sq = (
        m11 * (e1x * e1x + e2x * e2x + e3x * e3x)
        + 2.0 * m21 * (e1x * e1y + e2x * e2y + e3x * e3y)
        + m22 * (e1y * e1y + e2y * e2y + e3y * e3y)
    )
    return sq / (_SQRT3x4 * math.sqrt(det) * area)


def edge_lengths(points, values, edges):
    """Vectorized metric lengths of ``edges`` (``(k, 2)`` vertex pairs)."""
    e = points[edges[:, 1]] - points[edges[:, 0]]
    mu, mv = values[edges[:, 0]], values[edges[:, 1]]
    l0 = np.sqrt(np.maximum(np.einsum("ki,kij,kj->k", e, mu, e), 0.0))
    l1 = np.sqrt(np.maximum(np.einsum("ki,kij,kj->k", e, mv, e), 0.0))
    close = np.abs(l0 - l1) <= 1e-12 * l0
    with np.errstate(divide="ignore", invalid="ignore"):
        general = (l0 - l1) / np.log(np.where(close, 2.0, l0 / np.where(l1 > 0, l1, 1.0)))
    return np.where(close, l0, general)


class Remesher:
    """Mutable adaptation state for one 2D mesh and its metric."""

    def __init__(self, mesh: SimplicialMesh, metric, params: RemeshParams | None = None):
        self.params = params or RemeshParams()
        if mesh.dim != 2:
            raise ValueError("the local remesher handles 2D triangle meshes only")
        values = np.asarray(getattr(metric, "values", metric), dtype=float)
        if values.shape != (mesh.num_vertices, 2, 2):
            raise ValueError(f"metric shape {values.shape} does not match the mesh")
        mesh.check()
        w, _ = eigendecompose(values)
        if not np.all(w > 0):
            raise ValueError("metric must be SPD at every vertex")

        self.X = mesh.points[:, 0].tolist()
        self.Y = mesh.points[:, 1].tolist()
        self.MA = values[:, 0, 0].tolist()
        self.MB = (0.5 * (values[:, 1, 0] + values[:, 0, 1])).tolist()
        self.MC = values[:, 1, 1].tolist()
        n = mesh.num_vertices
        self.corner = mesh.corners.tolist()
        self.bnd = mesh.boundary_vertices.tolist()
        self.valive = [True] * n
        self.origin = list(range(n))
        self.tris = mesh.cells.tolist()
        self.talive = [True] * len(self.tris)
        self.tfrozen = [False] * len(self.tris)
        self.vfrozen = [False] * n
        for c in self.params.frozen_cells:
            if not 0 <= c < len(self.tris):
                raise ValueError(f"frozen cell {c} out of range")
            self.tfrozen[c] = True
            for v in self.tris[c]:
                self.vfrozen[v] = True
        self.vtris = [set() for _ in range(n)]
        for t, (a, b, c) in enumerate(self.tris):
            self.vtris[a].add(t)
            self.vtris[b].add(t)
            self.vtris[c].add(t)
        self.bedges = {}
        for (a, b), mk in zip(mesh.facets.tolist(), mesh.facet_markers.tolist()):
            self.bedges[(a, b) if a < b else (b, a)] = mk
        self.history = []
        # vertices whose star changed since their last smoothing attempt
        self.dirty = set(range(n))

    # ------------------------------------------------------------------ queries

    def length(self, u, v):
        X, Y, MA, MB, MC = self.X, self.Y, self.MA, self.MB, self.MC
        ex, ey = X[v] - X[u], Y[v] - Y[u]
        l0 = math.sqrt(max(MA[u] * ex * ex + 2.0 * MB[u] * ex * ey + MC[u] * ey * ey, 0.0))
        l1 = math.sqrt(max(MA[v] * ex * ex + 2.0 * MB[v] * ex * ey + MC[v] * ey * ey, 0.0))
        if abs(l0 - l1) <= 1e-12 * l0:
            return l0
        return (l0 - l1) / math.log(l0 / l1)

    def tri_quality(self, a, b, c, moved=None, pos=None):
        X, Y, MA, MB, MC = self.X, self.Y, self.MA, self.MB, self.MC
        xa, ya, xb, yb, xc, yc = X[a], Y[a], X[b], Y[b], X[c], Y[c]
        if moved is not None:
            if a == moved:
                xa, ya = pos
            elif b == moved:
                xb, yb = pos
            elif c == moved:
                xc, yc = pos
        return _quality(
            xa, ya, xb, yb, xc, yc,
            (MA[a] + MA[b] + MA[c]) / 3.0,
            (MB[a] + MB[b] + MB[c]) / 3.0,
            (MC[a] + MC[b] + MC[c]) / 3.0,
        )

    def neighbors(self, v):
        out = set()
        tris = self.tris
        for t in self.vtris[v]:
            out.update(tris[t])
        out.discard(v)
        return out

    def _arrays(self):
        ids = np.flatnonzero(np.asarray(self.talive))
        tris = np.asarray(self.tris, dtype=np.int64)[ids]
        pts = np.column_stack([self.X, self.Y])
        vals = np.empty((len(self.X), 2, 2))
        vals[:, 0, 0] = self.MA
        vals[:, 0, 1] = vals[:, 1, 0] = self.MB
        vals[:, 1, 1] = self.MC
        return ids, tris, pts, vals

    def _edges(self, ids, tris):
        """Unique edges with a flag marking those owned by a frozen triangle."""
        pairs = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        owners = np.tile(ids, 3)
        pairs.sort(axis=1)
        n = len(self.X)
        keys, inverse = np.unique(pairs[:, 0] * n + pairs[:, 1], return_inverse=True)
        edges = np.column_stack([keys // n, keys % n])
        frozen = np.zeros(len(edges), dtype=bool)
        tf = np.asarray(self.tfrozen)[owners]
        if tf.any():
            frozen[inverse.reshape(-1)[tf]] = True
        return edges, frozen

    def num_edges(self):
        ids, tris, _, _ = self._arrays()
        return len(self._edges(ids, tris)[0])

    def unit_edge_fraction(self):
        ids, tris, pts, vals = self._arrays()
        edges, _ = self._edges(ids, tris)
        ell = edge_lengths(pts, vals, edges)
        lo, hi = self.params.l_collapse * (1.0 - _ROUNDOFF), self.params.l_split * (1.0 + _ROUNDOFF)
        return float(np.mean((ell >= lo) & (ell <= hi)))

    # ---------------------------------------------------------------- splitting

    def _add_vertex(self, x, y, m11, m21, m22, boundary):
        self.X.append(x)
        self.Y.append(y)
        self.MA.append(m11)
        self.MB.append(m21)
        self.MC.append(m22)
        self.corner.append(False)
        self.bnd.append(boundary)
        self.valive.append(True)
        self.vfrozen.append(False)
        self.origin.append(-1)
        self.vtris.append(set())
        self.dirty.add(len(self.X) - 1)
        return len(self.X) - 1

    def _add_tri(self, a, b, c):
        self.tris.append([a, b, c])
        self.talive.append(True)
        self.tfrozen.append(False)
        t = len(self.tris) - 1
        self.vtris[a].add(t)
        self.vtris[b].add(t)
        self.vtris[c].add(t)
        return t

    def _oriented(self, tid, u, v):
        """Vertices (p, q, r) of triangle ``tid``, counter-clockwise, with p -> q along edge (u, v)."""
        tri = self.tris[tid]
        i = tri.index(u)
        if tri[(i + 1) % 3] == v:
            return u, v, tri[(i + 2) % 3]
        return v, u, tri[(i + 1) % 3]

    def _child_quality(self, b, c, pos, met):
        """Quality of the triangle (new vertex, b, c), the new vertex at ``pos`` with metric ``met``."""
        X, Y, MA, MB, MC = self.X, self.Y, self.MA, self.MB, self.MC
        return _quality(
            pos[0], pos[1], X[b], Y[b], X[c], Y[c],
            (met[0] + MA[b] + MA[c]) / 3.0,
            (met[1] + MB[b] + MB[c]) / 3.0,
            (met[2] + MC[b] + MC[c]) / 3.0,
        )

    def split_edge(self, u, v, guard: bool = True):
        """
        Insert a vertex at the metric midpoint of edge (u, v).

        :arg guard: when (u, v) is not the longest edge of a triangle (e.g. because
            that edge is frozen), refuse the split if a child triangle would be
            degenerate, or worse than both its parent and a fixed cap
        :returns: touched triangles, empty if the split was refused
        """
        X, Y, MA, MB, MC = self.X, self.Y, self.MA, self.MB, self.MC
        ex, ey = X[v] - X[u], Y[v] - Y[u]
        l0 = math.sqrt(MA[u] * ex * ex + 2.0 * MB[u] * ex * ey + MC[u] * ey * ey)
        l1 = math.sqrt(MA[v] * ex * ex + 2.0 * MB[v] * ex * ey + MC[v] * ey * ey)
        # sizes scale like 1/l, so the point of equal metric length lies nearer the finer end
        t = l1 / (l0 + l1)
        pos = (X[u] + t * ex, Y[u] + t * ey)
        met = (
            (1.0 - t) * MA[u] + t * MA[v],
            (1.0 - t) * MB[u] + t * MB[v],
            (1.0 - t) * MC[u] + t * MC[v],
        )
        shared = sorted(self.vtris[u] & self.vtris[v])
        oriented = [self._oriented(tid, u, v) for tid in shared]
        if guard:
            luv = self.length(u, v)
            for p, q, r in oriented:
                if luv >= max(self.length(q, r), self.length(r, p)):
                    # longest-edge bisection cannot run away; no check needed
                    continue
                # children (p, m, r) and (m, q, r), rotated to put the new vertex first
                q1 = self._child_quality(r, p, pos, met)
                q2 = self._child_quality(q, r, pos, met)
                if q1 == math.inf or q2 == math.inf:
                    return []
                parent = self.tri_quality(p, q, r)
                if max(q1, q2) > max(parent, _SPLIT_QUALITY_CAP):
                    return []
        key = (u, v) if u < v else (v, u)
        marker = self.bedges.pop(key, None)
        m = self._add_vertex(pos[0], pos[1], met[0], met[1], met[2], marker is not None)
        if marker is not None:
            self.bedges[(u, m) if u < m else (m, u)] = marker
            self.bedges[(v, m) if v < m else (m, v)] = marker
        touched = []
        for tid, (p, q, r) in zip(shared, oriented):
            self.tris[tid] = [p, m, r]
            self.vtris[q].discard(tid)
            self.vtris[m].add(tid)
            touched.append(tid)
            touched.append(self._add_tri(m, q, r))
            self.dirty.update((p, q, r))
        return touched

    def split_long_edges(self):
        """Split every splittable edge longer than ``l_split``, repeating until none remain."""
        total = 0
        for _ in range(self.params.max_split_passes):
            ids, tris, pts, vals = self._arrays()
            edges, frozen = self._edges(ids, tris)
            ell = edge_lengths(pts, vals, edges)
            cand = np.flatnonzero((ell > self.params.l_split * (1.0 + _ROUNDOFF)) & ~frozen)
            if len(cand) == 0:
                break
            cand = cand[np.argsort(-ell[cand], kind="stable")]
            touched = set()
            done = 0
            vtris = self.vtris
            for u, v in edges[cand].tolist():
                shared = vtris[u] & vtris[v]
                if not shared or not touched.isdisjoint(shared):
                    continue
                changed = self.split_edge(u, v)
                if changed:
                    touched.update(changed)
                    done += 1
            total += done
            if done == 0:
                break
        return total

    # ---------------------------------------------------------------- collapses

    def try_collapse(self, r, k):
        """Remove vertex ``r`` by merging it into ``k`` if legal; returns success."""
        if self.corner[r] or self.vfrozen[r]:
            return False
        key = (r, k) if r < k else (k, r)
        if self.bnd[r] and key not in self.bedges:
            return False
        tris, vtris = self.tris, self.vtris
        star = vtris[r]
        shared = star & vtris[k]
        if not shared:
            return False
        opposite = set()
        for t in shared:
            for w in tris[t]:
                if w != r and w != k:
                    opposite.add(w)
        nbr_r = self.neighbors(r)
        nbr_k = self.neighbors(k)
        if (nbr_r & nbr_k) != opposite:
            return False
        old_worst = max(self.tri_quality(*tris[t]) for t in star)
        new_worst = 0.0
        rebuilt = []
        for t in star:
            if t in shared:
                continue
            a, b, c = (k if w == r else w for w in tris[t])
            q = self.tri_quality(a, b, c)
            if q == math.inf:
                return False
            new_worst = max(new_worst, q)
            rebuilt.append((t, [a, b, c]))
        if new_worst > max(old_worst, _COLLAPSE_QUALITY_CAP):
            return False
        l_split = self.params.l_split
        for x in nbr_r - nbr_k - {k}:
            if self.length(k, x) > l_split * (1.0 + _ROUNDOFF):
                return False
        for t in shared:
            self.talive[t] = False
            for w in tris[t]:
                vtris[w].discard(t)
        for t, verts in rebuilt:
            tris[t] = verts
            vtris[k].add(t)
        vtris[r] = set()
        self.valive[r] = False
        self.dirty.update(nbr_r)
        self.dirty.discard(r)
        if self.bnd[r]:
            del self.bedges[key]
            for other in list(nbr_r):
                okey = (r, other) if r < other else (other, r)
                if okey in self.bedges:
                    mk = self.bedges.pop(okey)
                    self.bedges[(k, other) if k < other else (other, k)] = mk
        return True

    def collapse_short_edges(self):
        ids, tris, pts, vals = self._arrays()
        edges, frozen = self._edges(ids, tris)
        ell = edge_lengths(pts, vals, edges)
        cand = np.flatnonzero((ell < self.params.l_collapse * (1.0 - _ROUNDOFF)) & ~frozen)
        cand = cand[np.argsort(ell[cand], kind="stable")]
        done = 0
        valive = self.valive
        for u, v in edges[cand].tolist():
            if not (valive[u] and valive[v]):
                continue
            if self.try_collapse(u, v) or self.try_collapse(v, u):
                done += 1
        return done

    # -------------------------------------------------------------------- swaps

    def _interior_edges(self, ids, tris):
        """For every interior edge: (t1, t2, u, v, a, b) with t1 = (u, v, a), t2 = (v, u, b)."""
        src = np.concatenate([tris[:, 0], tris[:, 1], tris[:, 2]])
        dst = np.concatenate([tris[:, 1], tris[:, 2], tris[:, 0]])
        opp = np.concatenate([tris[:, 2], tris[:, 0], tris[:, 1]])
        owner = np.tile(ids, 3)
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        order = np.lexsort((src > dst, hi, lo))
        lo, hi = lo[order], hi[order]
        same = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
        i1 = order[:-1][same]
        i2 = order[1:][same]
        return owner[i1], owner[i2], src[i1], dst[i1], opp[i1], opp[i2]

    def swap_edges(self, max_passes: int = 3):
        total = 0
        thr = self.params.quality_swap_threshold
        for _ in range(max_passes):
            ids, tris, pts, vals = self._arrays()
            if len(ids) == 0:
                break
            q = np.full(len(self.tris), np.inf)
            q[ids] = triangle_quality(pts[tris], vals[tris])
            t1, t2, u, v, a, b = self._interior_edges(ids, tris)
            tf = np.asarray(self.tfrozen)
            keep = ~(tf[t1] | tf[t2])
            t1, t2, u, v, a, b = (arr[keep] for arr in (t1, t2, u, v, a, b))
            q_old = np.maximum(q[t1], q[t2])
            n1 = np.stack([a, u, b], axis=1)
            n2 = np.stack([b, v, a], axis=1)
            q1 = triangle_quality(pts[n1], vals[n1])
            q2 = triangle_quality(pts[n2], vals[n2])
            q_new = np.maximum(q1, q2)
            good = np.isfinite(q_new) & (q_new < q_old * (1.0 - thr))
            if not good.any():
                break
            idx = np.flatnonzero(good)
            # an infinite (degenerate) old pair is the most urgent flip
            with np.errstate(invalid="ignore"):
                gain = np.where(np.isfinite(q_old[idx]), (q_old[idx] - q_new[idx]) / q_old[idx], 1.0)
            idx = idx[np.argsort(-gain, kind="stable")]
            touched = set()
            done = 0
            trisl, vtris = self.tris, self.vtris
            for T1, T2, uu, vv, aa, bb in zip(
                t1[idx].tolist(), t2[idx].tolist(), u[idx].tolist(),
                v[idx].tolist(), a[idx].tolist(), b[idx].tolist(),
            ):
                if T1 in touched or T2 in touched:
                    continue
                if vtris[aa] & vtris[bb]:
                    continue
                trisl[T1] = [aa, uu, bb]
                trisl[T2] = [bb, vv, aa]
                vtris[vv].discard(T1)
                vtris[bb].add(T1)
                vtris[uu].discard(T2)
                vtris[aa].add(T2)
                touched.add(T1)
                touched.add(T2)
                self.dirty.update((uu, vv, aa, bb))
                done += 1
            total += done
            if done == 0:
                break
        return total

    # ---------------------------------------------------------------- smoothing

    def _boundary_neighbors(self, v, nbrs):
        out = []
        for w in nbrs:
            if ((v, w) if v < w else (w, v)) in self.bedges:
                out.append(w)
        return out

    def smooth_vertices(self):
        X, Y = self.X, self.Y
        tris = self.tris
        relax = self.params.smoothing_relaxation
        thr = self.params.quality_swap_threshold
        moved = 0
        todo = sorted(self.dirty)
        self.dirty = set()
        for v in todo:
            if not self.valive[v] or self.corner[v] or self.vfrozen[v]:
                continue
            star = self.vtris[v]
            nbrs = self.neighbors(v)
            if not nbrs:
                continue
            wsum = sx = sy = 0.0
            for w in nbrs:
                ell = self.length(v, w)
                wsum += ell
                sx += ell * X[w]
                sy += ell * Y[w]
            if wsum <= 0.0:
                continue
            dx = relax * (sx / wsum - X[v])
            dy = relax * (sy / wsum - Y[v])
            lo = hi = None
            if self.bnd[v]:
                ends = self._boundary_neighbors(v, nbrs)
                if len(ends) != 2:
                    continue
                p, q = ends
                tx, ty = X[q] - X[p], Y[q] - Y[p]
                seg = math.hypot(tx, ty)
                tx, ty = tx / seg, ty / seg
                s = dx * tx + dy * ty
                dx, dy = s * tx, s * ty
                s0 = (X[v] - X[p]) * tx + (Y[v] - Y[p]) * ty
                lo, hi = -s0 + 1e-6 * seg, seg - s0 - 1e-6 * seg
                along = s
            if dx == 0.0 and dy == 0.0:
                continue
            old_worst = max(self.tri_quality(*tris[t]) for t in star)
            for scale in (1.0, 0.5, 0.25):
                if lo is not None and not lo < scale * along < hi:
                    continue
                pos = (X[v] + scale * dx, Y[v] + scale * dy)
                new_worst = max(self.tri_quality(*tris[t], moved=v, pos=pos) for t in star)
                if new_worst < old_worst * (1.0 - thr):
                    X[v], Y[v] = pos
                    moved += 1
                    self.dirty.add(v)
                    self.dirty.update(nbrs)
                    break
        return moved

    # ----------------------------------------------------------------- driving

    def check(self):
        self.to_mesh()[0].check()

    def run(self):
        """Outer adaptation loop; returns the per-sweep history."""
        prm = self.params
        for sweep in range(prm.max_outer_sweeps):
            splits = self.split_long_edges()
            if prm.debug:
                self.check()
            collapses = self.collapse_short_edges()
            if prm.debug:
                self.check()
            swaps = self.swap_edges()
            if prm.debug:
                self.check()
            moves = self.smooth_vertices()
            if prm.debug:
                self.check()
            n_edges = self.num_edges()
            edits = splits + collapses + swaps + moves
            entry = {
                "sweep": sweep,
                "splits": splits,
                "collapses": collapses,
                "swaps": swaps,
                "moves": moves,
                "edges": n_edges,
                "vertices": sum(self.valive),
                "unit_fraction": self.unit_edge_fraction(),
            }
            self.history.append(entry)
            log.debug("remesh sweep %s", entry)
            if edits < prm.min_edit_fraction * n_edges:
                break
        return self.history

    def to_mesh(self):
        """Compact the current state into ``(mesh, metric values, origin)``."""
        alive_v = np.flatnonzero(np.asarray(self.valive))
        renum = -np.ones(len(self.valive), dtype=np.int64)
        renum[alive_v] = np.arange(len(alive_v))
        ids = np.flatnonzero(np.asarray(self.talive))
        cells = renum[np.asarray(self.tris, dtype=np.int64)[ids]]
        if np.any(cells < 0):
            raise MeshError("live triangle references a removed vertex")
        pts = np.column_stack([self.X, self.Y])[alive_v]
        facets = exterior_facets(cells)
        inv = alive_v
        markers = []
        for a, b in facets.tolist():
            ga, gb = int(inv[a]), int(inv[b])
            key = (ga, gb) if ga < gb else (gb, ga)
            if key not in self.bedges:
                raise MeshError(f"boundary edge ({ga}, {gb}) has no marker", [key])
            markers.append(self.bedges[key])
        if len(facets) != len(self.bedges):
            raise MeshError(
                f"{len(self.bedges)} marked boundary edges but {len(facets)} exterior facets"
            )
        corners = np.asarray(self.corner, dtype=bool)[alive_v]
        mesh = SimplicialMesh(pts, cells, facets, np.asarray(markers, dtype=np.int64), corners)
        vals = np.empty((len(alive_v), 2, 2))
        vals[:, 0, 0] = np.asarray(self.MA)[alive_v]
        vals[:, 0, 1] = vals[:, 1, 0] = np.asarray(self.MB)[alive_v]
        vals[:, 1, 1] = np.asarray(self.MC)[alive_v]
        origin = np.asarray(self.origin, dtype=np.int64)[alive_v]
        return mesh, vals, origin

    def result(self) -> RemeshResult:
        mesh, vals, origin = self.to_mesh()
        return RemeshResult(mesh, MetricField(mesh, vals), origin, list(self.history))


def adapt_with_metric(mesh: SimplicialMesh, metric, params: RemeshParams | None = None) -> RemeshResult:
    remesher = Remesher(mesh, metric, params)
    remesher.run()
    return remesher.result()


def adapt(mesh: SimplicialMesh, metric, params: RemeshParams | None = None) -> SimplicialMesh:
    """Adapt ``mesh`` towards unit edge lengths in ``metric``."""
    return adapt_with_metric(mesh, metric, params).mesh
