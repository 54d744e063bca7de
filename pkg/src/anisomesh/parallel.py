"""
Partitioned adaptation: split the mesh into parts, adapt each part with its
interface cells frozen, glue the parts back together and repeat with moved
interfaces.

Parts are value-isolated submeshes, so the worker pool shares no mutable state.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .meshkit import MeshError, SimplicialMesh, detect_corners, exterior_facets
from .metric import AdaptOptions
from .remesh2d import RemeshParams, Remesher, adapt_with_metric

log = logging.getLogger(__name__)

__all__ = [
    "MergeError",
    "Partition",
    "SubMesh",
    "cell_fingerprints",
    "extract",
    "merge",
    "parallel_adapt",
    "parallel_adapt_with_metric",
    "partition",
]

# marker carried by submesh facets that lie on a part interface
INTERFACE_MARKER = -1
# relative shift of the first cut, cycled with the seed so interfaces migrate
_CUT_SHIFTS = (0.0, 0.08, -0.08)


class MergeError(MeshError):
    """Parts disagree on the entities they share."""


@dataclass
class Partition:
    id: int
    cells: np.ndarray
    ghost: np.ndarray
    """One ring of cells sharing a vertex with the part but owned elsewhere."""
    interface: np.ndarray
    """Cells of the part with a face neighbour in another part."""


def _directions(dim, seed):
    """Cut directions for ``seed``: the coordinate axes, rotated in 2D by ``seed * pi/4``."""
    axes = np.eye(dim)
    if dim == 2:
        t = seed * math.pi / 4.0
        c, s = math.cos(t), math.sin(t)
        axes = np.array([[c, s], [-s, c]])
    start = seed % dim
    return [axes[(start + k) % dim] for k in range(dim)]


def _bisect(ids, bary, nparts, dirs, depth, first_shift, out):
    if nparts == 1:
        out.append(np.sort(ids))
        return
    k = nparts // 2
    coord = bary[ids] @ dirs[depth % len(dirs)]
    frac = k / nparts
    if depth == 0:
        frac *= 1.0 + first_shift
    # stable order keeps ties deterministic
    order = np.argsort(coord, kind="stable")
    cut = int(round(frac * len(ids)))
    cut = min(max(cut, k), len(ids) - (nparts - k))
    _bisect(ids[order[:cut]], bary, k, dirs, depth + 1, 0.0, out)
    _bisect(ids[order[cut:]], bary, nparts - k, dirs, depth + 1, 0.0, out)


def partition(mesh: SimplicialMesh, num_parts: int, axis_seed: int = 0) -> list[Partition]:
    """
    Recursive coordinate bisection of cell barycentres.

    :arg num_parts: number of parts, at most the number of cells
    :arg axis_seed: selects the first cut axis (``axis_seed mod d``), the frame
        rotation in 2D and a small shift of the first cut, so that successive
        seeds give different interfaces
    """
    num_parts = int(num_parts)
    if num_parts < 1:
        raise ValueError(f"need at least one part, got {num_parts}")
    if num_parts > mesh.num_cells:
        raise ValueError(f"cannot split {mesh.num_cells} cells into {num_parts} parts")
    bary = mesh.points[mesh.cells].mean(axis=1)
    dirs = _directions(mesh.dim, axis_seed)
    shift = _CUT_SHIFTS[axis_seed % len(_CUT_SHIFTS)]
    groups: list[np.ndarray] = []
    _bisect(np.arange(mesh.num_cells), bary, num_parts, dirs, 0, shift, groups)

    owner = np.empty(mesh.num_cells, dtype=np.int64)
    for p, cells in enumerate(groups):
        owner[cells] = p
    nbr = mesh.cell_neighbors
    nbr_owner = np.where(nbr >= 0, owner[np.maximum(nbr, 0)], -1)
    crossing = np.any((nbr_owner >= 0) & (nbr_owner != owner[:, None]), axis=1)
    parts = []
    for p, cells in enumerate(groups):
        touching = np.zeros(mesh.num_vertices, dtype=bool)
        touching[mesh.cells[cells].reshape(-1)] = True
        ghost = np.flatnonzero(touching[mesh.cells].any(axis=1) & (owner != p))
        parts.append(Partition(p, cells, ghost, cells[crossing[cells]]))
    return parts


@dataclass
class SubMesh:
    """A part extracted as a standalone mesh, plus what is needed to glue it back."""

    part: int
    mesh: SimplicialMesh
    metric: np.ndarray
    gids: list
    """Stable global id of every local vertex: ``(-1, index)`` for vertices of the
    input mesh, ``(part, counter)`` for vertices created while adapting a part."""
    frozen: np.ndarray
    """Local indices of cells that must come back unchanged."""
    corners: np.ndarray
    """Local corner flags inherited from the global mesh."""


def extract(mesh: SimplicialMesh, metric_values, part: Partition, corners=None) -> SubMesh:
    corners = mesh.corners if corners is None else corners
    verts, local = np.unique(mesh.cells[part.cells], return_inverse=True)
    cells = local.reshape(-1, mesh.dim + 1)
    points = mesh.points[verts]
    facets = exterior_facets(cells)
    global_marker = {
        tuple(sorted(f)): m for f, m in zip(mesh.facets.tolist(), mesh.facet_markers.tolist())
    }
    markers = np.array(
        [global_marker.get(tuple(sorted(verts[f].tolist())), INTERFACE_MARKER) for f in facets],
        dtype=np.int64,
    )
    sub_corners = corners[verts] | detect_corners(points, facets, markers)
    frozen = np.flatnonzero(np.isin(part.cells, part.interface))
    sub = SimplicialMesh(points, cells, facets, markers, sub_corners)
    gids = [(-1, v) for v in verts.tolist()]
    return SubMesh(part.id, sub, np.asarray(metric_values)[verts], gids, frozen, corners[verts])


def cell_fingerprints(points, cells, gids, which=None) -> set:
    """Hashable identity of cells: global vertex ids with exact coordinates, rotation-normalized."""
    which = range(len(cells)) if which is None else which
    out = set()
    for c in which:
        key = [(gids[v], tuple(points[v].tolist())) for v in cells[c]]
        i = key.index(min(key))
        out.add(tuple(key[i:] + key[:i]))
    return out


@dataclass
class _PartResult:
    part: int
    mesh: SimplicialMesh
    metric: np.ndarray
    gids: list
    corners: np.ndarray
    history: list


def _adapt_part(sub: SubMesh, params: RemeshParams) -> _PartResult:
    prm = RemeshParams(**{**params.__dict__, "frozen_cells": frozenset(sub.frozen.tolist())})
    remesher = Remesher(sub.mesh, sub.metric, prm)
    remesher.run()
    mesh, values, origin = remesher.to_mesh()
    counter = 0
    gids = []
    for o in origin.tolist():
        if o >= 0:
            gids.append(sub.gids[o])
        else:
            gids.append((sub.part, counter))
            counter += 1
    corners = np.zeros(mesh.num_vertices, dtype=bool)
    kept = origin >= 0
    corners[kept] = sub.corners[origin[kept]]
    before = cell_fingerprints(sub.mesh.points, sub.mesh.cells, sub.gids, sub.frozen)
    after = cell_fingerprints(mesh.points, mesh.cells, gids)
    missing = before - after
    if missing:
        raise MergeError(
            f"part {sub.part}: {len(missing)} frozen interface cells were modified", sorted(missing)[:10]
        )
    return _PartResult(sub.part, mesh, values, gids, corners, remesher.history)


def merge(results) -> tuple[SimplicialMesh, np.ndarray, list]:
    """
    Glue adapted parts into one mesh by identifying vertices with equal global ids.

    :returns: ``(mesh, metric values, gids)``
    :raises MergeError: when shared vertices disagree or the glued boundary is inconsistent
    """
    results = sorted(results, key=lambda r: r.part)
    index = {}
    points, values, corners, gids = [], [], [], []
    cells = []
    markers = {}
    mismatched = []
    for r in results:
        local = np.empty(r.mesh.num_vertices, dtype=np.int64)
        for i, g in enumerate(r.gids):
            j = index.get(g)
            if j is None:
                j = index[g] = len(points)
                points.append(r.mesh.points[i])
                values.append(r.metric[i])
                corners.append(bool(r.corners[i]))
                gids.append(g)
            elif not np.array_equal(points[j], r.mesh.points[i]):
                mismatched.append(g)
            local[i] = j
        cells.append(local[r.mesh.cells])
        for f, m in zip(r.mesh.facets.tolist(), r.mesh.facet_markers.tolist()):
            if m != INTERFACE_MARKER:
                markers[tuple(sorted(local[f].tolist()))] = m
    if mismatched:
        raise MergeError(f"{len(mismatched)} shared vertices moved during adaptation", mismatched[:10])
    cells = np.concatenate(cells)
    points = np.array(points)
    facets = exterior_facets(cells)
    keys = [tuple(sorted(f)) for f in facets.tolist()]
    unmarked = [k for k in keys if k not in markers]
    if unmarked or len(keys) != len(markers):
        raise MergeError(
            f"glued boundary has {len(unmarked)} facets without a marker and "
            f"{len(markers) - (len(keys) - len(unmarked))} stray marked facets",
            unmarked[:10],
        )
    mesh = SimplicialMesh(
        points, cells, facets, np.array([markers[k] for k in keys], dtype=np.int64), np.array(corners)
    )
    mesh.check()
    return mesh, np.array(values), gids


def _pool_size(num_parts):
    env = os.environ.get("ANISOMESH_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(num_parts, cap))


def parallel_adapt_with_metric(
    mesh: SimplicialMesh,
    metric,
    opts: AdaptOptions,
    params: RemeshParams | None = None,
    history: list | None = None,
    seed: int = 0,
) -> tuple[SimplicialMesh, np.ndarray]:
    """
    Adapt ``mesh`` in ``opts.num_parts`` parts for ``opts.parallel_iters`` rounds,
    moving the part interfaces between rounds.  A single part is plain serial
    adaptation, run once.

    :arg history: optional list receiving one dict per round
    :arg seed: partition seed of the first round; round ``i`` uses ``seed + i``
    :returns: ``(mesh, metric values carried to its vertices)``
    """
    params = params or RemeshParams()
    values = np.asarray(getattr(metric, "values", metric), dtype=float)
    if opts.num_parts == 1:
        result = adapt_with_metric(mesh, values, params)
        return result.mesh, result.metric.values
    workers = _pool_size(opts.num_parts)
    for it in range(opts.parallel_iters):
        parts = partition(mesh, opts.num_parts, axis_seed=seed + it)
        subs = [extract(mesh, values, p) for p in parts]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _adapt_part(s, params), subs))
        mesh, values, _ = merge(results)
        if history is not None:
            history.append(
                {
                    "iteration": it,
                    "interface_cells": int(sum(len(p.interface) for p in parts)),
                    "cells": mesh.num_cells,
                    "vertices": mesh.num_vertices,
                }
            )
        log.info("parallel round %d: %d cells", it, mesh.num_cells)
    return mesh, values


def parallel_adapt(
    mesh: SimplicialMesh, metric, opts: AdaptOptions, params: RemeshParams | None = None, seed: int = 0
) -> SimplicialMesh:
    return parallel_adapt_with_metric(mesh, metric, opts, params, seed=seed)[0]
