"""
Gradient and Hessian recovery from P1 fields by Clément interpolation.

Fields are plain arrays of vertex values: ``(n,)`` for scalars, ``(n, d)`` for
vectors.
"""
from __future__ import annotations

import numpy as np

from .meshkit import SimplicialMesh
from .metric import AdaptOptions, MetricField, enforce_spd, gradate, lp_normalize

__all__ = ["cell_gradients", "clement_gradient", "recover_hessian", "hessian_metric"]


# eigenvalue modulus range kept for raw Hessians (units of 1/length^2)
_HESSIAN_FLOOR, _HESSIAN_CEIL = 1e-10, 1e30


def cell_gradients(mesh: SimplicialMesh, u) -> np.ndarray:
    """Constant gradient of the P1 interpolant of ``u`` on each cell, ``(m, d)``."""
    u = np.asarray(u, dtype=float)
    x = mesh.points[mesh.cells]
    jac = x[:, 1:, :] - x[:, :1, :]
    du = u[mesh.cells[:, 1:]] - u[mesh.cells[:, :1]]
    return np.linalg.solve(jac, du[..., None])[..., 0]


def clement_gradient(mesh: SimplicialMesh, u) -> np.ndarray:
    """
    Measure-weighted average of cell gradients over each vertex star.

    :arg u: ``(n,)`` vertex values
    :returns: ``(n, d)`` recovered gradient
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_vertices,):
        raise ValueError(f"expected {mesh.num_vertices} vertex values, got shape {u.shape}")
    grads = cell_gradients(mesh, u)
    weights = mesh.measures
    n = mesh.num_vertices
    flat = mesh.cells.reshape(-1)
    nv = mesh.dim + 1
    wsum = np.bincount(flat, weights=np.repeat(weights, nv), minlength=n)
    empty = np.flatnonzero(wsum <= 0)
    if len(empty):
        raise ValueError(f"vertex {int(empty[0])} has an empty star")
    out = np.empty((n, mesh.dim))
    for i in range(mesh.dim):
        out[:, i] = np.bincount(flat, weights=np.repeat(weights * grads[:, i], nv), minlength=n)
    return out / wsum[:, None]


def recover_hessian(mesh: SimplicialMesh, u) -> MetricField:
    """
    Symmetric (possibly indefinite) Hessian from two Clément recoveries: one of
    the gradient, then one of each gradient component.
    """
    g = clement_gradient(mesh, u)
    h = np.stack([clement_gradient(mesh, g[:, i]) for i in range(mesh.dim)], axis=1)
    h = 0.5 * (h + np.swapaxes(h, 1, 2))
    return MetricField(mesh, h)


def hessian_metric(mesh: SimplicialMesh, u, opts: AdaptOptions, gradation: bool = True) -> MetricField:
    """
    Ready-to-adapt metric: |H| (floored only to stay invertible), L^p normalized
    and bounded, gradated, re-bounded.

    The size bounds act on the normalized metric; applying them to the raw
    Hessian would lift flat regions to ``1/h_max^2`` before normalization and
    erase the scale separation that p = 1 is meant to produce.

    :arg gradation: with ``False`` stop after normalization; gradation only
        shrinks sizes, so it raises the complexity above the target
    """
    hessian = recover_hessian(mesh, u)
    metric = MetricField(mesh, enforce_spd(hessian.values, h_min=_HESSIAN_CEIL**-0.5, h_max=_HESSIAN_FLOOR**-0.5))
    metric = lp_normalize(metric, opts)
    if not gradation:
        return metric
    metric = gradate(metric, opts.gradation_beta)
    return MetricField(mesh, enforce_spd(metric.values, opts))
