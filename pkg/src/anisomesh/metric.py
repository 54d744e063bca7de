"""
Riemannian metric algebra for two- and three-dimensional simplicial meshes.

Metric tensors are handled as symmetric ``(d, d)`` arrays and every operation
broadcasts over leading batch dimensions, so a P1 metric field is simply an
``(n, d, d)`` array of vertex values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .meshkit import SimplicialMesh

__all__ = [
    "AdaptOptions",
    "MetricField",
    "complexity",
    "edge_length",
    "eigendecompose",
    "enforce_spd",
    "gradate",
    "gradate_values",
    "intersect",
    "lp_normalize",
    "pack_lower",
    "uniform_metric",
    "unpack_lower",
]


@dataclass(frozen=True)
class AdaptOptions:
    """
    Parameters of the adaptation pipeline.

    ``p`` may be ``math.inf`` to select the uniform (L-infinity) normalization.
    ``a_max`` of ``None`` disables the anisotropy bound.
    """

    target_complexity: float = 1000.0
    p: float = 1.0
    h_min: float = 1.0e-08
    h_max: float = 0.5
    a_max: float | None = None
    gradation_beta: float = 1.3
    fixed_point_iters: int = 3
    parallel_iters: int = 3
    num_parts: int = 1
    degree: int = 1

    def __post_init__(self):
        if not self.target_complexity > 0:
            raise ValueError(f"target complexity must be positive, got {self.target_complexity}")
        if not (self.p == math.inf or (self.p >= 1 and float(self.p).is_integer())):
            raise ValueError(f"p must be a positive integer or inf, got {self.p}")
        if not 0 < self.h_min < self.h_max:
            raise ValueError(f"need 0 < h_min < h_max, got {self.h_min}, {self.h_max}")
        if self.a_max is not None and self.a_max < 1:
            raise ValueError(f"a_max must be at least 1, got {self.a_max}")
        if not self.gradation_beta > 1:
            raise ValueError(f"gradation factor must exceed 1, got {self.gradation_beta}")
        for name in ("fixed_point_iters", "parallel_iters", "num_parts"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.degree != 1:
            raise ValueError("only degree 1 (P1) is supported")

    def replace(self, **changes) -> AdaptOptions:
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "target_complexity": self.target_complexity,
            "p": "inf" if self.p == math.inf else self.p,
            "h_min": self.h_min,
            "h_max": self.h_max,
            "a_max": self.a_max,
            "gradation_beta": self.gradation_beta,
            "fixed_point_iters": self.fixed_point_iters,
            "parallel_iters": self.parallel_iters,
            "num_parts": self.num_parts,
            "degree": self.degree,
        }


@dataclass(eq=False)
class MetricField:
    """P1 tensor field: one symmetric matrix per mesh vertex."""

    mesh: SimplicialMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n, d = self.mesh.num_vertices, self.mesh.dim
        if self.values.shape != (n, d, d):
            raise ValueError(
                f"metric values must have shape ({n}, {d}, {d}), got {self.values.shape}"
            )

    @property
    def dim(self) -> int:
        return self.mesh.dim

    def __len__(self):
        return len(self.values)

    def copy(self) -> MetricField:
        return MetricField(self.mesh, self.values.copy())


def pack_lower(m):
    """Lower triangle in row-major order: (m11, m21, m22[, m31, m32, m33])."""
    m = np.asarray(m, dtype=float)
    rows, cols = np.tril_indices(m.shape[-1])
    return m[..., rows, cols]


def unpack_lower(packed, dim=None):
    packed = np.asarray(packed, dtype=float)
    if dim is None:
        dim = {3: 2, 6: 3}[packed.shape[-1]]
    out = np.zeros(packed.shape[:-1] + (dim, dim))
    rows, cols = np.tril_indices(dim)
    out[..., rows, cols] = packed
    out[..., cols, rows] = packed
    return out


def uniform_metric(dim: int, h: float) -> np.ndarray:
    """Isotropic metric prescribing edge length ``h`` in every direction."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    return np.eye(dim) / h**2


def _eig2(m):
    a, b, c = m[..., 0, 0], 0.5 * (m[..., 1, 0] + m[..., 0, 1]), m[..., 1, 1]
    theta = 0.5 * np.arctan2(2.0 * b, a - c)
    cs, sn = np.cos(theta), np.sin(theta)
    lam1 = a * cs * cs + 2.0 * b * cs * sn + c * sn * sn
    lam2 = a * sn * sn - 2.0 * b * cs * sn + c * cs * cs
    w = np.stack([lam1, lam2], axis=-1)
    v = np.empty(m.shape)
    v[..., 0, 0], v[..., 1, 0] = cs, sn
    v[..., 0, 1], v[..., 1, 1] = -sn, cs
    return w, v


def _jacobi(m, tol=1e-12, max_sweeps=50):
    """Cyclic Jacobi rotations for a batch of symmetric matrices."""
    shape = m.shape
    d = shape[-1]
    a = np.array(m, dtype=float).reshape(-1, d, d)
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    k = len(a)
    v = np.broadcast_to(np.eye(d), (k, d, d)).copy()
    scale = np.sqrt(np.einsum("kij,kij->k", a, a))
    scale = np.where(scale > 0, scale, 1.0)
    pairs = [(p, q) for p in range(d) for q in range(p + 1, d)]
    rows = np.arange(k)
    for _ in range(max_sweeps):
        off = np.sqrt(sum(2.0 * a[:, p, q] ** 2 for p, q in pairs))
        if np.all(off <= tol * scale):
            break
        for p, q in pairs:
            apq = a[:, p, q]
            active = np.abs(apq) > 1e-300
            safe = np.where(active, apq, 1.0)
            theta = (a[:, q, q] - a[:, p, p]) / (2.0 * safe)
            sign = np.where(theta >= 0, 1.0, -1.0)
            t = sign / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            j = np.broadcast_to(np.eye(d), (k, d, d)).copy()
            j[rows, p, p] = c
            j[rows, q, q] = c
            j[rows, p, q] = s
            j[rows, q, p] = -s
            a = np.swapaxes(j, -1, -2) @ a @ j
            v = v @ j
    w = np.diagonal(a, axis1=-2, axis2=-1).copy()
    return w.reshape(shape[:-1]), v.reshape(shape)


def eigendecompose(m):
    """
    Eigenvalues (descending) and orthonormal eigenvectors (as columns) of
    symmetric 2x2 or 3x3 matrices, batched over leading axes.
    """
    m = np.asarray(m, dtype=float)
    if m.shape[-2:] == (2, 2):
        w, v = _eig2(m)
    elif m.shape[-2:] == (3, 3):
        w, v = _jacobi(m)
    else:
        raise ValueError(f"expected 2x2 or 3x3 matrices, got shape {m.shape}")
    order = np.argsort(-w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, np.broadcast_to(order[..., None, :], v.shape), axis=-1)
    return w, v


def _assemble(w, v):
    return np.einsum("...ik,...k,...jk->...ij", v, w, v)


def _bounds(opts, h_min, h_max, a_max):
    if opts is not None:
        h_min = opts.h_min if h_min is None else h_min
        h_max = opts.h_max if h_max is None else h_max
        a_max = opts.a_max if a_max is None else a_max
    h_min = 1e-30 if h_min is None else h_min
    h_max = 1e30 if h_max is None else h_max
    return h_min, h_max, a_max


def enforce_spd(h, opts: AdaptOptions | None = None, *, h_min=None, h_max=None, a_max=None):
    """
    Turn a symmetric (possibly indefinite) matrix into a metric: eigenvalues are
    replaced by their moduli, clamped to ``[1/h_max^2, 1/h_min^2]`` and, if
    ``a_max`` is set, small ones are raised until the anisotropy ratio is at most
    ``a_max``.
    """
    h_min, h_max, a_max = _bounds(opts, h_min, h_max, a_max)
    w, v = eigendecompose(h)
    w = np.clip(np.abs(w), 1.0 / h_max**2, 1.0 / h_min**2)
    if a_max is not None:
        floor = w.max(axis=-1, keepdims=True) / a_max**2
        w = np.maximum(w, floor)
    return _assemble(w, v)


def _check_spd(m, name):
    w, _ = eigendecompose(m)
    if not np.all(w > 0):
        raise ValueError(f"{name} is not symmetric positive-definite")


def _intersect(m1, m2):
    w1, v1 = eigendecompose(m1)
    root = np.sqrt(w1)
    s = _assemble(root, v1)
    s_inv = _assemble(1.0 / root, v1)
    p = s_inv @ m2 @ s_inv
    p = 0.5 * (p + np.swapaxes(p, -1, -2))
    mu, q = eigendecompose(p)
    inner = _assemble(np.maximum(mu, 1.0), q)
    out = s @ inner @ s
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def intersect(m1, m2):
    """
    Intersection of two metrics by simultaneous reduction: the result's unit ball
    is the largest ellipsoid contained in both input unit balls.
    """
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    if m1.shape[-2:] != m2.shape[-2:]:
        raise ValueError(f"dimension mismatch: {m1.shape[-2:]} vs {m2.shape[-2:]}")
    _check_spd(m1, "first metric")
    _check_spd(m2, "second metric")
    return _intersect(m1, m2)


def edge_length(mu, mv, e):
    """
    Metric length of the segment ``e`` joining two vertices with metrics ``mu``
    and ``mv``, assuming the metric varies linearly along it.
    """
    e = np.asarray(e, dtype=float)
    l0 = np.sqrt(np.einsum("...i,...ij,...j->...", e, np.asarray(mu, float), e))
    l1 = np.sqrt(np.einsum("...i,...ij,...j->...", e, np.asarray(mv, float), e))
    close = np.abs(l0 - l1) <= 1e-12 * l0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(close, 1.0, l0 / np.where(l1 > 0, l1, 1.0))
        general = (l0 - l1) / np.log(ratio)
    out = np.where(close, l0, general)
    if out.ndim == 0:
        return float(out)
    return out


def _vertex_average(mesh: SimplicialMesh, vertex_values):
    cells = mesh.cells
    if len(cells) == 0:
        return 0.0
    return float(np.sum(mesh.measures * vertex_values[cells].mean(axis=1)))


def complexity(field: MetricField) -> float:
    """Sum over cells of cell measure times the vertex-averaged sqrt(det M)."""
    det = np.linalg.det(field.values)
    return _vertex_average(field.mesh, np.sqrt(np.maximum(det, 0.0)))


def lp_normalize(field: MetricField, opts: AdaptOptions, clamp: bool = True) -> MetricField:
    """
    Global L^p normalization towards target complexity ``opts.target_complexity``.

    With ``clamp=False`` the raw normalized field is returned, whose complexity
    equals the target up to quadrature error.
    """
    d = field.dim
    w, _ = eigendecompose(field.values)
    if not np.all(w > 0):
        bad = np.flatnonzero(~np.all(w > 0, axis=-1))
        raise ValueError(f"metric is not SPD at {len(bad)} vertices, first {bad[:5].tolist()}")
    det = np.prod(w, axis=-1)
    p = opts.p
    if p == math.inf:
        e_int, e_pt = 0.5, 0.0
    else:
        e_int, e_pt = p / (2 * p + d), -1.0 / (2 * p + d)
    integral = _vertex_average(field.mesh, det**e_int)
    scale = opts.target_complexity ** (2.0 / d) * integral ** (-2.0 / d) * det**e_pt
    values = scale[:, None, None] * field.values
    if clamp:
        values = enforce_spd(values, opts)
    return MetricField(field.mesh, values)


def gradate_values(points, edges, values, beta, max_sweeps=20, rtol=1e-3):
    """
    Limit the growth of prescribed sizes along ``edges`` to the factor ``beta``
    per unit metric length.

    Each sweep grows every endpoint metric along its edge and intersects it into
    the opposite endpoint.  Updates are applied in fixed batches (each batch
    touches a vertex at most once), so the result is deterministic.

    :returns: ``(values, sweeps)``
    """
    if not beta > 1:
        raise ValueError(f"gradation factor must exceed 1, got {beta}")
    values = np.array(values, dtype=float)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return values, 0
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    vec = points[dst] - points[src]
    order = np.argsort(dst, kind="stable")
    dst_sorted = dst[order]
    starts = np.flatnonzero(np.r_[True, dst_sorted[1:] != dst_sorted[:-1]])
    group_start = np.repeat(starts, np.diff(np.r_[starts, len(order)]))
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order)) - group_start
    batches = [np.flatnonzero(rank == r) for r in range(int(rank.max()) + 1)]
    log_beta = math.log(beta)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        old = values.copy()
        ell = np.sqrt(np.einsum("ki,kij,kj->k", vec, old[src], vec))
        grown = old[src] / ((1.0 + ell * log_beta) ** 2)[:, None, None]
        for batch in batches:
            targets = dst[batch]
            values[targets] = _intersect(values[targets], grown[batch])
        num = np.sqrt(np.einsum("kij,kij->k", values - old, values - old))
        den = np.sqrt(np.einsum("kij,kij->k", old, old))
        if np.max(num / den) < rtol:
            break
    return values, sweeps


def gradate(field: MetricField, beta: float, max_sweeps: int = 20, rtol: float = 1e-3) -> MetricField:
    mesh = field.mesh
    values, _ = gradate_values(mesh.points, mesh.edges, field.values, beta, max_sweeps, rtol)
    return MetricField(mesh, values)
