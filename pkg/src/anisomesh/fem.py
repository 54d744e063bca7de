"""
P1 Lagrange finite elements for the Dirichlet Poisson problem ``Δu = f``.

The weak form ``-∫∇u·∇v = ∫ f v`` is assembled as the SPD system ``K u = -F``
and solved with conjugate gradients preconditioned by symmetric SOR.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular
from scipy.special import roots_jacobi

from .meshkit import SimplicialMesh

__all__ = [
    "ConvergenceError",
    "LinearSystem",
    "PoissonProblem",
    "assemble",
    "cg_solve",
    "l2_error",
    "manufactured_interface",
    "manufactured_quadratic",
    "pcg",
    "quadrature_rule",
    "solve_poisson",
    "ssor_preconditioner",
]


class ConvergenceError(RuntimeError):
    def __init__(self, message, iterations, residual):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass
class PoissonProblem:
    """``Δu = f`` in the unit box, ``u = g`` on its boundary."""

    dim: int
    forcing: Callable[[np.ndarray], np.ndarray]
    boundary: Callable[[np.ndarray], np.ndarray]
    exact: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "custom"

    def laplacian_residual(self, points, step=1e-5):
        """
        Compare a central-difference Laplacian of the exact solution with the
        forcing at ``points``; returns ``|fd - f| / max(|f|, 1)``.
        """
        if self.exact is None:
            raise ValueError("problem has no exact solution")
        points = np.atleast_2d(np.asarray(points, dtype=float))
        centre = self.exact(points)
        lap = np.zeros(len(points))
        for i in range(self.dim):
            shift = np.zeros(self.dim)
            shift[i] = step
            lap += self.exact(points + shift) - 2.0 * centre + self.exact(points - shift)
        lap /= step**2
        f = self.forcing(points)
        return np.abs(lap - f) / np.maximum(np.abs(f), 1.0)


def manufactured_quadratic(dim: int) -> PoissonProblem:
    """``u = (2/3) x·x`` with constant forcing ``4d/3``."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")

    def exact(x):
        x = np.asarray(x, dtype=float)
        return (2.0 / 3.0) * np.einsum("...i,...i->...", x, x)

    def forcing(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], 4.0 * dim / 3.0)

    return PoissonProblem(dim, forcing, exact, exact, "quadratic")


def manufactured_interface(dim: int, alpha: float = 500.0, r: float = 0.15, x0=None) -> PoissonProblem:
    """Smoothed indicator ``tanh(alpha (r^2 - |x - x0|^2))`` of a ball."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if not (alpha > 0 and r > 0):
        raise ValueError("alpha and r must be positive")
    centre = np.full(dim, 0.5) if x0 is None else np.asarray(x0, dtype=float)

    def _rho2(x):
        dx = np.asarray(x, dtype=float) - centre
        return np.einsum("...i,...i->...", dx, dx)

    def exact(x):
        return np.tanh(alpha * (r * r - _rho2(x)))

    def forcing(x):
        rho2 = _rho2(x)
        u = np.tanh(alpha * (r * r - rho2))
        return 2.0 * alpha * (u * u - 1.0) * (4.0 * alpha * rho2 * u + dim)

    return PoissonProblem(dim, forcing, exact, exact, "interface")


_TRI_A1, _TRI_W1 = 0.445948490915965, 0.223381589678011
_TRI_A2, _TRI_W2 = 0.091576213509771, 0.109951743655322


def _triangle_rule():
    bary = []
    weights = []
    for a, w in ((_TRI_A1, _TRI_W1), (_TRI_A2, _TRI_W2)):
        b = 1.0 - 2.0 * a
        bary += [(b, a, a), (a, b, a), (a, a, b)]
        weights += [w] * 3
    return np.array(bary), np.array(weights)


def _gauss_jacobi_01(n, power):
    # nodes/weights on [0, 1] for weight (1 - t)^power
    x, w = roots_jacobi(n, power, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (power + 1)


def _tetra_rule(n=3):
    a, wa = _gauss_jacobi_01(n, 0)
    b, wb = _gauss_jacobi_01(n, 1)
    c, wc = _gauss_jacobi_01(n, 2)
    pts, wts = [], []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                z = c[k]
                y = b[j] * (1.0 - z)
                x = a[i] * (1.0 - b[j]) * (1.0 - z)
                pts.append((1.0 - x - y - z, x, y, z))
                wts.append(wa[i] * wb[j] * wc[k])
    wts = np.array(wts)
    return np.array(pts), wts / wts.sum()


def quadrature_rule(dim: int):
    """
    Degree-4 rule on the reference simplex as (barycentric points, weights), with
    weights summing to one.  Triangles use the 6-point symmetric rule; tetrahedra a
    27-point collapsed Gauss-Jacobi product rule.
    """
    if dim == 2:
        return _triangle_rule()
    if dim == 3:
        return _tetra_rule()
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def _basis_gradients(mesh: SimplicialMesh):
    x = mesh.points[mesh.cells]
    jac = x[:, 1:, :] - x[:, :1, :]
    dets = mesh.measures
    if np.any(dets <= 0):
        bad = int(np.flatnonzero(dets <= 0)[0])
        raise ValueError(f"cell {bad} is degenerate or inverted")
    inv = np.linalg.inv(jac)
    # gradient of barycentric coordinate i (i >= 1) is column i-1 of inv(jac)
    g = np.swapaxes(inv, 1, 2)
    g0 = -g.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g], axis=1)


@dataclass
class LinearSystem:
    """Reduced system on the free vertices after Dirichlet elimination."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    num_vertices: int
    full_matrix: sp.csr_matrix
    full_rhs: np.ndarray

    def expand(self, free_values) -> np.ndarray:
        u = np.empty(self.num_vertices)
        u[self.free] = free_values
        u[self.fixed] = self.fixed_values
        return u


def assemble(mesh: SimplicialMesh, problem: PoissonProblem) -> LinearSystem:
    n = mesh.num_vertices
    nv = mesh.dim + 1
    grads = _basis_gradients(mesh)
    vol = mesh.measures
    local = np.einsum("kid,kjd->kij", grads, grads) * vol[:, None, None]
    rows = np.repeat(mesh.cells, nv, axis=1).reshape(-1)
    cols = np.tile(mesh.cells, (1, nv)).reshape(-1)
    stiffness = sp.csr_matrix((local.reshape(-1), (rows, cols)), shape=(n, n))
    stiffness.sum_duplicates()

    bary, weights = quadrature_rule(mesh.dim)
    xq = np.einsum("qi,kid->kqd", bary, mesh.points[mesh.cells])
    fq = problem.forcing(xq)
    load_local = -np.einsum("kq,q,qi->ki", fq, weights, bary) * vol[:, None]
    load = np.bincount(mesh.cells.reshape(-1), weights=load_local.reshape(-1), minlength=n)

    fixed = np.flatnonzero(mesh.boundary_vertices)
    free = np.flatnonzero(~mesh.boundary_vertices)
    g = problem.boundary(mesh.points[fixed])
    a_ff = stiffness[free][:, free].tocsr()
    a_fb = stiffness[free][:, fixed].tocsr()
    rhs = load[free] - a_fb @ g
    return LinearSystem(a_ff, rhs, free, fixed, g, n, stiffness, load)


def ssor_preconditioner(matrix, omega: float = 1.5):
    """Return ``z = apply(r)`` for the symmetric SOR preconditioner of ``matrix``."""
    if not 0 < omega < 2:
        raise ValueError(f"SSOR relaxation must lie in (0, 2), got {omega}")
    matrix = sp.csr_matrix(matrix)
    diag = matrix.diagonal()
    if np.any(diag <= 0):
        raise ValueError("SSOR needs a positive diagonal")
    lower = (sp.tril(matrix, k=-1) * omega + sp.diags(diag)).tocsr()
    upper = (sp.triu(matrix, k=1) * omega + sp.diags(diag)).tocsr()
    scale = omega * (2.0 - omega)

    def apply(r):
        y = spsolve_triangular(lower, r, lower=True)
        return scale * spsolve_triangular(upper, diag * y, lower=False)

    return apply


def pcg(matrix, b, tol=1e-10, max_iter=None, precondition=None, x0=None):
    """
    Preconditioned conjugate gradients.

    :returns: ``(x, iterations, relative_residual)``
    :raises ConvergenceError: when ``max_iter`` iterations do not reach ``tol``
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    if max_iter is None:
        max_iter = 10 * max(n, 1)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    r = b - matrix @ x
    res = np.linalg.norm(r) / bnorm
    if res <= tol:
        return x, 0, res
    apply = precondition if precondition is not None else (lambda v: v)
    z = apply(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        ap = matrix @ p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, it, res
        z = apply(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations (relative residual {res:.3e})",
        max_iter,
        res,
    )


def cg_solve(system: LinearSystem, tol: float = 1e-10, max_iter: int | None = None, omega: float = 1.5):
    """Solve the reduced system with SSOR-preconditioned CG; returns vertex values."""
    if len(system.free) == 0:
        return system.expand(np.zeros(0))
    precond = ssor_preconditioner(system.matrix, omega)
    x, _, _ = pcg(system.matrix, system.rhs, tol, max_iter, precond)
    return system.expand(x)


def solve_poisson(mesh: SimplicialMesh, problem: PoissonProblem, tol: float = 1e-10) -> np.ndarray:
    return cg_solve(assemble(mesh, problem), tol=tol)


def l2_error(mesh: SimplicialMesh, u_h, u_exact) -> float:
    """L2 norm of ``u_h - u_exact`` by degree-4 quadrature on every cell."""
    u_h = np.asarray(u_h, dtype=float)
    bary, weights = quadrature_rule(mesh.dim)
    xq = np.einsum("qi,kid->kqd", bary, mesh.points[mesh.cells])
    uq = np.einsum("qi,ki->kq", bary, u_h[mesh.cells])
    diff = uq - u_exact(xq)
    total = np.sum(np.abs(mesh.measures) * ((diff * diff) @ weights))
    return math.sqrt(total)
