"""Solvers for ``(alpha I - beta Delta_h) w = rhs`` under zero-flux boundaries.

The stationary limit problem uses ``alpha = beta = 1``; the implicit diffusion
stage of the stepper uses ``alpha = 1`` (or ``1 + dt`` for the v-equation,
which also takes its linear decay implicitly) and ``beta = dt``.  Both are
symmetric positive definite M-matrices: nonnegative data gives nonnegative
solutions and ``sum(w) = sum(rhs) / alpha``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grid import GridSpec, laplacian_neumann


class SolverError(RuntimeError):
    """The iterative solve did not reach its tolerance."""


@dataclass
class EllipticSolveStats:
    iterations: int
    residual: float
    wall_time: float


def apply_operator(grid: GridSpec, w: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    return alpha * w - beta * laplacian_neumann(grid, w)


def relative_residual(grid, w, rhs, alpha, beta) -> float:
    nb = float(np.linalg.norm(rhs))
    r = float(np.linalg.norm(apply_operator(grid, w, alpha, beta) - rhs))
    return r / nb if nb > 0 else r


def _tridiagonal(grid: GridSpec, rhs, alpha, beta):
    n = grid.cells[0]
    h = grid.spacing[0]
    c = beta / (h * h)
    ab = np.zeros((3, n))
    ab[0, 1:] = -c
    ab[2, :-1] = -c
    ab[1, :] = alpha + 2.0 * c
    ab[1, 0] = ab[1, -1] = alpha + c
    return solve_banded((1, 1), ab, rhs)


def conjugate_gradient(grid: GridSpec, rhs: np.ndarray, alpha: float, beta: float,
                       tol: float = 1e-10, maxiter: int = 10_000,
                       preconditioner: bool = False):
    """Plain (optionally Jacobi-preconditioned) CG on the stencil operator.

    Starts from ``rhs / alpha``: the initial residual then has zero sum, and
    every later residual stays in the zero-sum subspace because constants are
    an eigenvector of the operator.  The discrete mass is therefore exact up
    to rounding, independently of ``tol``.
    """
    b = np.asarray(rhs, dtype=float)
    bnorm = float(np.linalg.norm(b))
    x = b / alpha
    if bnorm == 0.0:
        return x, 0, 0.0
    if preconditioner:
        diag = alpha + beta * sum(2.0 / (h * h) for h in grid.spacing)
        inv_diag = 1.0 / diag
    r = b - apply_operator(grid, x, alpha, beta)
    z = r * inv_diag if preconditioner else r
    p = z.copy()
    rz = float(np.vdot(r, z))
    rnorm = float(np.linalg.norm(r))
    it = 0
    while rnorm > tol * bnorm:
        if it >= maxiter:
            raise SolverError(f"CG did not converge in {maxiter} iterations "
                              f"(relative residual {rnorm / bnorm:.3e})")
        Ap = apply_operator(grid, p, alpha, beta)
        step = rz / float(np.vdot(p, Ap))
        x += step * p
        r -= step * Ap
        z = r * inv_diag if preconditioner else r
        rz_new = float(np.vdot(r, z))
        p *= rz_new / rz
        p += z
        rz = rz_new
        rnorm = float(np.linalg.norm(r))
        it += 1
    return x, it, rnorm / bnorm


def solve_shifted(grid: GridSpec, rhs: np.ndarray, alpha: float, beta: float,
                  tol: float = 1e-10, maxiter: int = 10_000,
                  preconditioner: bool = False):
    """Solve ``(alpha I - beta Delta_h) w = rhs``; returns ``(w, stats)``."""
    start = time.perf_counter()
    rhs = np.asarray(rhs, dtype=float)
    if grid.dimension == 1:
        w = _tridiagonal(grid, rhs, alpha, beta)
        it = 0
        res = relative_residual(grid, w, rhs, alpha, beta)
    else:
        w, it, res = conjugate_gradient(grid, rhs, alpha, beta, tol, maxiter, preconditioner)
    return w, EllipticSolveStats(it, res, time.perf_counter() - start)


def solve_helmholtz_neumann(grid: GridSpec, rhs: np.ndarray, tol: float = 1e-10,
                            maxiter: int = 10_000, preconditioner: bool = False):
    """Solve ``w - Delta_h w = rhs`` (stationary limit of the attractiveness field)."""
    return solve_shifted(grid, rhs, 1.0, 1.0, tol, maxiter, preconditioner)


def shifted_diffusion_solve(grid: GridSpec, rhs: np.ndarray, dt: float,
                            tol: float = 1e-10, maxiter: int = 10_000,
                            preconditioner: bool = False) -> np.ndarray:
    """One backward-Euler heat step, ``(I - dt Delta_h)^{-1} rhs``."""
    w, _ = solve_shifted(grid, rhs, 1.0, dt, tol, maxiter, preconditioner)
    return w
