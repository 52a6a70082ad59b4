"""Lower-bounded convex QP: positive-definiteness check, penalty escalation, solver.

The calibration problem is ``min 1/2 x'Qx + c'x`` subject to ``x >= 0``. When
Q is positive definite it has a unique global minimizer, found here by
projected coordinate descent (exact minimization along one coordinate,
clamped at zero, sweeping indices in ascending order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import DataError, NumericError
from .meta import QpProblem

MAX_DOUBLINGS = 60
LAMBDA0_FLOOR = 1e-6


@dataclass(frozen=True)
class PdResult:
    positive_definite: bool
    witness: int | None = None  # first pivot index that failed

    def __bool__(self) -> bool:
        return self.positive_definite


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str  # "optimal" or "max_iter"
    history: tuple = field(default=(), compare=False, repr=False)


def check_pd(Q, rel_tol: float = 1e-12) -> PdResult:
    """Cholesky factorization with pivot tolerance ``rel_tol * max|Q_ii|``."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DataError(f"check_pd needs a square matrix, got shape {Q.shape}")
    n = Q.shape[0]
    if n == 0:
        return PdResult(True)
    scale = float(np.max(np.abs(Q)))
    if np.max(np.abs(Q - Q.T)) > 1e-12 * max(scale, 1.0):
        raise DataError("check_pd needs a symmetric matrix")
    pivot_tol = rel_tol * float(np.max(np.abs(np.diag(Q))))
    L = np.zeros_like(Q)
    for j in range(n):
        d = Q[j, j] - float(L[j, :j] @ L[j, :j])
        if not d > pivot_tol:
            return PdResult(False, j)
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (Q[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return PdResult(True)


def adjust_lambda0(assemble_fn, lambda0_init: float) -> tuple[QpProblem, float]:
    """Reassemble with lambda0 <- max(2 lambda0, 1e-6) until Q is positive definite.

    ``assemble_fn(lambda0)`` must return a QpProblem. Raises NumericError after
    60 doublings, which means the calibration data is degenerate.
    """
    if not lambda0_init >= 0:
        raise DataError(f"lambda0 must be non-negative, got {lambda0_init}")
    lam = float(lambda0_init)
    problem = assemble_fn(lam)
    for _ in range(MAX_DOUBLINGS):
        if check_pd(problem.Q):
            return problem, lam
        lam = max(2.0 * lam, LAMBDA0_FLOOR)
        problem = assemble_fn(lam)
    if check_pd(problem.Q):
        return problem, lam
    raise NumericError(
        f"Q is not positive definite after {MAX_DOUBLINGS} lambda0 doublings (lambda0={lam:g}); "
        "increase calibration data volume, improve feature quality, or precondition the matrix"
    )


def kkt_residual(Q, c, x) -> float:
    g = np.asarray(Q) @ x + c
    viol = np.where(x > 0.0, np.abs(g), np.maximum(0.0, -g))
    return float(viol.max()) if viol.size else 0.0


def solve_box_qp(Q, c, tol: float = 1e-8, max_iter: int = 10**6, x0=None) -> QpSolution:
    """Projected coordinate descent for ``min 1/2 x'Qx + c'x, x >= 0``."""
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    n = c.shape[0]
    if Q.shape != (n, n):
        raise DataError(f"Q shape {Q.shape} does not match c length {n}")
    if not tol > 0:
        raise DataError(f"tol must be positive, got {tol}")
    if n and not np.all(np.diag(Q) > 0.0):
        raise DataError("Q must have a positive diagonal; run adjust_lambda0 first")
    x0 = np.ones(n) if x0 is None else np.ascontiguousarray(x0, dtype=np.float64)
    x, steps, residual, converged, history = kernels.qp_coordinate_descent(Q, c, x0, float(tol), int(max_iter))
    x = np.asarray(x, dtype=np.float64)
    objective = 0.5 * float(x @ (Q @ x)) + float(c @ x)
    return QpSolution(
        x=x,
        objective=objective,
        kkt_residual=float(residual),
        iterations=int(steps),
        status="optimal" if converged else "max_iter",
        history=tuple(float(h) for h in history),
    )


def solve_qp(problem: QpProblem, tol: float = 1e-8, max_iter: int = 10**6) -> QpSolution:
    return solve_box_qp(problem.Q, problem.c, tol, max_iter)
