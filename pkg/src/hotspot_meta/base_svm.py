"""RBF-kernel C-SVM base classifier trained on its dual.

Dual: minimize 1/2 a'Za - e'a with 0 <= a_i <= C and y'a = 0, where
Z_ij = y_i y_j K(v_i, v_j). The kernel uses a negative exponent,
exp(-gamma * |a - b|^2), which keeps Z positive semi-definite.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .base_ann import f_hid
from .config import SvmTrainConfig
from .errors import DataError
from .features import NormParams

_CHUNK = 64


def rbf_kernel(a, b, gamma: float) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"kernel arguments differ in shape: {a.shape} vs {b.shape}")
    d = a - b
    return math.exp(-gamma * float((d * d).sum()))


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    """Kernel matrix with per-row arithmetic independent of how rows are batched."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DataError(f"feature dimension {A.shape[1]} != {B.shape[1]}")
    out = np.empty((A.shape[0], B.shape[0]))
    for s in range(0, A.shape[0], _CHUNK):
        d = A[s:s + _CHUNK, None, :] - B[None, :, :]
        out[s:s + _CHUNK] = np.exp(-gamma * (d * d).sum(axis=2))
    return out


def gram_matrix(X, gamma: float) -> np.ndarray:
    """Training Gram matrix via the BLAS expansion |a|^2 + |b|^2 - 2a.b."""
    X = np.asarray(X, dtype=np.float64)
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.ascontiguousarray(np.exp(-gamma * d2))


def slope_func(x: float, c_bound: float) -> float:
    if x <= 0:
        return 0.0
    if x >= c_bound:
        return float(c_bound)
    return float(x)


@dataclass(frozen=True)
class SvmModel:
    alphas: np.ndarray
    labels: np.ndarray
    support_vectors: np.ndarray
    bias: float
    c_bound: float
    gamma: float
    threshold: float = 0.0
    norm: NormParams | None = None
    kkt_residual: float = field(default=0.0, compare=False)
    iterations: int = field(default=0, compare=False)
    converged: bool = field(default=True, compare=False)

    @property
    def input_dim(self) -> int:
        return self.support_vectors.shape[1]


def dual_objective(alpha, K, y) -> float:
    ay = np.asarray(alpha) * np.asarray(y)
    return 0.5 * float(ay @ (K @ ay)) - float(np.sum(alpha))


def svm_train(X, y, cfg: SvmTrainConfig | None = None, norm: NormParams | None = None, *, keep_all: bool = False) -> SvmModel:
    """Solve the dual by pairwise coordinate steps until the KKT gap <= kkt_tol.

    ``keep_all`` retains zero-alpha samples in the model (tests use it to
    inspect the full dual vector).
    """
    cfg = cfg or SvmTrainConfig()
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.shape[0]:
        raise DataError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError("SVM training needs both hotspot and non-hotspot samples")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise DataError("SVM labels must be -1 or +1")
    if not (cfg.c_bound > 0 and cfg.kkt_tol > 0):
        raise DataError("c_bound and kkt_tol must be positive")
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / X.shape[1]
    K = gram_matrix(X, gamma)
    n = X.shape[0]
    alpha, grad, iters, residual, converged = kernels.smo_solve(
        K, np.ascontiguousarray(y), float(cfg.c_bound), float(cfg.kkt_tol),
        int(cfg.max_passes) * n, int(cfg.seed) & ((1 << 64) - 1),
    )
    residual = max(float(residual), 0.0)
    if not converged:
        warnings.warn(
            f"SVM dual did not converge within {cfg.max_passes} passes; KKT residual {residual:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    v = -y * grad
    free = (alpha > 0.0) & (alpha < cfg.c_bound)
    if free.any():
        bias = float(v[free].mean())
    else:
        pos = y > 0
        up = np.where(pos, alpha < cfg.c_bound, alpha > 0.0)
        low = np.where(pos, alpha > 0.0, alpha < cfg.c_bound)
        hi = v[up].max() if up.any() else v[low].min()
        lo = v[low].min() if low.any() else hi
        bias = 0.5 * float(hi + lo)
    keep = np.ones(n, dtype=bool) if keep_all else alpha > 0.0
    return SvmModel(
        alphas=alpha[keep].copy(),
        labels=y[keep].copy(),
        support_vectors=X[keep].copy(),
        bias=bias,
        c_bound=float(cfg.c_bound),
        gamma=float(gamma),
        threshold=0.0,
        norm=norm,
        kkt_residual=residual,
        iterations=int(iters),
        converged=bool(converged),
    )


def svm_decision(model: SvmModel, X) -> np.ndarray:
    """sum_i alpha_i y_i K(v, v_i) + bias for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_dim:
        raise DataError(f"feature dimension {X.shape[1]} != SVM dimension {model.input_dim}")
    if model.alphas.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    coef = model.alphas * model.labels
    return (rbf_matrix(X, model.support_vectors, model.gamma) * coef).sum(axis=1) + model.bias


def svm_raw_scores(model: SvmModel, X) -> np.ndarray:
    return f_hid(svm_decision(model, X))


def svm_raw_score(model: SvmModel, v) -> float:
    return float(svm_raw_scores(model, v)[0])


def svm_decide(model: SvmModel, v) -> int:
    return 1 if svm_raw_score(model, v) >= model.threshold else -1
