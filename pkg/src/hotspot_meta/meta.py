"""Meta-classifier core: quantized weighting functions and their QP calibration.

Each base classifier k gets a weighting function sampled at L_k uniform bins
over [-1, 1]. The meta score of a sample is sum_k x_k * p_k[bin(x_k)], and the
calibration objective (mean squared error against the oracle labels plus a
penalty pulling every weight toward 1) is an exact quadratic in the stacked
weights, assembled here as ``1/2 X'QX + c'X + constant``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class WeightingFunction:
    base_index: int
    levels: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.float64)
        if levels.ndim != 1 or levels.shape[0] < 1:
            raise DataError("a weighting function needs at least one level")
        object.__setattr__(self, "levels", levels)

    @property
    def level_count(self) -> int:
        return self.levels.shape[0]


def unit_weighting(levels_per_base, only: int | None = None) -> list[WeightingFunction]:
    """All levels 1, or (with ``only``) 1 for that base and 0 for the rest."""
    out = []
    for k, L in enumerate(levels_per_base):
        value = 1.0 if only is None or only == k else 0.0
        out.append(WeightingFunction(k, np.full(int(L), value)))
    return out


def quantize_index(x: float, L: int) -> int:
    """1-based uniform bin of x in [-1, 1]; x = +1 falls in bin L."""
    if L < 1:
        raise DataError(f"level count must be at least 1, got {L}")
    if not -1.0 <= x <= 1.0:
        raise DataError(f"base output {x} outside [-1, 1]")
    return min(L, 1 + int(np.floor((x + 1.0) / 2.0 * L)))


def quantize_indices(x, L: int) -> np.ndarray:
    """0-based bins for an array of outputs (vectorized ``quantize_index - 1``)."""
    x = np.asarray(x, dtype=np.float64)
    if L < 1:
        raise DataError(f"level count must be at least 1, got {L}")
    if np.any(~np.isfinite(x)) or np.any(x < -1.0) or np.any(x > 1.0):
        raise DataError("base outputs must be finite and within [-1, 1]")
    return np.minimum(L - 1, np.floor((x + 1.0) / 2.0 * L).astype(np.int64))


def _check_outputs(weighting, outputs) -> np.ndarray:
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    if outputs.shape[1] != len(weighting):
        raise DataError(f"{outputs.shape[1]} base outputs but {len(weighting)} weighting functions")
    return outputs


def meta_scores(weighting, outputs) -> np.ndarray:
    """Weighted sum of base outputs for each row of an (M, N) output matrix."""
    outputs = _check_outputs(weighting, outputs)
    score = np.zeros(outputs.shape[0])
    for k, wf in enumerate(weighting):
        col = outputs[:, k]
        score += col * wf.levels[quantize_indices(col, wf.level_count)]
    return score


def meta_score(weighting, outputs_row) -> float:
    row = np.asarray(outputs_row, dtype=np.float64)
    if row.ndim != 1:
        raise DataError("meta_score takes a single row of base outputs")
    return float(meta_scores(weighting, row[None, :])[0])


def threshold_decide(score: float, theta: float) -> int:
    return 1 if score >= theta else -1


def meta_mse(weighting, outputs, labels) -> float:
    outputs = _check_outputs(weighting, outputs)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape[0] != outputs.shape[0]:
        raise DataError(f"{outputs.shape[0]} output rows but {labels.shape[0]} labels")
    r = meta_scores(weighting, outputs) - labels
    return float(np.mean(r * r))


def pcost(weighting, lambda0: float) -> float:
    if lambda0 < 0:
        raise DataError(f"lambda0 must be non-negative, got {lambda0}")
    return float(lambda0 * sum(float(((wf.levels - 1.0) ** 2).sum()) for wf in weighting))


@dataclass(frozen=True)
class ActivationTable:
    """Sparse activation: sample i of base k sits in bin ``level[i, k]`` with value ``value[i, k]``."""

    level: np.ndarray  # (M, N) 0-based bins
    value: np.ndarray  # (M, N) base outputs
    levels_per_base: tuple[int, ...]

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.levels_per_base)[:-1]]).astype(np.int64)

    def dense(self) -> np.ndarray:
        """(M, L_total) matrix whose (i, flat(k, l)) entry is alpha_k^l(i)."""
        M, N = self.value.shape
        A = np.zeros((M, int(sum(self.levels_per_base))))
        cols = self.level + self.offsets[None, :]
        A[np.arange(M)[:, None], cols] = self.value
        return A


def activation_table(outputs, levels_per_base) -> ActivationTable:
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    levels_per_base = tuple(int(L) for L in levels_per_base)
    if outputs.shape[1] != len(levels_per_base):
        raise DataError(f"{outputs.shape[1]} bases but {len(levels_per_base)} level counts")
    level = np.column_stack([quantize_indices(outputs[:, k], L) for k, L in enumerate(levels_per_base)]) \
        if outputs.shape[0] else np.zeros((0, len(levels_per_base)), dtype=np.int64)
    return ActivationTable(level, outputs.copy(), levels_per_base)


@dataclass(frozen=True)
class QpProblem:
    Q: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    levels_per_base: tuple[int, ...]
    lambda0: float
    constant_term: float
    active: np.ndarray  # bool per flat level: some sample has a nonzero activation

    @property
    def size(self) -> int:
        return self.c.shape[0]

    def offset(self, k: int, l: int) -> int:
        """Flat index of base k, 1-based level l."""
        return int(sum(self.levels_per_base[:k])) + l - 1

    def objective(self, X) -> float:
        X = np.asarray(X, dtype=np.float64)
        return 0.5 * float(X @ (self.Q @ X)) + float(self.c @ X)

    def to_weighting(self, X) -> list[WeightingFunction]:
        return split_levels(X, self.levels_per_base)


def split_levels(X, levels_per_base) -> list[WeightingFunction]:
    X = np.asarray(X, dtype=np.float64)
    out, start = [], 0
    for k, L in enumerate(levels_per_base):
        out.append(WeightingFunction(k, X[start:start + L].copy()))
        start += L
    return out


def flatten_levels(weighting) -> np.ndarray:
    return np.concatenate([wf.levels for wf in weighting])


def qp_assemble(outputs, labels, levels_per_base, lambda0: float) -> QpProblem:
    """Quadratic form of MSE + PCost over the stacked weights.

    Diagonal 2/M sum alpha^2 + 2 lambda0, off-diagonal 2/M sum alpha alpha',
    linear -2/M sum T alpha - 2 lambda0, lower bound 0.
    """
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.float64)
    M = outputs.shape[0]
    if M == 0:
        raise DataError("cannot assemble a QP from an empty dataset")
    if labels.shape[0] != M:
        raise DataError(f"{M} output rows but {labels.shape[0]} labels")
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise DataError("labels must be -1 or +1")
    if lambda0 < 0:
        raise DataError(f"lambda0 must be non-negative, got {lambda0}")
    if any(int(L) < 1 for L in levels_per_base):
        raise DataError("every base needs at least one level")
    table = activation_table(outputs, levels_per_base)
    A = table.dense()
    L_total = A.shape[1]
    Q = (2.0 / M) * (A.T @ A)
    Q = 0.5 * (Q + Q.T)
    Q[np.diag_indices(L_total)] += 2.0 * lambda0
    c = -(2.0 / M) * (A.T @ labels) - 2.0 * lambda0
    constant = float(labels @ labels) / M + lambda0 * L_total
    return QpProblem(
        Q=Q,
        c=c,
        lb=np.zeros(L_total),
        levels_per_base=table.levels_per_base,
        lambda0=float(lambda0),
        constant_term=constant,
        active=np.any(A != 0.0, axis=0),
    )


def noise_mse(ideal, actual, grid) -> float:
    """Sum over bases of the integral of ((f_k(x) - p_k(x)) x)^2, trapezoid rule.

    ``ideal`` and ``actual`` are (N, G) or (G,) samples on the common ``grid``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    f = np.atleast_2d(np.asarray(ideal, dtype=np.float64))
    p = np.atleast_2d(np.asarray(actual, dtype=np.float64))
    if f.shape != p.shape or f.shape[1] != grid.shape[0]:
        raise DataError(f"curve shapes {f.shape}, {p.shape} do not match grid of {grid.shape[0]} points")
    integrand = ((f - p) * grid[None, :]) ** 2
    return float(np.trapezoid(integrand, grid, axis=1).sum())


MODEL_VERSION = "EPICMODEL v1"


@dataclass(frozen=True)
class MetaModel:
    """A calibrated meta-classifier together with the base models it combines.

    Base order is fixed: ANN, SVM, pattern matcher. ``norm`` is applied to raw
    features before the ANN and SVM; the matcher consumes raw features.
    """

    weighting: tuple
    theta: float
    lambda0: float
    ann: object
    svm: object
    pm: object
    norm: object
    version: str = MODEL_VERSION
    prng: str = "PCG64"
    config_json: str = "{}"

    def __post_init__(self):
        object.__setattr__(self, "weighting", tuple(self.weighting))
        if len(self.weighting) != 3:
            raise DataError(f"expected 3 weighting functions, got {len(self.weighting)}")
        if not self.lambda0 >= 0:
            raise DataError(f"lambda0 must be non-negative, got {self.lambda0}")

    @property
    def levels_per_base(self) -> tuple[int, ...]:
        return tuple(wf.level_count for wf in self.weighting)

    def __eq__(self, other):
        if not isinstance(other, MetaModel):
            return NotImplemented
        from .modelio import dumps_model

        return dumps_model(self) == dumps_model(other)

    __hash__ = None


def meta_decide(model: MetaModel, outputs_row) -> int:
    return threshold_decide(meta_score(model.weighting, outputs_row), model.theta)
