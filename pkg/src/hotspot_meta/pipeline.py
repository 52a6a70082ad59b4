"""Calibration and prediction flows, threshold selection, and the seeded benchmark.

Calibration trains the three base classifiers, evaluates them on the
calibration samples, fits the quantized weighting functions by QP, and picks
the decision threshold that maximizes Psi on the calibration scores.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from .base_ann import ann_raw_scores, ann_train
from .base_pm import pm_build_library, pm_match_batch
from .base_svm import svm_raw_scores, svm_train
from .config import CalibConfig, RunConfig
from .errors import DataError
from .features import extract_all, fit_norm
from .geom import fragment_layout, generate_layout
from .meta import (
    MetaModel,
    QpProblem,
    WeightingFunction,
    meta_scores,
    qp_assemble,
    split_levels,
    unit_weighting,
)
from .metrics import DetectionReport, compute_report, sweep_tradeoff
from .oracle import label_fragments, simulate_all
from .qp import QpSolution, adjust_lambda0, solve_qp

BASE_NAMES = ("ann", "svm", "pm")
PREDICT_CHUNK = 4096


def base_outputs(model: MetaModel, X_raw) -> np.ndarray:
    """(M, 3) matrix of ANN raw, SVM raw and matcher outputs, all in [-1, 1]."""
    X_raw = np.atleast_2d(np.asarray(X_raw, dtype=np.float64))
    return _outputs(model.ann, model.svm, model.pm, model.norm, X_raw)


def _outputs(ann, svm, pm, norm, X_raw) -> np.ndarray:
    if X_raw.shape[0] == 0:
        return np.zeros((0, 3))
    Z = norm.apply(X_raw)
    return np.column_stack([ann_raw_scores(ann, Z), svm_raw_scores(svm, Z), pm_match_batch(pm, X_raw)])


def select_threshold(scores, labels, psi_alpha: float = 1.0, psi_beta: float = -0.02, grid: int = 512) -> float:
    """Threshold maximizing Psi over score quantiles plus the +/-inf sentinels.

    Ties go to the larger threshold (fewer alarms). Without false-alarm cost
    (psi_beta >= 0) flagging everything is optimal and -inf is returned.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if grid < 2:
        raise DataError(f"threshold grid must have at least 2 points, got {grid}")
    if scores.shape != labels.shape:
        raise DataError(f"{scores.shape[0]} scores but {labels.shape[0]} labels")
    if not np.any(labels > 0):
        warnings.warn("no hotspot labels; threshold set to +inf", RuntimeWarning, stacklevel=2)
        return float("inf")
    if psi_beta >= 0 and psi_alpha >= 0:
        return float("-inf")
    distinct = np.unique(scores)
    if distinct.shape[0] <= grid:
        inner = distinct
    else:
        inner = np.unique(np.quantile(scores, np.linspace(0.0, 1.0, grid), method="inverted_cdf"))
    cands = np.concatenate([[-np.inf], inner, [np.inf]])
    psi = np.array([r.psi for r in sweep_tradeoff(scores, labels, cands, psi_alpha, psi_beta)])
    best = np.flatnonzero(psi == psi.max())
    return float(cands[best[-1]])


@dataclass(frozen=True)
class Calibration:
    """Calibrated model plus the intermediate quantities that produced it.

    ``outputs``/``fit_scores`` are what the QP and threshold saw (cross-fitted
    when ``meta_folds > 1``); ``scores`` are the final model's own scores on
    the calibration samples, which ``predict`` reproduces.
    """

    model: MetaModel
    outputs: np.ndarray
    labels: np.ndarray
    ids: np.ndarray
    fit_scores: np.ndarray
    scores: np.ndarray
    problem: QpProblem
    solution: QpSolution
    lambda0_escalated: bool


def _sorted(ids, X, t=None):
    ids = np.asarray(ids, dtype=np.int64)
    order = np.argsort(ids, kind="stable")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))[order] if len(ids) else np.asarray(X, dtype=np.float64)
    if t is None:
        return ids[order], X
    return ids[order], X, np.asarray(t, dtype=np.float64)[order]


def _train_bases(X_raw, t, cfg: CalibConfig):
    norm = fit_norm(X_raw)
    Z = norm.apply(X_raw)
    ann = ann_train(Z, t, cfg.ann, norm)
    svm = svm_train(Z, t, cfg.svm, norm)
    pm = pm_build_library(X_raw[t > 0], cfg.pm)
    return ann, svm, pm, norm


def fold_assignment(t, folds: int, seed: int) -> np.ndarray:
    """Seeded fold index per sample, dealt round-robin within each class."""
    t = np.asarray(t)
    rng = np.random.Generator(np.random.PCG64(seed))
    fold = np.empty(t.shape[0], dtype=np.int64)
    for cls in (1, -1):
        idx = np.flatnonzero(t == cls)
        fold[idx[rng.permutation(idx.shape[0])]] = np.arange(idx.shape[0]) % folds
    return fold


def cross_fitted_outputs(X_raw, t, cfg: CalibConfig) -> np.ndarray:
    """Base outputs where each sample is scored by bases trained without its fold."""
    fold = fold_assignment(t, cfg.meta_folds, cfg.seed)
    outputs = np.empty((X_raw.shape[0], 3))
    for f in range(cfg.meta_folds):
        held = fold == f
        train = ~held
        if not (np.any(t[train] > 0) and np.any(t[train] < 0)):
            raise DataError(f"fold {f} leaves a single class for training; use fewer meta_folds")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ann, svm, pm, norm = _train_bases(X_raw[train], t[train], cfg)
        outputs[held] = _outputs(ann, svm, pm, norm, X_raw[held])
    return outputs


def calibrate_detailed(ids, X_raw, t, cfg: CalibConfig | None = None, *, config_json: str = "{}",
                       output_hook=None) -> Calibration:
    """Full calibration; ``output_hook(outputs) -> outputs`` lets tests replace base outputs."""
    cfg = cfg or CalibConfig()
    ids, X_raw, t = _sorted(ids, X_raw, t)
    if X_raw.shape[0] < 2 or X_raw.shape[0] != t.shape[0]:
        raise DataError(f"calibration needs at least 2 samples with labels, got {X_raw.shape[0]}")
    if not (np.any(t > 0) and np.any(t < 0)):
        raise DataError("calibration data must contain both hotspots and non-hotspots")
    if len(cfg.levels_per_base) != 3:
        raise DataError("levels_per_base needs one entry per base classifier (3)")
    ann, svm, pm, norm = _train_bases(X_raw, t, cfg)
    if cfg.meta_folds > 1:
        outputs = cross_fitted_outputs(X_raw, t, cfg)
    else:
        outputs = _outputs(ann, svm, pm, norm, X_raw)
    if output_hook is not None:
        outputs = np.asarray(output_hook(outputs), dtype=np.float64)

    ann = dataclasses.replace(ann, threshold=select_threshold(
        outputs[:, 0], t, cfg.psi_alpha, cfg.psi_beta, cfg.theta_grid_size))
    svm = dataclasses.replace(svm, threshold=select_threshold(
        outputs[:, 1], t, cfg.psi_alpha, cfg.psi_beta, cfg.theta_grid_size))

    def assemble(lam):
        return qp_assemble(outputs, t, cfg.levels_per_base, lam)

    problem, lam = adjust_lambda0(assemble, cfg.lambda0_init)
    solution = solve_qp(problem, cfg.qp_tol, cfg.qp_max_iter)
    if solution.status != "optimal":
        warnings.warn(f"QP stopped at max_iter with KKT residual {solution.kkt_residual:.3g}",
                      RuntimeWarning, stacklevel=2)
    x = solution.x.copy()
    if lam == 0.0:
        x[~problem.active] = 1.0
    weighting = split_levels(x, problem.levels_per_base)
    fit_scores = meta_scores(weighting, outputs)
    theta = select_threshold(fit_scores, t, cfg.psi_alpha, cfg.psi_beta, cfg.theta_grid_size)
    model = MetaModel(tuple(weighting), theta, lam, ann, svm, pm, norm, config_json=config_json)
    if output_hook is None and cfg.meta_folds > 1:
        scores = meta_scores(weighting, base_outputs(model, X_raw))
    else:
        scores = fit_scores
    return Calibration(model, outputs, t, ids, fit_scores, scores, problem, solution, lam != cfg.lambda0_init)


def calibrate(ids, X_raw, t, cfg: CalibConfig | None = None, **kwargs) -> MetaModel:
    return calibrate_detailed(ids, X_raw, t, cfg, **kwargs).model


def single_base_model(model: MetaModel, k: int) -> MetaModel:
    """Levels 1 for base k and 0 elsewhere, thresholded at base k's own threshold."""
    theta = (model.ann.threshold, model.svm.threshold, 0.0)[k]
    return dataclasses.replace(model, weighting=tuple(unit_weighting(model.levels_per_base, only=k)), theta=theta)


def static_hybrid_model(model: MetaModel) -> MetaModel:
    """Fixed hybrid flow: top ANN and SVM levels 0.5, matcher hit level 1.0, theta 1.0."""
    L = model.levels_per_base
    ann = np.zeros(L[0])
    ann[-1] = 0.5
    svm = np.zeros(L[1])
    svm[-1] = 0.5
    pm = np.zeros(L[2])
    pm[-1] = 1.0
    weighting = (WeightingFunction(0, ann), WeightingFunction(1, svm), WeightingFunction(2, pm))
    return dataclasses.replace(model, weighting=weighting, theta=1.0)


def base_decisions(model: MetaModel, outputs) -> np.ndarray:
    """(M, 3) +/-1 decisions of each base at its own threshold."""
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    th = np.array([model.ann.threshold, model.svm.threshold, 0.0])
    return np.where(outputs >= th[None, :], 1, -1)


@dataclass(frozen=True)
class Detection:
    fragment_id: int
    t_meta: int
    score: float


def _predict_block(model, ids, X):
    scores = meta_scores(model.weighting, base_outputs(model, X))
    for i, s in zip(ids, scores):
        yield Detection(int(i), 1 if s >= model.theta else -1, float(s))


def predict_stream(model: MetaModel, rows, chunk: int = PREDICT_CHUNK):
    """Score an iterable of ``(fragment_id, features)`` in bounded-size chunks.

    Input ids must be strictly ascending so the output stays ordered.
    """
    dim = model.norm.mean.shape[0]
    ids, block, last = [], [], None
    for fid, vec in rows:
        fid = int(fid)
        if last is not None and fid <= last:
            raise DataError(f"fragment ids must be strictly ascending; {fid} after {last}")
        last = fid
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (dim,):
            raise DataError(f"fragment {fid}: feature dimension {vec.shape[-1] if vec.ndim else 0} != model dimension {dim}")
        ids.append(fid)
        block.append(vec)
        if len(ids) == chunk:
            yield from _predict_block(model, ids, np.vstack(block))
            ids, block = [], []
    if ids:
        yield from _predict_block(model, ids, np.vstack(block))


def predict(model: MetaModel, ids, X_raw, chunk: int = PREDICT_CHUNK) -> list[Detection]:
    ids, X_raw = _sorted(ids, X_raw)
    if ids.shape[0] == 0:
        return []
    return list(predict_stream(model, zip(ids, X_raw), chunk))


def stratified_split(t, fraction: float, seed: int):
    """Seeded per-class split into (calibration, test) index arrays, each sorted."""
    if not 0.0 < fraction < 1.0:
        raise DataError(f"calibration fraction must be in (0, 1), got {fraction}")
    t = np.asarray(t)
    rng = np.random.Generator(np.random.PCG64(seed))
    calib, test = [], []
    for cls in (1, -1):
        idx = np.flatnonzero(t == cls)
        idx = idx[rng.permutation(idx.shape[0])]
        n = int(round(fraction * idx.shape[0]))
        calib.append(idx[:n])
        test.append(idx[n:])
    return np.sort(np.concatenate(calib)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class BenchResult:
    seed: int
    config: RunConfig
    layout: object
    fragments: list
    labels: list
    ids: np.ndarray
    X: np.ndarray
    t: np.ndarray
    calib_idx: np.ndarray
    test_idx: np.ndarray
    calibration: Calibration
    test_outputs: np.ndarray
    test_scores: np.ndarray
    reports: dict  # name -> DetectionReport on the test split
    sweeps: dict  # name -> list of DetectionReport over the test split

    @property
    def model(self) -> MetaModel:
        return self.calibration.model


def sweep_grid(scores, size: int = 64) -> np.ndarray:
    """Ascending theta grid spanning the scores, with sentinels beyond both ends."""
    scores = np.asarray(scores, dtype=np.float64)
    inner = np.unique(np.quantile(scores, np.linspace(0.0, 1.0, size), method="inverted_cdf"))
    return np.concatenate([[-np.inf], inner, [np.inf]])


def run_benchmark(seed: int, cfg: RunConfig | None = None, workers: int = 1) -> BenchResult:
    """Generate, label, extract, split 60/40, calibrate and evaluate on the test split."""
    cfg = cfg or RunConfig()
    layout = generate_layout(seed, cfg.gen)
    fragments = fragment_layout(layout, cfg.features.frag_len)
    epes = simulate_all(layout, fragments, cfg.oracle, workers)
    labels = label_fragments(epes, cfg.oracle, cfg.target_class)
    ids, X = extract_all(layout, fragments, cfg.features.window, cfg.features.grid, workers)
    t = np.array([lab.t_litho for lab in labels], dtype=np.float64)
    calib_idx, test_idx = stratified_split(t, cfg.calib_fraction, seed)
    calibration = calibrate_detailed(ids[calib_idx], X[calib_idx], t[calib_idx], cfg.calib,
                                     config_json=cfg.to_json())
    model = calibration.model
    t_test = t[test_idx]
    outputs = base_outputs(model, X[test_idx])
    scores = meta_scores(model.weighting, outputs)
    a, b = cfg.calib.psi_alpha, cfg.calib.psi_beta
    decisions = base_decisions(model, outputs)
    hybrid = static_hybrid_model(model)
    reports = {"meta": compute_report(np.where(scores >= model.theta, 1, -1), t_test, a, b, model.theta)}
    for k, name in enumerate(BASE_NAMES):
        reports[name] = compute_report(decisions[:, k], t_test, a, b, (model.ann.threshold, model.svm.threshold, 0.0)[k])
    hybrid_scores = meta_scores(hybrid.weighting, outputs)
    reports["static_hybrid"] = compute_report(np.where(hybrid_scores >= hybrid.theta, 1, -1), t_test, a, b, hybrid.theta)
    sweeps = {"meta": sweep_tradeoff(scores, t_test, sweep_grid(scores), a, b)}
    for k, name in enumerate(BASE_NAMES):
        sweeps[name] = sweep_tradeoff(outputs[:, k], t_test, sweep_grid(outputs[:, k]), a, b)
    return BenchResult(seed, cfg, layout, fragments, labels, ids, X, t, calib_idx, test_idx,
                       calibration, outputs, scores, reports, sweeps)


def strictly_dominated(point: DetectionReport, curve) -> bool:
    """True when some curve point has strictly higher accuracy and strictly fewer false alarms."""
    return any(r.accuracy > point.accuracy and r.false_alarm_ratio < point.false_alarm_ratio for r in curve)
