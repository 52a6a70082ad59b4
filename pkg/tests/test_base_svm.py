import itertools
import math
import warnings

import numpy as np
import pytest

from hotspot_meta.base_svm import (
    SvmModel,
    dual_objective,
    gram_matrix,
    rbf_kernel,
    rbf_matrix,
    slope_func,
    svm_decide,
    svm_decision,
    svm_raw_score,
    svm_raw_scores,
    svm_train,
)
from hotspot_meta.config import SvmTrainConfig
from hotspot_meta.errors import DataError

EXP_MINUS_1 = 0.36787944117144233


def test_rbf_examples():
    a = np.array([0.0, 0.0])
    b = np.array([1.0, 1.0])
    assert rbf_kernel(a, a, 0.5) == 1.0
    assert rbf_kernel(a, b, 0.5) == pytest.approx(EXP_MINUS_1, abs=1e-5)
    assert rbf_kernel(a, b, 0.3) == rbf_kernel(b, a, 0.3)
    with pytest.raises(DataError):
        rbf_kernel(a, np.zeros(3), 1.0)


def test_kernel_matrices_agree(rng):
    X = rng.random((50, 6))
    K = gram_matrix(X, 0.4)
    R = rbf_matrix(X, X, 0.4)
    np.testing.assert_allclose(K, R, atol=1e-12)
    assert np.all(np.diag(K) == 1.0)
    assert np.all(np.linalg.eigvalsh(K) > -1e-10)


@pytest.mark.parametrize("x, c, out", [(-1, 2, 0), (1, 2, 1), (3, 2, 2)])
def test_slope_func(x, c, out):
    assert slope_func(x, c) == out


def test_two_point_analytic():
    X = np.array([[0.0, 0.0], [1.0, 0.5]])
    y = np.array([1.0, -1.0])
    for gamma in (0.1, 0.7, 2.0):
        for C in (0.5, 10.0):
            m = svm_train(X, y, SvmTrainConfig(c_bound=C, gamma=gamma, kkt_tol=1e-12), keep_all=True)
            k12 = rbf_kernel(X[0], X[1], gamma)
            expected = min(C, 2.0 / (1.0 + 1.0 - 2.0 * k12))
            assert m.alphas[0] == pytest.approx(m.alphas[1], abs=1e-12)
            assert m.alphas[0] == pytest.approx(expected, abs=1e-8)


def test_xor_training_accuracy():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    m = svm_train(X, y, SvmTrainConfig(c_bound=10.0, gamma=1.0))
    assert all(svm_decide(m, v) == lab for v, lab in zip(X, y))


def brute_force_dual(K, y, C):
    """Exact dual minimizer by enumerating the free set of a tiny problem."""
    n = len(y)
    Z = np.outer(y, y) * K
    best = None
    for states in itertools.product((0, 1, 2), repeat=n):  # 0 at zero, 1 free, 2 at C
        free = [i for i in range(n) if states[i] == 1]
        a = np.array([C if s == 2 else 0.0 for s in states])
        if free:
            # KKT on the free set with the equality multiplier b
            F = np.array(free)
            A = np.zeros((len(F) + 1, len(F) + 1))
            A[:-1, :-1] = Z[np.ix_(F, F)]
            A[:-1, -1] = y[F]
            A[-1, :-1] = y[F]
            rhs = np.concatenate([1.0 - Z[F] @ a, [-(y @ a)]])
            try:
                sol = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                continue
            a[F] = sol[:-1]
        if np.any(a < -1e-9) or np.any(a > C + 1e-9) or abs(y @ a) > 1e-7:
            continue
        val = 0.5 * a @ Z @ a - a.sum()
        if best is None or val < best[0] - 1e-12:
            best = (val, a)
    return best


def test_margin_vectors_only_match_brute_force():
    X = np.array([[0.0, 0.0], [0.3, 0.2], [2.0, 2.0], [2.2, 1.9], [-0.5, 0.1], [2.6, 2.4]])
    y = np.array([1.0, 1.0, -1.0, -1.0, 1.0, -1.0])
    C, gamma = 1e6, 0.5
    m = svm_train(X, y, SvmTrainConfig(c_bound=C, gamma=gamma, kkt_tol=1e-9), keep_all=True)
    val, a = brute_force_dual(gram_matrix(X, gamma), y, C)
    assert set(np.flatnonzero(m.alphas > 1e-6)) == set(np.flatnonzero(a > 1e-6))
    assert dual_objective(m.alphas, gram_matrix(X, gamma), y) == pytest.approx(val, rel=1e-6)


def random_feasible(rng, y, C):
    a = rng.uniform(0, C, size=y.shape[0])
    pos, neg = a[y > 0].sum(), a[y < 0].sum()
    if pos > neg:
        a[y > 0] *= neg / pos
    else:
        a[y < 0] *= pos / neg
    return a


def test_optimality_properties(rng):
    for trial in range(3):
        X = rng.normal(size=(80, 4))
        y = np.where(X[:, 0] + 0.5 * rng.normal(size=80) > 0, 1.0, -1.0)
        cfg = SvmTrainConfig(c_bound=2.0, gamma=0.5, seed=trial)
        m = svm_train(X, y, cfg, keep_all=True)
        assert m.converged and m.kkt_residual <= cfg.kkt_tol
        assert np.all((m.alphas >= 0) & (m.alphas <= cfg.c_bound))
        assert abs(m.alphas @ m.labels) <= 1e-8
        K = gram_matrix(X, 0.5)
        best = dual_objective(m.alphas, K, y)
        for _ in range(1000):
            assert best <= dual_objective(random_feasible(rng, y, 2.0), K, y) + 1e-12


def test_all_zero_model_decides_positive():
    m = SvmModel(np.zeros(1), np.ones(1), np.zeros((1, 2)), 0.0, 1.0, 1.0, threshold=0.0)
    assert svm_raw_score(m, np.array([0.3, 0.1])) == 0.0
    assert svm_decide(m, np.array([0.3, 0.1])) == 1


def test_training_points_classified_by_label(rng):
    X = np.vstack([rng.normal(-1, 0.2, (20, 2)), rng.normal(1, 0.2, (20, 2))])
    y = np.array([-1.0] * 20 + [1.0] * 20)
    m = svm_train(X, y)
    assert np.all(np.sign(svm_decision(m, X)) == y)


def test_support_vector_order_invariance(rng):
    X = rng.normal(size=(30, 3))
    y = np.where(X[:, 1] > 0, 1.0, -1.0)
    m = svm_train(X, y)
    perm = rng.permutation(m.alphas.shape[0])
    m2 = SvmModel(m.alphas[perm], m.labels[perm], m.support_vectors[perm], m.bias, m.c_bound, m.gamma)
    Q = rng.normal(size=(10, 3))
    np.testing.assert_allclose(svm_raw_scores(m, Q), svm_raw_scores(m2, Q), atol=1e-12)


def test_deterministic_and_errors(rng):
    X = rng.normal(size=(40, 3))
    y = np.where(X[:, 2] > 0, 1.0, -1.0)
    a, b = svm_train(X, y), svm_train(X, y)
    np.testing.assert_array_equal(a.alphas, b.alphas)
    np.testing.assert_array_equal(a.support_vectors, b.support_vectors)
    assert a.bias == b.bias
    with pytest.raises(DataError):
        svm_train(X, np.ones(40))
    with pytest.raises(DataError):
        svm_train(X, np.where(y > 0, 2.0, -1.0))
    with pytest.raises(DataError):
        svm_decision(svm_train(X, y), np.zeros((2, 5)))


def test_non_convergence_warns(rng):
    X = rng.normal(size=(60, 3))
    y = np.where(X[:, 0] + rng.normal(size=60) > 0, 1.0, -1.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = svm_train(X, y, SvmTrainConfig(max_passes=0, kkt_tol=1e-9))
    assert not m.converged
    assert any("did not converge" in str(w.message) for w in caught)
    assert math.isfinite(m.kkt_residual)
