"""The compiled kernels and the pure-Python fallback must agree bit for bit."""

import numpy as np
import pytest

from hotspot_meta import _backend, _fallback
from hotspot_meta.base_svm import gram_matrix
from hotspot_meta.features import canonical_rects
from hotspot_meta.geom import fragment_layout, generate_layout
from hotspot_meta.oracle import OracleConfig, _local_rects

_core = pytest.importorskip("hotspot_meta._core")


def same(a, b):
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def test_compiled_backend_selected():
    assert _backend.BACKEND == "compiled"


@pytest.fixture(scope="module")
def layout_cases():
    lay = generate_layout(3)
    return lay, fragment_layout(lay)[:60]


def test_epe_offset_parity(layout_cases):
    lay, frags = layout_cases
    oc = OracleConfig()
    for f in frags:
        args = (_local_rects(lay, *f.center, 12 * oc.sigma), f.center[0], f.center[1],
                float(f.normal[0]), float(f.normal[1]), oc.sigma, oc.intensity_threshold,
                oc.scan_steps, oc.sample_step)
        assert same(_fallback.epe_offset(*args), _core.epe_offset(*args))


def test_coverage_grid_parity(layout_cases):
    lay, frags = layout_cases
    for f in frags:
        args = (canonical_rects(lay, f, 1200), 2400, 8)
        assert same(_fallback.coverage_grid(*args), _core.coverage_grid(*args))


def test_smo_parity(rng):
    X = rng.random((80, 8))
    y = np.where(X[:, 0] + X[:, 1] > 1.0, 1.0, -1.0)
    K = gram_matrix(X, 0.5)
    for seed in (0, 7):
        assert same(_fallback.smo_solve(K, y, 10.0, 1e-3, 60000, seed), _core.smo_solve(K, y, 10.0, 1e-3, 60000, seed))


def test_qp_parity(rng):
    A = rng.standard_normal((30, 10))
    Q = A.T @ A / 30 + 1e-3 * np.eye(10)
    c = -rng.random(10)
    assert same(_fallback.qp_coordinate_descent(Q, c, np.ones(10), 1e-8, 10**6),
                _core.qp_coordinate_descent(Q, c, np.ones(10), 1e-8, 10**6))


def test_pm_match_parity(rng):
    sigs = rng.integers(0, 8, size=(20, 64), dtype=np.int32)
    queries = rng.integers(0, 8, size=(200, 64), dtype=np.int32)
    queries[:5] = sigs[:5]
    assert same(_fallback.pm_match(sigs, queries, 1, 4), _core.pm_match(sigs, queries, 1, 4))
