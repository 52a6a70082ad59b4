"""Time the compiled kernels against the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Both backends
are imported directly, so the comparison does not depend on the
HOTSPOT_META_PURE setting. Each row also checks the two results agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hotspot_meta import _fallback
from hotspot_meta.base_svm import gram_matrix
from hotspot_meta.features import canonical_rects
from hotspot_meta.geom import fragment_layout, generate_layout
from hotspot_meta.oracle import OracleConfig, _local_rects

try:
    from hotspot_meta import _core
except ImportError:  # pragma: no cover - depends on the build
    _core = None


def _cases(seed: int):
    rng = np.random.Generator(np.random.PCG64(seed))
    layout = generate_layout(seed)
    frags = fragment_layout(layout)[:200]
    oc = OracleConfig()
    epe_args = []
    for f in frags:
        rects = _local_rects(layout, *f.center, 12 * oc.sigma)
        epe_args.append((rects, f.center[0], f.center[1], float(f.normal[0]), float(f.normal[1]),
                         oc.sigma, oc.intensity_threshold, oc.scan_steps, oc.sample_step))
    cov_args = [(canonical_rects(layout, f, 1200), 2400, 8) for f in frags]

    X = rng.random((300, 64))
    y = np.where(X[:, :8].sum(axis=1) > 4.0, 1.0, -1.0)
    K = gram_matrix(X, 1.0 / 64)

    A = rng.standard_normal((40, 18))
    Q = A.T @ A / 40 + 2e-3 * np.eye(18)
    c = -rng.random(18)

    sigs = rng.integers(0, 8, size=(60, 64), dtype=np.int32)
    queries = rng.integers(0, 8, size=(2000, 64), dtype=np.int32)
    return {
        "epe_offset (200 fragments)": ("epe_offset", epe_args),
        "coverage_grid (200 windows)": ("coverage_grid", cov_args),
        "smo_solve (300 points)": ("smo_solve", [(K, y, 10.0, 1e-3, 60000, 0)]),
        "qp_coordinate_descent (18 vars)": ("qp_coordinate_descent", [(Q, c, np.ones(18), 1e-8, 10**6)]),
        "pm_match (2000 x 60)": ("pm_match", [(sigs, queries, 1, 4)]),
    }


def _time(fn, arg_list, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = [fn(*a) for a in arg_list]
        best = min(best, time.perf_counter() - t0)
    return best, result


def _same(a, b) -> bool:
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    print(f"{'kernel':34s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}  identical")
    for label, (name, arg_list) in _cases(args.seed).items():
        t_py, r_py = _time(getattr(_fallback, name), arg_list, args.repeat)
        if _core is None:
            print(f"{label:34s} {t_py:10.4f} {'n/a':>10s}")
            continue
        t_c, r_c = _time(getattr(_core, name), arg_list, args.repeat)
        print(f"{label:34s} {t_py:10.4f} {t_c:10.4f} {t_py / t_c:7.1f}x  {_same(r_py, r_c)}")


if __name__ == "__main__":
    main()
