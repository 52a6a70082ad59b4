"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest -v -s tests/test_acceptance.py`` (or as part of the
full suite). The end-to-end criteria share one module-scoped set of ten
seeded benchmark runs; they take a few minutes on a single core.
"""

from __future__ import annotations

import filecmp
import os
import time
import warnings

import numpy as np
import pytest

from hotspot_meta import cli
from hotspot_meta.base_ann import AnnModel, ann_forward, ann_gradients
from hotspot_meta.base_svm import dual_objective, gram_matrix, rbf_kernel, svm_train
from hotspot_meta.config import RunConfig, SvmTrainConfig
from hotspot_meta.meta import meta_mse, pcost, qp_assemble, split_levels, unit_weighting
from hotspot_meta.metrics import compute_report
from hotspot_meta.pipeline import (
    base_decisions,
    base_outputs,
    predict,
    run_benchmark,
    single_base_model,
    strictly_dominated,
)
from hotspot_meta.qp import adjust_lambda0, check_pd, solve_box_qp

BENCH_SEEDS = tuple(range(10))
REFERENCE_SEEDS = (0, 1, 2)


def verdict(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {number}: {detail}"


def qp_instances(count=100, seed=20240601):
    """Seeded random calibration-shaped QP instances."""
    r = np.random.Generator(np.random.PCG64(seed))
    for _ in range(count):
        N = int(r.integers(1, 4))
        L = [int(v) for v in r.integers(1, 9, size=N)]
        M = int(r.integers(1, 201))
        X = r.uniform(-1, 1, (M, N))
        X[r.random((M, N)) < 0.05] = 1.0
        T = r.choice([-1.0, 1.0], M)
        lam = float(r.choice([0.0, 0.1, 1.0]))
        yield r, X, T, L, lam


def random_pd(r, n, shift):
    A = r.normal(size=(n, n))
    return A @ A.T + shift * np.eye(n)


@pytest.fixture(scope="module")
def benches():
    workers = max(1, min(4, os.cpu_count() or 1))
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        runs = [run_benchmark(seed, RunConfig(), workers) for seed in BENCH_SEEDS]
    return runs, time.perf_counter() - start, workers


def test_criterion_01_objective_identity(capsys):
    start = time.perf_counter()
    worst = 0.0
    for r, X, T, L, lam in qp_instances():
        prob = qp_assemble(X, T, L, lam)
        for _ in range(20):
            Xw = r.uniform(0.0, 3.0, prob.size)
            w = split_levels(Xw, L)
            want = meta_mse(w, X, T) + pcost(w, lam)
            got = prob.objective(Xw) + prob.constant_term
            worst = max(worst, abs(got - want) / (1.0 + abs(want)))
    elapsed = time.perf_counter() - start
    verdict(capsys, 1, worst <= 1e-9 and elapsed < 5.0,
            f"max scaled identity error {worst:.2e} (tol 1e-9), {elapsed:.2f}s (limit 5s)")


def test_criterion_02_positive_definiteness(capsys):
    failures = 0
    escalated = 0
    for _, X, T, L, lam in qp_instances():
        prob, final = adjust_lambda0(lambda l: qp_assemble(X, T, L, l), lam)
        failures += not check_pd(prob.Q)
        escalated += final != lam
    # rank-deficient extras: duplicated samples leave most levels unobserved
    r = np.random.Generator(np.random.PCG64(2))
    for _ in range(10):
        X = np.tile(r.uniform(-1, 1, (1, 3)), (int(r.integers(2, 30)), 1))
        T = r.choice([-1.0, 1.0], X.shape[0])
        prob, final = adjust_lambda0(lambda l: qp_assemble(X, T, [8, 8, 2], l), 0.0)
        failures += not check_pd(prob.Q)
        escalated += final != 0.0
    ladder = np.concatenate([[0.0], np.logspace(-8, 1, 19)])
    non_monotone = 0
    for k, (_, X, T, L, _) in enumerate(qp_instances(10, seed=77)):
        mins = [np.linalg.eigvalsh(qp_assemble(X, T, L, lam).Q).min() for lam in ladder]
        scale = max(1.0, max(abs(m) for m in mins))
        non_monotone += any(b < a - 1e-12 * scale for a, b in zip(mins, mins[1:]))
    verdict(capsys, 2, failures == 0 and non_monotone == 0,
            f"{failures}/110 not PD after adjust ({escalated} needed escalation); "
            f"{non_monotone}/10 ladders non-monotone")


def test_criterion_03_solver(capsys):
    r = np.random.Generator(np.random.PCG64(31337))
    interior_err = 0.0
    for _ in range(20):
        Q = random_pd(r, 5, 0.5)
        x_star = r.uniform(0.2, 2.0, 5)
        c = -Q @ x_star
        s = solve_box_qp(Q, c, tol=1e-12)
        interior_err = max(interior_err, float(np.max(np.abs(s.x - np.linalg.solve(Q, -c)))))
    grid = np.arange(0.0, 4.0 + 1e-9, 0.01)
    G1, G2 = np.meshgrid(grid, grid, indexing="ij")
    grid_err, grid_cases = 0.0, 0
    while grid_cases < 20:
        Q = random_pd(r, 2, 0.3)
        c = r.normal(size=2) * 2
        if np.all(np.linalg.solve(Q, -c) > 0):
            continue
        f = 0.5 * (Q[0, 0] * G1 ** 2 + 2 * Q[0, 1] * G1 * G2 + Q[1, 1] * G2 ** 2) + c[0] * G1 + c[1] * G2
        i, j = np.unravel_index(np.argmin(f), f.shape)
        if max(grid[i], grid[j]) >= 3.99:
            continue  # minimizer outside the searched box
        s = solve_box_qp(Q, c)
        grid_err = max(grid_err, abs(s.x[0] - grid[i]), abs(s.x[1] - grid[j]))
        grid_cases += 1
    beaten = 0
    for _ in range(20):
        n = int(r.integers(2, 9))
        Q = random_pd(r, n, 0.05)
        c = r.normal(size=n) * 2
        s = solve_box_qp(Q, c)
        P = r.uniform(0, 3, (1000, n)) * (r.random((1000, n)) < 0.7)
        vals = 0.5 * np.einsum("ij,jk,ik->i", P, Q, P) + P @ c
        beaten += int(np.any(vals < s.objective - 1e-12))
    verdict(capsys, 3, interior_err <= 1e-6 and grid_err <= 1e-2 + 1e-12 and beaten == 0,
            f"interior max err {interior_err:.1e} (tol 1e-6); grid max err {grid_err:.3f} (tol 1e-2); "
            f"{beaten}/20 instances beaten by a random feasible point")


def _ann_fd_error(m: AnnModel, v, y, h=1e-5):
    def loss(model):
        return 0.5 * (ann_forward(model, v) - y) ** 2

    fields = {"w_in": m.w_in, "w_out": m.w_out, "bias_hid": m.bias_hid, "bias_out": np.array(m.bias_out)}
    g = ann_gradients(m, v, y)
    worst = 0.0
    for name, arr in fields.items():
        for idx in np.ndindex(arr.shape):
            plus, minus = arr.copy(), arr.copy()
            plus[idx] += h
            minus[idx] -= h

            def build(val):
                kw = {k: (val if k == name else a) for k, a in fields.items()}
                kw["bias_out"] = float(kw["bias_out"])
                return AnnModel(**kw)

            num = (loss(build(plus)) - loss(build(minus))) / (2 * h)
            ana = float(np.asarray(g[name])[idx])
            worst = max(worst, abs(num - ana) / max(1.0, abs(num), abs(ana)))
    return worst


def test_criterion_04_ann_gradient(capsys):
    r = np.random.Generator(np.random.PCG64(404))
    worst = 0.0
    for _ in range(50):
        hidden, inputs = int(r.integers(1, 6)), int(r.integers(1, 9))
        m = AnnModel(r.normal(0, 0.8, (hidden, inputs)), r.normal(0, 0.8, hidden),
                     r.normal(0, 0.8, hidden), float(r.normal(0, 0.8)))
        worst = max(worst, _ann_fd_error(m, r.normal(size=inputs), float(r.choice([-1.0, 1.0]))))
    verdict(capsys, 4, worst <= 1e-4, f"max relative gradient error {worst:.2e} over 50 models (tol 1e-4)")


def test_criterion_05_svm_optimality(capsys):
    r = np.random.Generator(np.random.PCG64(505))
    worst_kkt, beaten, unconverged = 0.0, 0, 0
    for seed in range(20):
        n = int(r.integers(20, 201))
        d = int(r.integers(2, 9))
        X = r.normal(size=(n, d))
        y = np.where(X[:, 0] + 0.5 * X[:, 1] + 0.4 * r.normal(size=n) > 0, 1.0, -1.0)
        cfg = SvmTrainConfig(c_bound=float(r.choice([1.0, 10.0])), gamma=float(r.choice([0.1, 0.5])), seed=seed)
        m = svm_train(X, y, cfg, keep_all=True)
        unconverged += not m.converged
        worst_kkt = max(worst_kkt, m.kkt_residual)
        K = gram_matrix(X, cfg.gamma)
        best = dual_objective(m.alphas, K, y)
        for _ in range(1000):
            a = r.uniform(0, cfg.c_bound, n)
            pos, neg = a[y > 0].sum(), a[y < 0].sum()
            a[y > 0 if pos > neg else y < 0] *= min(pos, neg) / max(pos, neg)
            if dual_objective(a, K, y) < best - 1e-12:
                beaten += 1
                break
    X2 = np.array([[0.0, 0.0], [1.0, 0.5]])
    y2 = np.array([1.0, -1.0])
    two_err = 0.0
    for gamma in (0.1, 0.7, 2.0):
        for C in (0.5, 10.0):
            m = svm_train(X2, y2, SvmTrainConfig(c_bound=C, gamma=gamma, kkt_tol=1e-12), keep_all=True)
            want = min(C, 2.0 / (2.0 - 2.0 * rbf_kernel(X2[0], X2[1], gamma)))
            two_err = max(two_err, float(np.max(np.abs(m.alphas - want))))
    ok = worst_kkt <= 1e-3 and unconverged == 0 and beaten == 0 and two_err <= 1e-8
    verdict(capsys, 5, ok, f"max KKT residual {worst_kkt:.1e} (tol 1e-3, {unconverged} unconverged); "
                           f"{beaten}/20 beaten by random feasible points; 2-point error {two_err:.1e} (tol 1e-8)")


def test_criterion_06_degenerate_meta(capsys, benches):
    runs, _, _ = benches
    mismatches = total = 0
    for res in runs:
        model = res.model
        decisions = base_decisions(model, base_outputs(model, res.X))
        for k in range(3):
            got = np.array([d.t_meta for d in predict(single_base_model(model, k), res.ids, res.X)])
            mismatches += int(np.sum(got != decisions[:, k]))
            total += got.shape[0]
    verdict(capsys, 6, mismatches == 0,
            f"{total - mismatches}/{total} single-base meta decisions agree with the base (all 3 bases, 10 seeds)")


def test_criterion_07_feasible_point_dominance(capsys, benches):
    runs, _, _ = benches
    worst = -np.inf
    for res in runs:
        cal = res.calibration
        L = cal.problem.levels_per_base
        prob, _ = adjust_lambda0(lambda l: qp_assemble(cal.outputs, cal.labels, L, l), 1e-6)
        sol = solve_box_qp(prob.Q, prob.c)
        for k in range(3):
            unit = np.concatenate([w.levels for w in unit_weighting(L, only=k)])
            worst = max(worst, sol.objective - prob.objective(unit))
    verdict(capsys, 7, worst <= 1e-9,
            f"max (QP optimum - single-base unit-weight objective) = {worst:.3e} over 10 benchmarks (tol 1e-9)")


def test_criterion_08_metric_fixtures(capsys):
    def report(hit, actual, extra):
        pred = [1] * hit + [-1] * (actual - hit) + [1] * extra + [-1] * 3
        lab = [1] * actual + [-1] * (extra + 3)
        return compute_report(np.array(pred), np.array(lab))

    checks = [
        round(report(9, 9, 48).accuracy, 3) == 1.000,
        round(report(6, 9, 0).accuracy, 3) == 0.667,
        report(9, 9, 45).false_alarm_ratio == 5.0,
        report(9, 9, 90).false_alarm_ratio == 10.0,
        report(9, 9, 288).false_alarm_ratio == 32.0,
    ]
    verdict(capsys, 8, all(checks), f"{sum(checks)}/5 fixtures exact (9/9, 6/9, 5X, 10X, 32X)")


def test_criterion_09_end_to_end(capsys, benches):
    runs, elapsed, workers = benches
    meta, best, dominated, lines = [], [], [], []
    for res in runs:
        m = res.reports["meta"]
        b = max(res.reports[name].psi for name in ("ann", "svm", "pm"))
        dom = [name for name in ("ann", "svm", "pm") if strictly_dominated(m, res.sweeps[name])]
        meta.append(m.psi)
        best.append(b)
        dominated.append(dom)
        hot = int(np.sum(res.t > 0))
        lines.append(f"seed {res.seed}: {res.t.shape[0]} fragments, {100 * hot / res.t.shape[0]:.2f}% hotspots, "
                     f"meta psi {m.psi:.3f} best base {b:.3f} dominated by {dom or 'none'}")
    diff = float(np.median(meta) - np.median(best))
    n_dom = sum(bool(d) for d in dominated)
    with capsys.disabled():
        print("\n" + "\n".join("    " + s for s in lines))
    ok = diff >= -0.02 and n_dom == 0
    verdict(capsys, 9, ok, f"median meta psi {np.median(meta):.4f} vs best base {np.median(best):.4f} "
                           f"(diff {diff:+.4f}, tol -0.02); strictly dominated on {n_dom}/10 seeds; "
                           f"10 benchmarks in {elapsed:.0f}s with {workers} worker(s)")


def test_criterion_10_determinism(capsys, tmp_path):
    differing = []
    for seed in REFERENCE_SEEDS:
        dirs = [tmp_path / f"s{seed}_{rep}" for rep in (0, 1)]
        for d in dirs:
            assert cli.main(["bench", "--seed", str(seed), "--out", str(d)]) == 0
        names = sorted(os.listdir(dirs[0]))
        match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
        if mismatch or errors or sorted(os.listdir(dirs[1])) != names:
            differing.append((seed, mismatch + errors))
    capsys.readouterr()
    verdict(capsys, 10, not differing,
            f"bench twice byte-identical for seeds {list(REFERENCE_SEEDS)}" if not differing
            else f"differences: {differing}")


def test_criterion_11_tradeoff_monotone(capsys, benches):
    runs, _, _ = benches
    bad_monotone = bad_recount = curves = 0
    for res in runs:
        t_test = res.t[res.test_idx]
        columns = {"meta": res.test_scores, "ann": res.test_outputs[:, 0],
                   "svm": res.test_outputs[:, 1], "pm": res.test_outputs[:, 2]}
        for name, rows in res.sweeps.items():
            curves += 1
            acc = np.array([r.accuracy for r in rows])
            far = np.array([r.false_alarm_ratio for r in rows])
            thetas = np.array([r.theta_used for r in rows])
            bad_monotone += int(np.any(np.diff(thetas) <= 0) or np.any(np.diff(acc) > 0) or np.any(np.diff(far) > 0))
            for r in rows:
                ref = compute_report(np.where(columns[name] >= r.theta_used, 1, -1), t_test)
                if (ref.hit, ref.extra, ref.accuracy, ref.false_alarm_ratio) != \
                        (r.hit, r.extra, r.accuracy, r.false_alarm_ratio):
                    bad_recount += 1
                    break
    verdict(capsys, 11, bad_monotone == 0 and bad_recount == 0,
            f"{curves} sweep curves: {bad_monotone} non-monotone, {bad_recount} disagree with recount")
