"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line, repeated in the
terminal summary. Tolerances are the stated ones; nothing here is tuned to
make a criterion pass.
"""

import hashlib
import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from dagopt.constraints import BIN, EXP, ConstraintKind, h_grad, h_value
from dagopt.experiment import ExperimentSpec, default_workers, run_experiment
from dagopt.graphs import is_dag, shd, sid, threshold
from dagopt.objective import least_squares, least_squares_grad, penalized_value_grad
from dagopt.simulate import simulate_dataset
from dagopt.solvers import SolverConfig, Termination, solve_qpm

from conftest import (all_dags, fd_gradient, random_dag_weights, rel_err, report_criterion, shd_oracle,
                      sid_oracle)

MASTER_SEED = 0


def tree_digest(root):
    root = Path(root)
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_1_gradients():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = {"h_exp": 0.0, "h_bin": 0.0, "least_squares": 0.0, "qpm": 0.0, "alm": 0.0}
    for _ in range(200):
        d = int(rng.integers(2, 11))
        B = rng.uniform(-2, 2, (d, d))
        X = rng.normal(size=(50, d))
        rho = float(rng.uniform(0.1, 10))
        alpha = float(rng.uniform(0, 5))
        checks = {
            "h_exp": (h_grad(B, EXP), lambda M: h_value(M, EXP)),
            "h_bin": (h_grad(B, BIN), lambda M: h_value(M, BIN)),
            "least_squares": (least_squares_grad(X, B), lambda M: least_squares(X, M)),
            "qpm": (penalized_value_grad(X, B, EXP, rho, 0.0)[1],
                    lambda M: penalized_value_grad(X, M, EXP, rho, 0.0)[0]),
            "alm": (penalized_value_grad(X, B, BIN, rho, alpha)[1],
                    lambda M: penalized_value_grad(X, M, BIN, rho, alpha)[0]),
        }
        for name, (G, fun) in checks.items():
            worst[name] = max(worst[name], rel_err(G, fd_gradient(fun, B, step=1e-5)))
    seconds = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and seconds < 30
    detail = "max relative error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tol 1e-6)"
    report_criterion(1, "gradient correctness", ok, detail, seconds)
    assert ok, detail


def _random_cyclic(rng, d):
    while True:
        mask = rng.random((d, d)) < 0.5
        np.fill_diagonal(mask, False)
        B = mask * rng.choice([-1.0, 1.0], (d, d)) * rng.uniform(0.5, 2.0, (d, d))
        if not is_dag(B != 0):
            return B


def test_criterion_2_feasible_gradient_vanishes():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    dag_h, dag_g, cyc_h, cyc_g = 0.0, 0.0, np.inf, np.inf
    for kind in (EXP, BIN):
        for _ in range(100):
            d = int(rng.integers(2, 11))
            B = random_dag_weights(rng, d)
            dag_h = max(dag_h, h_value(B, kind))
            dag_g = max(dag_g, np.linalg.norm(h_grad(B, kind)))
            C = _random_cyclic(rng, d)
            cyc_h = min(cyc_h, h_value(C, kind))
            cyc_g = min(cyc_g, np.linalg.norm(h_grad(C, kind)))
    seconds = time.perf_counter() - t0
    ok = dag_h <= 1e-10 and dag_g <= 1e-8 and cyc_h > 1e-6 and cyc_g > 1e-6 and seconds < 10
    detail = (f"DAGs max h {dag_h:.1e}, max |grad| {dag_g:.1e}; "
              f"cyclic min h {cyc_h:.2e}, min |grad| {cyc_g:.2e}")
    report_criterion(2, "feasible points have vanishing gradient", ok, detail, seconds)
    assert ok, detail


def test_criterion_3_closed_form():
    t0 = time.perf_counter()
    grid = [0.25, 0.5, 1.0, 1.5]
    err_exp = err_bin = 0.0
    for a in grid:
        for b in grid:
            B = np.array([[0.0, a], [b, 0.0]])
            err_exp = max(err_exp, abs(h_value(B, EXP) - (2 * math.cosh(a * b) - 2)))
            M = B * B
            for c in (0.25, 0.5, 1.0, 2.0):
                # (I + cM)^2 = I + 2cM + c^2 M^2, tr M = 0, tr M^2 = 2 a^2 b^2
                expansion = np.trace(np.eye(2) + 2 * c * M + c * c * M @ M) - 2
                closed = 2 * c * c * a * a * b * b
                value = h_value(B, ConstraintKind("bin", c))
                err_bin = max(err_bin, abs(value - closed), abs(expansion - closed))
    seconds = time.perf_counter() - t0
    ok = err_exp <= 1e-10 and err_bin <= 1e-10 and seconds < 1
    detail = f"max |h_exp - (2cosh(ab) - 2)| {err_exp:.1e}, max |h_bin - 2c^2a^2b^2| {err_bin:.1e}"
    report_criterion(3, "two-cycle closed forms", ok, detail, seconds)
    assert ok, detail


def test_criterion_4_qpm_reaches_feasibility():
    t0 = time.perf_counter()
    cfg = SolverConfig(timing=False)
    good, rows = 0, []
    for trial in range(12):
        data = simulate_dataset(10, n=1000, seed=[MASTER_SEED, 10, trial])
        res = solve_qpm(data, cfg)
        feasible = res.h_final <= 1e-8
        dag = is_dag(threshold(res.weights, 0.05))
        good += int(feasible and dag)
        rows.append(f"{res.h_final:.1e}")
    seconds = time.perf_counter() - t0
    ok = good >= 11 and seconds < 600
    detail = f"{good}/12 trials with h <= 1e-8 and a DAG at 0.05 (h_final: {', '.join(rows)})"
    report_criterion(4, "QPM limit points are feasible", ok, detail, seconds)
    assert ok, detail


@pytest.fixture(scope="module")
def alm_vs_qpm(tmp_path_factory):
    t0 = time.perf_counter()
    out = tmp_path_factory.mktemp("alm_vs_qpm")
    spec = ExperimentSpec(preset="alm_vs_qpm", sizes=(10, 20), trials=12, seed=MASTER_SEED,
                          out_dir=str(out), workers=default_workers())
    summary = run_experiment(spec)
    return summary, time.perf_counter() - t0


def test_criterion_5_alm_matches_qpm(alm_vs_qpm):
    summary, seconds = alm_vs_qpm
    assert summary["failed"] == 0
    agg = {(r["d"], r["method"]): r for r in summary["aggregate"]}
    runs = {(r["d"], r["trial"], r["method"]): r for r in summary["results"]}
    parts, ok = [], seconds < 1800
    for d in (10, 20):
        a, q = agg[(d, "alm")], agg[(d, "qpm")]
        diff = abs(a["shd_mean"] - q["shd_mean"])
        pooled = math.sqrt((a["shd_se"] or 0.0) ** 2 + (q["shd_se"] or 0.0) ** 2)
        shd_ok = diff <= 2 * pooled
        rho_ok = all(r["rho_at_feasible"] is not None and r["rho_at_feasible"] >= 1e6
                     for key, r in runs.items() if key[0] == d)
        gaps = []
        for t in range(12):
            ka, kq = runs[(d, t, "alm")]["first_feasible_k"], runs[(d, t, "qpm")]["first_feasible_k"]
            gaps.append(math.inf if ka is None or kq is None else abs(ka - kq))
        gap_ok = max(gaps) <= 3
        ok = ok and shd_ok and rho_ok and gap_ok
        parts.append(
            f"d={d}: SHD ALM {a['shd_mean']:.2f} vs QPM {q['shd_mean']:.2f} "
            f"(|diff| {diff:.2f} vs 2*pooled SE {2 * pooled:.2f}, {'ok' if shd_ok else 'FAIL'}); "
            f"rho at feasibility >= 1e6 {'ok' if rho_ok else 'FAIL'}; "
            f"first-feasible gap max {max(gaps)} mean {np.mean(gaps):.2f} (<= 3: {'ok' if gap_ok else 'FAIL'})")
    detail = " | ".join(parts)
    report_criterion(5, "ALM behaves like QPM", ok, detail, seconds)
    assert ok, detail


def test_criterion_6_optimizer_ordering(tmp_path):
    t0 = time.perf_counter()
    spec = ExperimentSpec(preset="optimizer_study", sizes=(20,), trials=12, seed=MASTER_SEED,
                          out_dir=str(tmp_path), workers=default_workers())
    summary = run_experiment(spec)
    seconds = time.perf_counter() - t0
    agg = {r["optimizer"]: r for r in summary["aggregate"]}
    lb, ad, mo = (agg[k]["shd_mean"] for k in ("lbfgs", "adam", "momentum"))
    failures = agg["momentum"]["inner_failures"] + agg["momentum"]["numerical_terminations"]
    ok = summary["failed"] == 0 and lb <= ad <= mo and failures >= 1 and seconds < 1800
    detail = (f"mean SHD L-BFGS {lb:.3f}, Adam {ad:.3f}, momentum {mo:.3f} "
              f"(ordering {'ok' if lb <= ad <= mo else 'violated'}); "
              f"momentum numerical failures {failures}")
    report_criterion(6, "optimizer ordering", ok, detail, seconds)
    assert ok, detail


def test_criterion_7_metric_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    mismatches, checked = 0, 0
    dags = list(all_dags(3))
    for T in dags:
        for E in dags:
            checked += 1
            mismatches += int(sid(E, T) != sid_oracle(E, T, rng))
    for _ in range(100):
        d = int(rng.choice([4, 5]))
        T = (random_dag_weights(rng, d, density=rng.uniform(0.2, 0.8)) != 0).astype(int)
        E = (random_dag_weights(rng, d, density=rng.uniform(0.2, 0.8)) != 0).astype(int)
        checked += 1
        mismatches += int(sid(E, T) != sid_oracle(E, T, rng))
    shd_bad = 0
    for _ in range(500):
        d = int(rng.integers(2, 9))
        a = (rng.random((d, d)) < rng.uniform(0.1, 0.6)).astype(int)
        b = (rng.random((d, d)) < rng.uniform(0.1, 0.6)).astype(int)
        shd_bad += int(shd(a, b) != shd_oracle(a, b))
    seconds = time.perf_counter() - t0
    ok = mismatches == 0 and shd_bad == 0 and seconds < 120
    detail = f"SID mismatches {mismatches}/{checked} pairs; SHD mismatches {shd_bad}/500 pairs"
    report_criterion(7, "metric oracles", ok, detail, seconds)
    assert ok, detail


def test_criterion_8_simulator_covariance():
    """Relative error is measured on the correlation scale: off-diagonal
    errors are divided by sqrt(S_ii S_jj), diagonal errors by S_ii."""
    t0 = time.perf_counter()
    worst, cases = 0.0, 0
    for d in (2, 3, 4, 5):
        pairs = d * (d - 1) // 2
        for k, edges in enumerate(sorted({1, min(d, pairs), pairs})):
            data = simulate_dataset(d, avg_edges=edges, n=100_000, noise_std=1.0 + 0.5 * k,
                                    seed=[MASTER_SEED, 8, d, k])
            W, s2 = data.true_weights, data.noise_std ** 2
            inv = np.linalg.inv(np.eye(d) - W)
            sigma = inv.T @ (s2 * np.eye(d)) @ inv
            emp = np.cov(data.X, rowvar=False)
            scale = np.sqrt(np.outer(np.diag(sigma), np.diag(sigma)))
            worst = max(worst, float(np.max(np.abs(emp - sigma) / scale)))
            cases += 1
    seconds = time.perf_counter() - t0
    ok = worst <= 0.05 and seconds < 60
    detail = f"max scaled covariance error {worst:.4f} over {cases} graphs (tol 0.05)"
    report_criterion(8, "simulator covariance", ok, detail, seconds)
    assert ok, detail


def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "run"
    spec = ExperimentSpec(preset="optimizer_study", sizes=(4, 5), trials=2, seed=MASTER_SEED,
                          out_dir=str(out), workers=default_workers(), plot=True)
    run_experiment(spec)
    first = tree_digest(out)
    shutil.rmtree(out)
    run_experiment(spec)
    second = tree_digest(out)
    seconds = time.perf_counter() - t0
    differing = sorted(set(first) ^ set(second) | {k for k in first if first.get(k) != second.get(k)})
    ok = bool(first) and not differing
    detail = f"{len(first)} artifacts compared, {len(differing)} differ" + (f": {differing}" if differing else "")
    report_criterion(9, "byte-identical experiment artifacts", ok, detail, seconds)
    assert ok, detail
