"""Seeded experiment grid: method x optimizer x graph size x trial.

Every (size, trial) cell draws one dataset from ``SeedSequence([seed, d,
trial])``, and all methods and optimizers in that cell share it, so
comparisons are paired. Output layout under ``out_dir``::

    metrics.csv      one row per successful run (METRICS_HEADER)
    runs.csv         one row per run, including failed ones
    aggregate.csv    mean and standard error per (d, method, optimizer)
    experiment.json  the resolved experiment and solver settings
    traces/          one trace CSV per run
    figures/         SVG charts (only with ``plot=True``)
"""

from __future__ import annotations

import dataclasses
import logging
import os
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError
from .graphs import evaluate, is_dag, threshold
from .simulate import simulate_dataset
from .solvers import CYCLE_THRESHOLD, SolverConfig, Termination, solve

log = logging.getLogger(__name__)

PRESETS = {
    "alm_vs_qpm": {"methods": ("alm", "qpm"), "optimizers": ("lbfgs",)},
    "optimizer_study": {"methods": ("qpm",), "optimizers": ("lbfgs", "adam", "momentum")},
    "custom": {},
}
LARGE_D = 50

RUN_HEADER = ["trial", "d", "method", "optimizer", "status", "termination", "outer_iters",
              "h_final", "f_final", "rho_final", "first_feasible_k", "rho_at_feasible",
              "inner_failures", "dag_005", "error"]
AGG_METRICS = ("shd", "sid", "tpr", "edges_est")
AGG_HEADER = (["d", "method", "optimizer", "n_ok", "n_failed"]
              + [f"{m}_{s}" for m in AGG_METRICS for s in ("mean", "se")]
              + ["inner_failures", "numerical_terminations"])


@dataclass
class ExperimentSpec:
    preset: str = "custom"
    sizes: tuple = (10, 20)
    trials: int = 12
    seed: int = 0
    methods: tuple = ("qpm",)
    optimizers: tuple = ("lbfgs",)
    n: int = 1000
    noise_std: float = 1.0
    edge_factor: float = 1.0
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(timing=False))
    out_dir: str = "results"
    workers: int = 1
    plot: bool = False
    allow_large: bool = False

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError("preset", f"must be one of {sorted(PRESETS)}")
        for key, value in PRESETS[self.preset].items():
            setattr(self, key, value)
        self.sizes = tuple(int(s) for s in self.sizes)
        self.methods = tuple(self.methods)
        self.optimizers = tuple(self.optimizers)
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if not self.sizes or min(self.sizes) < 2:
            raise ConfigError("sizes", "every graph size must be >= 2")
        if max(self.sizes) >= LARGE_D and not self.allow_large:
            raise ConfigError("sizes", f"sizes >= {LARGE_D} need allow_large (expect hours of runtime)")
        if self.n < 1:
            raise ConfigError("n", "must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        for m in self.methods:
            self.solver.replace(method=m)
        for o in self.optimizers:
            self.solver.replace(optimizer=o)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "solver"}
        out["sizes"] = list(self.sizes)
        out["methods"] = list(self.methods)
        out["optimizers"] = list(self.optimizers)
        out["out_dir"] = str(self.out_dir)
        out["solver"] = self.solver.to_dict()
        return out

    def jobs(self):
        for d in self.sizes:
            for trial in range(self.trials):
                for method in self.methods:
                    for opt in self.optimizers:
                        yield d, trial, method, opt


def trace_name(d, trial, method, optimizer) -> str:
    return f"d{d}_trial{trial:02d}_{method}_{optimizer}.csv"


def run_trial(spec: ExperimentSpec, d: int, trial: int, method: str, optimizer: str) -> dict:
    """Fit one (size, trial, method, optimizer) cell and collect its outputs."""
    out = {"trial": trial, "d": d, "method": method, "optimizer": optimizer}
    try:
        data = simulate_dataset(d, avg_edges=min(spec.edge_factor * d, d * (d - 1) / 2), n=spec.n,
                                noise_std=spec.noise_std, seed=[spec.seed, d, trial])
        cfg = spec.solver.replace(method=method, optimizer=optimizer)
        res = solve(data, cfg)
    except Exception as exc:  # recorded per run, never dropped
        log.warning("run %s failed: %s", out, exc)
        out.update(status="error", error=f"{type(exc).__name__}: {exc}",
                   detail=traceback.format_exc())
        return out
    report = evaluate(res.weights, data.ground_truth, cfg.threshold)
    feasible = next((r for r in res.trace if r.h <= cfg.h_tol), None)
    out.update(
        status="ok",
        error="",
        termination=str(res.termination),
        outer_iters=len(res.trace),
        h_final=res.h_final,
        f_final=res.trace[-1].f if res.trace else None,
        rho_final=res.trace[-1].rho if res.trace else None,
        first_feasible_k=None if feasible is None else feasible.k,
        rho_at_feasible=None if feasible is None else feasible.rho,
        inner_failures=res.inner_failures,
        dag_005=is_dag(threshold(res.weights, CYCLE_THRESHOLD)),
        metrics=report,
        trace_csv=io.rows_to_csv(io.trace_rows(res.trace), io.TRACE_HEADER),
    )
    return out


def _run_job(args):
    return run_trial(*args)


def standard_error(values) -> float | None:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return None
    return float(values.std(ddof=1) / np.sqrt(values.size))


def aggregate(results) -> list[dict]:
    cells = {}
    for r in results:
        cells.setdefault((r["d"], r["method"], r["optimizer"]), []).append(r)
    rows = []
    for (d, method, opt), runs in cells.items():
        ok = [r for r in runs if r["status"] == "ok"]
        row = {"d": d, "method": method, "optimizer": opt, "n_ok": len(ok),
               "n_failed": len(runs) - len(ok)}
        for m in AGG_METRICS:
            attr = "est_edge_count" if m == "edges_est" else m
            vals = [getattr(r["metrics"], attr) for r in ok if getattr(r["metrics"], attr) is not None]
            row[f"{m}_mean"] = float(np.mean(vals)) if vals else None
            row[f"{m}_se"] = standard_error(vals)
        row["inner_failures"] = sum(r["inner_failures"] for r in ok)
        row["numerical_terminations"] = sum(r["termination"] == str(Termination.NUMERICAL_FAILURE) for r in ok)
        rows.append(row)
    return rows


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run the full grid and write every artifact; returns a summary dict."""
    if any(d >= LARGE_D for d in spec.sizes):
        warnings.warn(f"graph sizes >= {LARGE_D} can take hours", RuntimeWarning, stacklevel=2)
    out_dir = Path(spec.out_dir)
    jobs = [(spec, *job) for job in spec.jobs()]
    workers = min(spec.workers, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]

    metric_rows, run_rows = [], []
    for r in results:
        run_rows.append([r.get(k) for k in RUN_HEADER])
        if r["status"] != "ok":
            continue
        m = r["metrics"]
        metric_rows.append([r["trial"], r["d"], r["method"], r["optimizer"], m.shd, m.sid, m.tpr,
                            m.true_edge_count, m.est_edge_count, m.threshold_used])
        io.atomic_write_text(out_dir / "traces" / trace_name(r["d"], r["trial"], r["method"], r["optimizer"]),
                             r["trace_csv"])
    agg = aggregate(results)
    io.write_csv(out_dir / "metrics.csv", metric_rows, io.METRICS_HEADER)
    io.write_csv(out_dir / "runs.csv", run_rows, RUN_HEADER)
    io.write_csv(out_dir / "aggregate.csv", ([row[k] for k in AGG_HEADER] for row in agg), AGG_HEADER)
    io.write_json(out_dir / "experiment.json", spec.to_dict())
    if spec.plot:
        render_figures(out_dir, spec)
    n_ok = sum(r["status"] == "ok" for r in results)
    return {"runs": len(results), "ok": n_ok, "failed": len(results) - n_ok,
            "aggregate": agg, "results": results, "out_dir": out_dir}


def render_figures(out_dir, spec: ExperimentSpec):
    """Trace panels per graph size and a metrics-vs-size chart."""
    from .plotting import plot_metrics, plot_traces

    out_dir = Path(out_dir)
    paths = []
    for d in spec.sizes:
        groups = {}
        for method in spec.methods:
            for opt in spec.optimizers:
                label = f"{method.upper()} / {opt}"
                runs = []
                for trial in range(spec.trials):
                    p = out_dir / "traces" / trace_name(d, trial, method, opt)
                    if p.exists():
                        runs.append(io.read_trace(p))
                groups[label] = runs
        paths.append(plot_traces(groups, out_dir / "figures" / f"traces_d{d}.svg", title=f"d = {d}"))
    agg = read_aggregate(out_dir / "aggregate.csv")
    paths.append(plot_metrics(agg, out_dir / "figures" / "metrics.svg"))
    return paths


def read_aggregate(path) -> list[dict]:
    import csv

    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            conv = {}
            for k, v in row.items():
                if k in ("method", "optimizer"):
                    conv[k] = v
                elif v == "":
                    conv[k] = None
                elif k in ("d", "n_ok", "n_failed", "inner_failures", "numerical_terminations"):
                    conv[k] = int(v)
                else:
                    conv[k] = float(v)
            rows.append(conv)
    return rows


def default_workers() -> int:
    return os.cpu_count() or 1
