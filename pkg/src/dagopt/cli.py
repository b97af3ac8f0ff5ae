"""Command-line entry point: ``dagopt <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure (of the fit, or of every trial in an experiment), 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import io
from .errors import ConfigError, InvalidInputError
from .experiment import PRESETS, ExperimentSpec, default_workers, run_experiment
from .graphs import evaluate
from .simulate import simulate_dataset
from .solvers import SolverConfig, Termination, solve

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("dagopt")


def load_config(path) -> dict:
    """Read a YAML (or JSON) mapping of field names to values."""
    if path is None:
        return {}
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"{path} is not valid YAML/JSON: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a key/value mapping")
    return data


def _solver_overrides(args) -> dict:
    out = {}
    for flag, key in (("method", "method"), ("optimizer", "optimizer"), ("constraint", "constraint"),
                      ("lam", "lam"), ("threshold", "threshold")):
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = value
    return out


def cmd_simulate(args) -> int:
    data = simulate_dataset(args.d, avg_edges=args.edges, n=args.n, noise_std=args.noise_std,
                            seed=args.seed)
    out = Path(args.out_dir)
    csv_path, meta_path = io.write_dataset(data, out / f"{args.name}.csv")
    io.write_matrix(out / f"{args.name}_truth.csv", data.ground_truth)
    print(f"wrote {csv_path} and {meta_path}")
    return EXIT_OK


def cmd_fit(args) -> int:
    values = load_config(args.config)
    values.update(_solver_overrides(args))
    if args.no_timing:
        values["timing"] = False
    cfg = SolverConfig.from_dict(values)
    data = io.read_dataset(args.dataset)
    res = solve(data, cfg)
    out = Path(args.out_dir)
    io.write_matrix(out / "weights.csv", res.weights)
    io.write_matrix(out / "adjacency.csv", res.adjacency)
    io.write_trace(out / "trace.csv", res.trace)
    summary = {
        "termination": str(res.termination),
        "h_final": res.h_final,
        "f_final": res.trace[-1].f if res.trace else None,
        "outer_iters": len(res.trace),
        "rho_final": res.trace[-1].rho if res.trace else None,
        "inner_failures": res.inner_failures,
        "edges": int(res.adjacency.sum()),
        "seconds": res.seconds,
        "inner_seconds": [r.seconds for r in res.trace] if cfg.timing else None,
        "config": cfg.to_dict(),
    }
    if data.ground_truth is not None:
        summary["metrics"] = evaluate(res.weights, data.ground_truth, cfg.threshold).as_dict()
    io.write_json(out / "summary.json", summary)
    print(f"{res.termination}: h = {res.h_final:.3e} after {len(res.trace)} outer iterations")
    return EXIT_NUMERIC if res.termination is Termination.NUMERICAL_FAILURE else EXIT_OK


def _read_truth(path) -> np.ndarray:
    if str(path).endswith(".json"):
        with open(path) as fh:
            meta = json.load(fh)
        if meta.get("ground_truth") is None:
            raise InvalidInputError(f"{path} has no ground_truth")
        return np.array(meta["ground_truth"])
    return io.read_matrix(path)


def cmd_evaluate(args) -> int:
    est = io.read_matrix(args.est)
    truth = _read_truth(args.truth)
    report = evaluate(est, truth, args.threshold)
    text = json.dumps(report.as_dict(), indent=2, sort_keys=True)
    if args.out:
        io.atomic_write_text(args.out, text + "\n")
    print(text)
    return EXIT_OK


def _sizes(text):
    try:
        return tuple(int(s) for s in text.replace(";", ",").split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _names(text):
    return tuple(s.strip().lower() for s in text.split(",") if s.strip())


def cmd_experiment(args) -> int:
    values = load_config(args.config)
    spec_fields = {"preset", "sizes", "trials", "seed", "methods", "optimizers", "n", "noise_std",
                   "edge_factor", "out_dir", "workers", "plot", "allow_large"}
    spec_kw = {k: values.pop(k) for k in list(values) if k in spec_fields}
    values.setdefault("timing", False)
    values.update(_solver_overrides(args))
    values.pop("method", None)
    values.pop("optimizer", None)
    if args.timing:
        values["timing"] = True
    for key in ("preset", "sizes", "trials", "seed", "n", "workers", "out_dir"):
        if getattr(args, key) is not None:
            spec_kw[key] = getattr(args, key)
    if args.method is not None:
        spec_kw["methods"] = args.method
    if args.optimizer is not None:
        spec_kw["optimizers"] = args.optimizer
    if args.plot:
        spec_kw["plot"] = True
    if args.allow_large:
        spec_kw["allow_large"] = True
    spec_kw.setdefault("workers", default_workers())
    spec = ExperimentSpec(solver=SolverConfig.from_dict(values), **spec_kw)
    summary = run_experiment(spec)
    for row in summary["aggregate"]:
        print(f"d={row['d']:<4} {row['method']:<4} {row['optimizer']:<9} "
              f"SHD {row['shd_mean']}  SID {row['sid_mean']}  TPR {row['tpr_mean']}  "
              f"ok {row['n_ok']}/{row['n_ok'] + row['n_failed']}")
    print(f"artifacts in {summary['out_dir']}")
    return EXIT_NUMERIC if summary["ok"] == 0 else EXIT_OK


def cmd_trace_plot(args) -> int:
    from .plotting import plot_traces

    groups = {}
    for path in args.traces:
        groups.setdefault(Path(path).stem, []).append(io.read_trace(path))
    out = plot_traces(groups, args.out)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dagopt", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write an ER DAG linear-Gaussian dataset")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--edges", type=float, default=None, help="expected edge count (default d)")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--noise-std", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--name", default="data")
    s.set_defaults(func=cmd_simulate)

    def solver_flags(q, multi=False):
        kind = _names if multi else str.lower
        q.add_argument("--method", type=kind, default=None, help="alm or qpm")
        q.add_argument("--optimizer", type=kind, default=None, help="lbfgs, adam or momentum")
        q.add_argument("--constraint", default=None, help="exp, bin or bin:<c>")
        q.add_argument("--lambda", dest="lam", type=float, default=None)
        q.add_argument("--threshold", type=float, default=None)
        q.add_argument("--config", default=None, help="YAML/JSON file of field: value pairs")

    f = sub.add_parser("fit", help="learn a DAG from a dataset CSV")
    f.add_argument("dataset")
    f.add_argument("--out-dir", default="fit")
    f.add_argument("--no-timing", action="store_true", help="omit wall-clock timings")
    solver_flags(f)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evaluate", help="score a weight matrix against a true graph")
    e.add_argument("est", help="estimated weight matrix CSV")
    e.add_argument("truth", help="true adjacency CSV or dataset metadata JSON")
    e.add_argument("--threshold", type=float, default=0.3)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("experiment", help="run a seeded grid of fits")
    x.add_argument("--preset", choices=sorted(PRESETS), default=None)
    x.add_argument("--sizes", type=_sizes, default=None)
    x.add_argument("--trials", type=int, default=None)
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--n", type=int, default=None)
    x.add_argument("--workers", type=int, default=None)
    x.add_argument("--out-dir", dest="out_dir", default=None)
    x.add_argument("--plot", action="store_true", help="also render SVG charts")
    x.add_argument("--timing", action="store_true", help="record wall-clock seconds in traces")
    x.add_argument("--allow-large", action="store_true", help="permit sizes >= 50")
    solver_flags(x, multi=True)
    x.set_defaults(func=cmd_experiment)

    t = sub.add_parser("trace-plot", help="plot one or more trace CSVs")
    t.add_argument("traces", nargs="+")
    t.add_argument("--out", default="trace.svg")
    t.set_defaults(func=cmd_trace_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error in field '{exc.field}': {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"I/O error{f' ({name})' if name else ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
