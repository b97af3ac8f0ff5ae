"""Line charts of outer-loop traces and per-size metrics.

The CSV files are the authoritative output; these figures are a
convenience. SVG output is made reproducible by fixing matplotlib's hash
salt and dropping the creation date.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "svg.hashsalt": "dagopt",
    "font.size": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
})

TRACE_PANELS = [
    ("rho", r"penalty $\rho_k$", "log"),
    ("alpha", r"multiplier $\alpha_k$", "symlog"),
    ("h", r"constraint $h(B_k)$", "log"),
    ("cycles_005", "cycles (|w| > 0.05)", "symlog"),
]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = path.suffix.lstrip(".") or "svg"
    meta = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, format=fmt, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    return path


def _mean_se(runs, key):
    """Mean and standard error per iteration index over runs of unequal length."""
    length = max(len(r) for r in runs)
    mean, se = np.full(length, np.nan), np.zeros(length)
    for k in range(length):
        vals = np.array([r[k][key] for r in runs if k < len(r) and r[k][key] is not None], dtype=float)
        if vals.size:
            mean[k] = vals.mean()
            se[k] = vals.std(ddof=1) / np.sqrt(vals.size) if vals.size > 1 else 0.0
    return mean, se


def plot_traces(groups: dict, path, title: str | None = None) -> Path:
    """One panel per traced quantity; ``groups`` maps a label to a list of traces.

    Each trace is a list of row dicts as returned by :func:`dagopt.io.read_trace`.
    Curves show the mean over traces with a shaded standard-error band.
    """
    fig, axes = plt.subplots(1, len(TRACE_PANELS), figsize=(3.0 * len(TRACE_PANELS), 2.6))
    for ax, (key, label, scale) in zip(axes, TRACE_PANELS):
        for name, runs in groups.items():
            runs = [r for r in runs if r]
            if not runs:
                continue
            mean, se = _mean_se(runs, key)
            k = np.arange(1, mean.size + 1)
            if key == "h":
                lower = np.maximum(mean - se, mean * 1e-3)
            else:
                lower = np.maximum(mean - se, 0.0) if key != "alpha" else mean - se
            ax.plot(k, mean, marker="o", ms=2.5, lw=1.2, label=name)
            ax.fill_between(k, lower, mean + se, alpha=0.25)
        ax.set_yscale(scale)
        ax.set_xlabel("iteration k")
        ax.set_title(label)
    axes[0].legend(frameon=False)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_metrics(aggregate_rows, path) -> Path:
    """SHD, SID and TPR against graph size, with standard-error bars."""
    series = defaultdict(list)
    for row in aggregate_rows:
        series[(row["method"], row["optimizer"])].append(row)
    fig, axes = plt.subplots(1, 3, figsize=(9.0, 2.6))
    for ax, metric in zip(axes, ("shd", "sid", "tpr")):
        for (method, opt), rows in sorted(series.items()):
            rows = sorted(rows, key=lambda r: r["d"])
            d = [r["d"] for r in rows]
            m = [np.nan if r[f"{metric}_mean"] is None else r[f"{metric}_mean"] for r in rows]
            e = [0.0 if r[f"{metric}_se"] is None else r[f"{metric}_se"] for r in rows]
            ax.errorbar(d, m, yerr=e, marker="o", ms=3, capsize=2, lw=1.2,
                        label=f"{method.upper()} / {opt}")
        ax.set_xlabel("number of nodes d")
        ax.set_title(metric.upper())
    axes[0].legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)
