"""Reading and writing the on-disk formats.

* matrix CSV: no header, one row per source node, ``row i`` holds the
  outgoing weights of node ``i``;
* dataset CSV: header ``X1,...,Xd`` then ``n`` rows, with a JSON sidecar
  holding ``seed``, ``noise_std`` and the ground-truth adjacency;
* trace CSV: one row per outer iteration (see :data:`TRACE_HEADER`).

Floats are written with ``repr`` so every file round-trips exactly and
is byte-for-byte reproducible. All writers go through a temporary file
and an atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .objective import Dataset

TRACE_HEADER = ["k", "rho", "alpha", "h", "f", "l1", "inner_iters", "inner_status",
                "grad_norm", "cycles_005", "seconds"]
METRICS_HEADER = ["trial", "d", "method", "optimizer", "shd", "sid", "tpr", "edges_true",
                  "edges_est", "threshold"]


def fmt(value) -> str:
    """Canonical text for one CSV cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def rows_to_csv(rows, header=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, rows, header=None) -> Path:
    return atomic_write_text(path, rows_to_csv(rows, header))


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_matrix(path, M) -> Path:
    M = np.asarray(M)
    if M.ndim != 2:
        raise InvalidInputError(f"matrix must be 2-D, got shape {M.shape}")
    if np.issubdtype(M.dtype, np.integer) or M.dtype == bool:
        M = M.astype(int)
    return write_csv(path, M.tolist())


def read_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        M = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric entry ({exc})") from None
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{path}: expected a square matrix, got shape {M.shape}")
    return M


def metadata_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".json")


def write_dataset(data: Dataset, csv_path, meta_path=None):
    """Write the design matrix CSV and its JSON sidecar; returns both paths."""
    meta_path = metadata_path(csv_path) if meta_path is None else Path(meta_path)
    header = [f"X{j + 1}" for j in range(data.d)]
    p1 = write_csv(csv_path, data.X.tolist(), header)
    meta = {
        "n": data.n,
        "d": data.d,
        "seed": data.seed,
        "noise_std": data.noise_std,
        "ground_truth": None if data.ground_truth is None else data.ground_truth.tolist(),
        "true_weights": None if data.true_weights is None else data.true_weights.tolist(),
    }
    meta.update(data.extra)
    p2 = write_json(meta_path, meta)
    return p1, p2


def read_dataset(csv_path, meta_path=None) -> Dataset:
    """Load a dataset; the sidecar is optional unless ``meta_path`` is given."""
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InvalidInputError(f"{csv_path}: empty file")
        try:
            X = np.array([[float(v) for v in r] for r in reader if r], dtype=float)
        except ValueError as exc:
            raise InvalidInputError(f"{csv_path}: non-numeric entry ({exc})") from None
    if X.ndim != 2 or X.shape[1] != len(header):
        raise InvalidInputError(f"{csv_path}: rows do not match the {len(header)}-column header")
    meta = {}
    mp = metadata_path(csv_path) if meta_path is None else Path(meta_path)
    if mp.exists():
        with open(mp) as fh:
            meta = json.load(fh)
    elif meta_path is not None:
        raise FileNotFoundError(mp)
    extra = {k: v for k, v in meta.items()
             if k not in ("n", "d", "seed", "noise_std", "ground_truth", "true_weights")}
    return Dataset(
        X,
        ground_truth=None if meta.get("ground_truth") is None else np.array(meta["ground_truth"]),
        true_weights=None if meta.get("true_weights") is None else np.array(meta["true_weights"]),
        seed=meta.get("seed"),
        noise_std=meta.get("noise_std", 1.0),
        extra=extra,
    )


def trace_rows(trace):
    for r in trace:
        yield [r.k, r.rho, r.alpha, r.h, r.f, r.l1, r.inner_iters, str(r.inner_status),
               r.grad_norm, r.cycles_005, r.seconds]


def write_trace(path, trace) -> Path:
    return write_csv(path, trace_rows(trace), TRACE_HEADER)


def read_trace(path) -> list[dict]:
    """Trace CSV as a list of dicts with numeric fields converted."""
    ints = {"k", "inner_iters", "cycles_005"}
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRACE_HEADER:
            raise InvalidInputError(f"{path}: unexpected trace header {reader.fieldnames}")
        for row in reader:
            rec = {}
            for key, val in row.items():
                if key == "inner_status":
                    rec[key] = val
                elif val == "":
                    rec[key] = None
                elif key in ints:
                    rec[key] = int(val)
                else:
                    rec[key] = float(val)
            out.append(rec)
    return out
