"""Thresholding, acyclicity checks and structure-recovery metrics.

Conventions
-----------
* ``adj[i, j] = 1`` means an edge ``i -> j``.
* :func:`shd` counts the minimum number of single-edge additions,
  deletions and reversals turning one graph into the other; a reversed
  edge costs **one** edit, not two.
* :func:`sid` counts ordered pairs ``(i, j)`` for which adjusting for the
  estimated parents of ``i`` does not give the true effect of
  intervening on ``i`` on ``j``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import islice

import networkx as nx
import numpy as np

from .errors import InvalidInputError

DEFAULT_CYCLE_CAP = 10_000


def _binary(adj, name="adjacency") -> np.ndarray:
    A = np.asarray(adj)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {A.shape}")
    return (A != 0).astype(int)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")


def threshold(B, omega: float) -> np.ndarray:
    """Binary adjacency keeping entries with ``|B_ij| > omega`` (strict)."""
    if omega < 0:
        raise InvalidInputError(f"threshold must be nonnegative, got {omega}")
    return (np.abs(np.asarray(B, dtype=float)) > omega).astype(int)


def is_dag(adj) -> bool:
    A = _binary(adj)
    if np.any(np.diag(A)):
        return False
    return nx.is_directed_acyclic_graph(nx.from_numpy_array(A, create_using=nx.DiGraph))


def count_simple_cycles(adj, cap: int | None = DEFAULT_CYCLE_CAP, return_capped: bool = False):
    """Number of distinct simple directed cycles, self-loops included.

    Enumeration stops at ``cap`` cycles; pass ``return_capped=True`` to also
    learn whether the count saturated.
    """
    A = _binary(adj)
    g = nx.from_numpy_array(A, create_using=nx.DiGraph)
    cycles = nx.simple_cycles(g)
    if cap is None:
        count, capped = sum(1 for _ in cycles), False
    else:
        count = sum(1 for _ in islice(cycles, cap + 1))
        capped = count > cap
        count = min(count, cap)
    return (count, capped) if return_capped else count


def shd(est, truth) -> int:
    """Structural Hamming distance with unit-cost reversals."""
    E, T = _binary(est, "est"), _binary(truth, "truth")
    _same_shape(E, T)
    diff = np.abs(E - T)
    per_pair = np.triu(diff + diff.T, k=1)
    # (i->j) vs (j->i) shows up as two mismatches; count it once
    reversal = (E != E.T) & (T != T.T) & (E == T.T)
    return int(per_pair.sum() - np.triu(reversal, k=1).sum() + np.trace(diff))


def tpr(est, truth):
    """Fraction of true directed edges present in ``est``.

    Returns ``(rate, defined)``; an empty truth gives ``(1.0, True)`` if the
    estimate is empty too and ``(0.0, False)`` otherwise.
    """
    E, T = _binary(est, "est"), _binary(truth, "truth")
    _same_shape(E, T)
    n_true = int(T.sum())
    if n_true == 0:
        return (1.0, True) if E.sum() == 0 else (0.0, False)
    return float((E & T).sum()) / n_true, True


def _reachability(A: np.ndarray) -> np.ndarray:
    """``R[i, j]`` is True iff a directed path of length >= 1 leads from i to j."""
    R = A.astype(bool)
    while True:
        nxt = R | ((R.astype(int) @ R.astype(int)) > 0)
        if np.array_equal(nxt, R):
            return R
        R = nxt


def _ancestral_closure(A: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    keep = nodes.copy()
    while True:
        grown = keep | A[:, keep].any(axis=1)
        if np.array_equal(grown, keep):
            return keep
        keep = grown


def d_separated(A, x: int, y: int, Z) -> bool:
    """``x`` and ``y`` d-separated by ``Z`` in DAG ``A`` (moral ancestral graph test)."""
    A = _binary(A).astype(bool)
    d = A.shape[0]
    z = np.zeros(d, dtype=bool)
    z[list(Z)] = True
    seed = z.copy()
    seed[[x, y]] = True
    keep = _ancestral_closure(A, seed)
    S = A & keep[:, None] & keep[None, :]
    moral = S | S.T
    for v in np.nonzero(keep)[0]:
        pa = S[:, v]
        moral |= np.outer(pa, pa)
    np.fill_diagonal(moral, False)
    moral[z, :] = False
    moral[:, z] = False
    seen = np.zeros(d, dtype=bool)
    seen[x] = True
    frontier = seen.copy()
    while frontier.any():
        frontier = moral[frontier].any(axis=0) & ~seen
        seen |= frontier
    return not seen[y]


def parent_adjustment_correct(truth, est, i: int, j: int, _reach=None) -> bool:
    """Whether the parents of ``i`` in ``est`` identify the effect of ``i`` on ``j`` in ``truth``."""
    G = _binary(truth).astype(bool)
    R = _reachability(G) if _reach is None else _reach
    Z = np.nonzero(np.asarray(est)[:, i])[0]
    if j in Z:
        return not R[i, j]
    # nodes other than i on a directed path i -> ... -> j
    causal = R[i] & (R[:, j] | (np.arange(G.shape[0]) == j))
    forbidden = causal | R[causal].any(axis=0)
    if np.any(forbidden[Z]):
        return False
    backdoor = G.copy()
    backdoor[i, causal] = False
    return d_separated(backdoor, i, j, Z)


def sid(est, truth) -> int:
    """Structural intervention distance between two DAGs."""
    E, T = _binary(est, "est"), _binary(truth, "truth")
    _same_shape(E, T)
    if not is_dag(T):
        raise InvalidInputError("truth graph is cyclic")
    if not is_dag(E):
        raise InvalidInputError("estimated graph is cyclic")
    R = _reachability(T.astype(bool))
    d = T.shape[0]
    wrong = 0
    for i in range(d):
        for j in range(d):
            if i != j and not parent_adjustment_correct(T, E, i, j, _reach=R):
                wrong += 1
    return wrong


@dataclass(frozen=True)
class MetricsReport:
    shd: int
    tpr: float
    sid: int | None
    true_edge_count: int
    est_edge_count: int
    threshold_used: float
    tpr_defined: bool = True

    def as_dict(self):
        return asdict(self)


def evaluate(B_est, truth, omega: float = 0.3) -> MetricsReport:
    """Threshold ``B_est`` at ``omega`` and score it against binary ``truth``.

    SID is left as ``None`` when the thresholded estimate has a cycle.
    """
    E = threshold(B_est, omega)
    T = _binary(truth, "truth")
    _same_shape(E, T)
    rate, defined = tpr(E, T)
    return MetricsReport(
        shd=shd(E, T),
        tpr=rate,
        sid=sid(E, T) if is_dag(E) else None,
        true_edge_count=int(T.sum()),
        est_edge_count=int(E.sum()),
        threshold_used=float(omega),
        tpr_defined=defined,
    )
