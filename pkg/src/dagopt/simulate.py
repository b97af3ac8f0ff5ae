"""Random ground-truth DAGs and linear-Gaussian SEM data.

Seeds are anything :func:`numpy.random.default_rng` accepts. A master seed
is split into independent graph, weight and noise streams with
:func:`derive_seeds` (``SeedSequence(master).spawn(3)``), so changing the
sample size never perturbs the sampled graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .objective import Dataset


@dataclass(frozen=True, eq=False)
class BinaryDag:
    adjacency: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=int)
        order = np.asarray(self.order, dtype=int)
        d = A.shape[0]
        if A.shape != (d, d) or sorted(order.tolist()) != list(range(d)):
            raise InvalidInputError("adjacency must be square and order a permutation")
        rank = np.empty(d, dtype=int)
        rank[order] = np.arange(d)
        src, dst = np.nonzero(A)
        if np.any(rank[src] >= rank[dst]):
            raise InvalidInputError("adjacency has an edge against the topological order")
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "order", order)

    @property
    def d(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())


def derive_seeds(master, n: int = 3):
    """Independent child seed sequences (graph, weights, noise by default)."""
    return np.random.SeedSequence(master).spawn(n)


def sample_er_dag(d: int, avg_edges: float, rng_seed=None) -> BinaryDag:
    """Erdos-Renyi DAG with ``avg_edges`` expected edges.

    A uniformly random topological order is drawn first, then each of the
    ``d(d-1)/2`` order-respecting edges is kept with probability
    ``2 * avg_edges / (d(d-1))``.
    """
    if d < 2:
        raise InvalidInputError(f"need d >= 2, got {d}")
    pairs = d * (d - 1) / 2
    if not 0 <= avg_edges <= pairs:
        raise InvalidInputError(f"avg_edges must lie in [0, {pairs:g}], got {avg_edges}")
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(d)
    p = avg_edges / pairs
    upper = np.triu(rng.random((d, d)) < p, k=1).astype(int)
    # upper[i, j] is an edge between the i-th and j-th nodes in the order
    A = np.zeros((d, d), dtype=int)
    A[np.ix_(order, order)] = upper
    return BinaryDag(A, order)


def sample_weights(g: BinaryDag, lo: float = 0.5, hi: float = 2.0, rng_seed=None) -> np.ndarray:
    """Edge weights uniform on ``[-hi, -lo] U [lo, hi]``; non-edges are 0."""
    if not 0 < lo < hi:
        raise InvalidInputError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    rng = np.random.default_rng(rng_seed)
    d = g.d
    mag = rng.uniform(lo, hi, size=(d, d))
    sign = np.where(rng.random((d, d)) < 0.5, -1.0, 1.0)
    return np.where(g.adjacency != 0, sign * mag, 0.0)


def topological_order(W) -> np.ndarray:
    """Topological order of the support of ``W``; raises if it is cyclic."""
    A = np.asarray(W) != 0
    d = A.shape[0]
    indeg = A.sum(axis=0).astype(int)
    ready = [i for i in range(d) if indeg[i] == 0]
    order = []
    while ready:
        i = ready.pop(0)
        order.append(i)
        for j in np.nonzero(A[i])[0]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(int(j))
    if len(order) != d:
        raise InvalidInputError("weight matrix support is cyclic")
    return np.array(order)


def sample_linear_sem(W, n: int, noise_std: float = 1.0, rng_seed=None) -> Dataset:
    """Draw ``n`` rows of ``x = W.T x + noise_std * z`` with standard normal ``z``."""
    W = np.asarray(W, dtype=float)
    if n < 1:
        raise InvalidInputError(f"need n >= 1, got {n}")
    if not noise_std > 0:
        raise InvalidInputError(f"noise_std must be positive, got {noise_std}")
    order = topological_order(W)
    d = W.shape[0]
    rng = np.random.default_rng(rng_seed)
    Z = rng.standard_normal((n, d))
    X = np.zeros((n, d))
    for j in order:
        X[:, j] = X @ W[:, j] + noise_std * Z[:, j]
    return Dataset(X, ground_truth=(W != 0).astype(int), true_weights=W, noise_std=noise_std)


def simulate_dataset(d: int, avg_edges: float | None = None, n: int = 1000,
                     noise_std: float = 1.0, seed=0, lo: float = 0.5,
                     hi: float = 2.0) -> Dataset:
    """ER DAG, weights and SEM data from one master seed (ER1 by default).

    ``seed`` is an int or a list of ints (``SeedSequence`` entropy). The ER1
    default of ``d`` expected edges is capped at ``d(d-1)/2`` for tiny graphs.
    """
    if avg_edges is None:
        avg_edges = min(d, d * (d - 1) // 2)
    s_graph, s_weights, s_noise = derive_seeds(seed)
    g = sample_er_dag(d, avg_edges, s_graph)
    W = sample_weights(g, lo, hi, s_weights)
    data = sample_linear_sem(W, n, noise_std, s_noise)
    return Dataset(data.X, ground_truth=g.adjacency, true_weights=W, seed=seed,
                   noise_std=noise_std, extra={"avg_edges": avg_edges})
