import itertools
import math

import numpy as np
import pytest


def expm_series(M, terms=30):
    """Truncated Taylor series of the matrix exponential."""
    M = np.asarray(M, dtype=float)
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ M / k
        out = out + term
    return out


def fd_gradient(fun, B, step=1e-5):
    """Central finite differences of a scalar function of a matrix."""
    B = np.asarray(B, dtype=float)
    G = np.zeros_like(B)
    for idx in np.ndindex(B.shape):
        E = np.zeros_like(B)
        E[idx] = step
        G[idx] = (fun(B + E) - fun(B - E)) / (2 * step)
    return G


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(np.linalg.norm(b), 1e-300)
    return np.linalg.norm(a - b) / scale


def random_dag_weights(rng, d, density=0.5, lo=0.5, hi=2.0):
    """Weights on a random DAG: random order, then forward edges."""
    order = rng.permutation(d)
    W = np.zeros((d, d))
    for a in range(d):
        for b in range(a + 1, d):
            if rng.random() < density:
                W[order[a], order[b]] = rng.choice([-1, 1]) * rng.uniform(lo, hi)
    return W


def all_dags(d):
    """Every labelled DAG on d nodes, by brute-force enumeration."""
    pairs = [(i, j) for i in range(d) for j in range(d) if i != j]
    for bits in itertools.product([0, 1], repeat=len(pairs)):
        A = np.zeros((d, d), dtype=int)
        for b, (i, j) in zip(bits, pairs):
            A[i, j] = b
        if _acyclic_bruteforce(A):
            yield A


def _acyclic_bruteforce(A):
    d = A.shape[0]
    P = np.eye(d, dtype=int)
    for _ in range(d):
        P = (P @ A > 0).astype(int)
        if np.trace(P):
            return False
    return True


def sid_oracle(est, truth, rng):
    """SID via linear-Gaussian interventional means.

    Draws generic weights on ``truth``; the true effect of i on j is
    ``inv(I - W)[i, j]``. Parent adjustment with est's parents of i
    predicts the OLS coefficient of X_i when regressing X_j on (X_i, Z),
    or zero if j itself is among those parents.
    """
    d = truth.shape[0]
    W = truth * rng.uniform(0.5, 2.0, (d, d)) * rng.choice([-1.0, 1.0], (d, d))
    M = np.linalg.inv(np.eye(d) - W)
    S = M.T @ M
    wrong = 0
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            Z = [int(z) for z in np.nonzero(est[:, i])[0]]
            if j in Z:
                pred = 0.0
            else:
                idx = [i] + Z
                pred = np.linalg.solve(S[np.ix_(idx, idx)], S[idx, j])[0]
            if not math.isclose(pred, M[i, j], rel_tol=1e-8, abs_tol=1e-8):
                wrong += 1
    return wrong


def shd_oracle(est, truth):
    """Minimal single-edge edits, pair by pair (reversal = 1 edit)."""
    d = est.shape[0]
    total = sum(int(est[i, i] != truth[i, i]) for i in range(d))
    for i in range(d):
        for j in range(i + 1, d):
            a = (int(est[i, j]), int(est[j, i]))
            b = (int(truth[i, j]), int(truth[j, i]))
            if a == b:
                continue
            if a in ((1, 0), (0, 1)) and b in ((1, 0), (0, 1)):
                total += 1  # reversal
            else:
                total += abs(a[0] - b[0]) + abs(a[1] - b[1])
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def report_criterion(number, title, ok, detail, seconds=None):
    """Record and print one acceptance line (shown even when output is captured)."""
    timing = "" if seconds is None else f" [{seconds:.1f}s]"
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title}: {detail}{timing}"
    ACCEPTANCE_LINES.append(line)
    import sys

    sys.__stdout__.write("\n" + line + "\n")
    sys.__stdout__.flush()
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
