"""Inner minimisers for the penalty subproblems.

All three solvers work on flat vectors, accept an optional lower bound
(used by the split ``B = P - Q`` parameterisation) and stop once the
Euclidean norm of the projected gradient drops to the tolerance.
Everything is full-batch and deterministic.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import InvalidInputError


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    NUMERICAL_FAILURE = "NumericalFailure"

    def __str__(self):
        return self.value


@dataclass
class InnerProblem:
    """Value-and-gradient callback on vectors of length ``dim``.

    Arithmetic errors raised by ``fun`` (for instance an overflow guard in
    the constraint) are reported as an infinite value so line searches can
    back off and first-order methods can stop cleanly.
    """

    fun: Callable[[np.ndarray], Tuple[float, np.ndarray]]
    dim: int
    lower: Optional[np.ndarray] = None
    evaluations: int = 0

    def __post_init__(self):
        if self.lower is not None:
            self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()

    def evaluate(self, x: np.ndarray):
        self.evaluations += 1
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                f, g = self.fun(x)
        except ArithmeticError:
            return np.inf, None
        g = np.asarray(g, dtype=float).ravel()
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return np.inf, None
        return float(f), g

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.lower is None:
            return x
        return np.maximum(x, self.lower)

    def projected_gradient(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.lower is None:
            return g
        at_bound = x <= self.lower
        return np.where(at_bound, np.minimum(g, 0.0), g)


@dataclass
class InnerResult:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    status: Status
    evaluations: int = 0
    steps: List[dict] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def _start(problem: InnerProblem, x0) -> np.ndarray:
    x = np.array(x0, dtype=float).ravel()
    if x.shape != (problem.dim,):
        raise InvalidInputError(f"x0 has length {x.size}, expected {problem.dim}")
    if problem.lower is not None and np.any(x < problem.lower):
        raise InvalidInputError("x0 violates the lower bound")
    return x


def _check_tol(tol, max_iters):
    if not tol > 0:
        raise InvalidInputError(f"tolerance must be positive, got {tol}")
    if max_iters < 0:
        raise InvalidInputError("max_iters must be nonnegative")


# -- line search -------------------------------------------------------------

def _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi):
    """Cubic minimiser on [a_lo, a_hi], safeguarded to the interval interior."""
    lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
    width = hi - lo
    guess = None
    if np.isfinite(f_hi) and d_hi is not None:
        d1 = d_lo + d_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
        rad = d1 * d1 - d_lo * d_hi
        if rad >= 0:
            d2 = np.copysign(np.sqrt(rad), a_hi - a_lo)
            denom = d_hi - d_lo + 2.0 * d2
            if denom != 0:
                guess = a_hi - (a_hi - a_lo) * (d_hi + d2 - d1) / denom
    if guess is None or not np.isfinite(guess):
        guess = 0.5 * (lo + hi)
    return min(max(guess, lo + 0.1 * width), hi - 0.1 * width)


def _wolfe_search(phi, f0, dphi0, a_init, a_max, c1, c2, max_evals=60):
    """Strong-Wolfe line search on ``(0, a_max]``.

    ``phi(a)`` returns ``(f, dphi, payload)``. A step equal to ``a_max`` (a
    bound becomes active) is accepted on sufficient decrease alone. Returns
    ``(a, f, payload, capped)`` or ``None`` when no acceptable step is found.

    Once the change in ``f`` is at rounding level, the Armijo test is
    replaced by its derivative form ``dphi(a) <= (2 c1 - 1) dphi0`` (the
    approximate Wolfe condition), provided ``f`` rises by at most
    ``f_slack``; function values alone cannot certify decrease there.
    """
    f_slack = 1e-12 * abs(f0)

    def armijo(a, fa, da):
        if fa <= f0 + c1 * a * dphi0:
            return True
        return fa <= f0 + f_slack and da is not None and da <= (2.0 * c1 - 1.0) * dphi0

    evals = 0

    def zoom(a_lo, f_lo, d_lo, p_lo, a_hi, f_hi, d_hi):
        nonlocal evals
        while evals < max_evals:
            if abs(a_hi - a_lo) <= 1e-14 * max(a_lo, a_hi):
                return None
            a = _interpolate(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
            fa, da, pa = phi(a)
            evals += 1
            if not armijo(a, fa, da) or fa > f_lo + f_slack:
                a_hi, f_hi, d_hi = a, fa, da
                continue
            if abs(da) <= -c2 * dphi0:
                return a, fa, pa, False
            if da * (a_hi - a_lo) >= 0:
                a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
            a_lo, f_lo, d_lo, p_lo = a, fa, da, pa
        return None

    a_prev, f_prev, d_prev, p_prev = 0.0, f0, dphi0, None
    a = min(a_init, a_max)
    first = True
    while evals < max_evals:
        fa, da, pa = phi(a)
        evals += 1
        if not armijo(a, fa, da) or (not first and fa > f_prev + f_slack):
            return zoom(a_prev, f_prev, d_prev, p_prev, a, fa, da)
        if abs(da) <= -c2 * dphi0:
            return a, fa, pa, False
        if da >= 0:
            return zoom(a, fa, da, pa, a_prev, f_prev, d_prev)
        if a >= a_max:
            return a, fa, pa, True
        a_prev, f_prev, d_prev, p_prev = a, fa, da, pa
        a = min(2.0 * a, a_max)
        first = False
    return None


def _two_loop(q, pairs, mask):
    q = q.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s * mask, q)
        alphas.append(a)
        q -= a * (y * mask)
    if pairs:
        s, y, _ = pairs[-1]
        ym = y * mask
        yy = np.dot(ym, ym)
        if yy > 0:
            q *= np.dot(s * mask, ym) / yy
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y * mask, q)
        q += (a - b) * (s * mask)
    return q


def minimize_lbfgs(problem: InnerProblem, x0, tol: float, max_iters: int = 5000,
                   memory: int = 10, c1: float = 1e-4, c2: float = 0.9,
                   record_steps: bool = False) -> InnerResult:
    """Limited-memory BFGS with gradient projection for lower bounds.

    Variables sitting on their bound with an outward-pointing gradient are
    frozen for the iteration; the quasi-Newton direction is built on the
    remaining ones and the step is capped where the first frozen-to-be
    variable reaches its bound.
    """
    _check_tol(tol, max_iters)
    x = _start(problem, x0)
    start_evals = problem.evaluations
    f, g = problem.evaluate(x)
    if g is None:
        return InnerResult(x, np.inf, np.inf, 0, Status.NUMERICAL_FAILURE, problem.evaluations - start_evals)
    lower = problem.lower
    pairs = deque(maxlen=memory)
    steps = []
    status = Status.MAX_ITERS
    it = 0
    while True:
        pg_norm = float(np.linalg.norm(problem.projected_gradient(x, g)))
        if pg_norm <= tol:
            status = Status.CONVERGED
            break
        if it >= max_iters:
            break
        if lower is None:
            free = np.ones_like(x)
        else:
            free = (~((x <= lower) & (g > 0))).astype(float)

        accepted = None
        for attempt in (0, 1):
            if attempt == 1:
                if not pairs:
                    break
                pairs.clear()
            if pairs:
                d = -_two_loop(g * free, pairs, free)
            else:
                d = -g * free
            dphi0 = float(np.dot(g, d))
            if not np.isfinite(dphi0) or dphi0 >= 0:
                pairs.clear()
                d = -g * free
                dphi0 = float(np.dot(g, d))
            a_max = np.inf
            if lower is not None:
                shrinking = d < 0
                if np.any(shrinking):
                    a_max = float(np.min((x[shrinking] - lower[shrinking]) / -d[shrinking]))
            if a_max <= 0:
                break
            a_init = 1.0 if pairs else min(1.0, 1.0 / float(np.linalg.norm(d)))

            def phi(a, d=d):
                xa = problem.project(x + a * d)
                fa, ga = problem.evaluate(xa)
                if ga is None:
                    return np.inf, None, None
                return fa, float(np.dot(ga, d)), (xa, ga)

            ls = _wolfe_search(phi, f, dphi0, a_init, a_max, c1, c2)
            if ls is not None:
                accepted = (ls, d, dphi0)
                break
        if accepted is None:
            status = Status.NUMERICAL_FAILURE
            break
        (a, f_new, (x_new, g_new), capped), d, dphi0 = accepted
        if capped and lower is not None:
            hit = (d < 0) & (x_new - lower <= 1e-12 * np.maximum(1.0, np.abs(lower)))
            x_new = np.where(hit, lower, x_new)
        if record_steps:
            steps.append(dict(step=a, f0=f, dphi0=dphi0, f=f_new,
                              dphi=float(np.dot(g_new, d)), capped=capped))
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        it += 1
    pg_norm = float(np.linalg.norm(problem.projected_gradient(x, g)))
    return InnerResult(x, f, pg_norm, it, status, problem.evaluations - start_evals, steps)


def _first_order(problem, x0, tol, max_iters, update):
    """Shared loop for Adam and heavy-ball momentum.

    ``update(x, g, t)`` returns the next iterate. On a non-finite evaluation
    the lowest-valued iterate seen so far is returned with NumericalFailure.
    """
    _check_tol(tol, max_iters)
    x = _start(problem, x0)
    start_evals = problem.evaluations
    f, g = problem.evaluate(x)
    if g is None:
        return InnerResult(x, np.inf, np.inf, 0, Status.NUMERICAL_FAILURE, problem.evaluations - start_evals)
    t = 0
    best = (f, x, g)
    while True:
        pg_norm = float(np.linalg.norm(problem.projected_gradient(x, g)))
        if pg_norm <= tol:
            return InnerResult(x, f, pg_norm, t, Status.CONVERGED, problem.evaluations - start_evals)
        if t >= max_iters:
            return InnerResult(x, f, pg_norm, t, Status.MAX_ITERS, problem.evaluations - start_evals)
        with np.errstate(over="ignore", invalid="ignore"):
            x_new = problem.project(update(x, g, t + 1))
        f_new, g_new = problem.evaluate(x_new) if np.all(np.isfinite(x_new)) else (np.inf, None)
        if g_new is None:
            f, x, g = best
            pg_norm = float(np.linalg.norm(problem.projected_gradient(x, g)))
            return InnerResult(x, f, pg_norm, t, Status.NUMERICAL_FAILURE, problem.evaluations - start_evals)
        x, f, g = x_new, f_new, g_new
        if f < best[0]:
            best = (f, x, g)
        t += 1


def minimize_adam(problem: InnerProblem, x0, tol: float, max_iters: int = 5000,
                  step: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8) -> InnerResult:
    m = np.zeros(problem.dim)
    v = np.zeros(problem.dim)

    def update(x, g, t):
        m[:] = beta1 * m + (1 - beta1) * g
        v[:] = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        return x - step * m_hat / (np.sqrt(v_hat) + eps)

    return _first_order(problem, x0, tol, max_iters, update)


def minimize_momentum(problem: InnerProblem, x0, tol: float, max_iters: int = 5000,
                      step: float = 1e-4, momentum: float = 0.9) -> InnerResult:
    """Heavy-ball gradient descent: ``v <- mu*v - step*g``, ``x <- x + v``."""
    vel = np.zeros(problem.dim)

    def update(x, g, t):
        vel[:] = momentum * vel - step * g
        return x + vel

    return _first_order(problem, x0, tol, max_iters, update)


OPTIMIZERS = {
    "lbfgs": minimize_lbfgs,
    "adam": minimize_adam,
    "momentum": minimize_momentum,
}
