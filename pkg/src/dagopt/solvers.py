"""Outer loops: augmented Lagrangian (ALM) and quadratic penalty (QPM).

Both loops minimise ``f(B) + alpha*h(B) + rho/2*h(B)^2`` (``alpha`` is held
at zero for QPM) with a warm-started inner solver, then

* QPM: ``rho <- beta * rho`` every iteration;
* ALM: ``alpha <- alpha + rho*h(B_new)`` and ``rho <- beta * rho`` only if
  ``h(B_new) > gamma * h(B_old)``.

They stop once ``h(B) <= h_tol`` (FeasibleTol), once the next penalty would
exceed ``rho_max`` (RhoCap), after ``max_outer`` iterations (MaxOuter), or
when the inner solver diverges to non-finite values (NumericalFailure).
"""

from __future__ import annotations

import dataclasses
import enum
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .constraints import EXP, ConstraintKind, h_value
from .errors import ConfigError, InvalidInputError
from .graphs import count_simple_cycles, threshold
from .objective import Dataset, SplitMatrix, least_squares, merge, penalized_value_grad, split
from .optimizers import OPTIMIZERS, InnerProblem, Status

CYCLE_THRESHOLD = 0.05


class Termination(str, enum.Enum):
    FEASIBLE_TOL = "FeasibleTol"
    RHO_CAP = "RhoCap"
    MAX_OUTER = "MaxOuter"
    NUMERICAL_FAILURE = "NumericalFailure"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolverConfig:
    method: str = "qpm"
    constraint: ConstraintKind = EXP
    rho0: float = 1.0
    beta: float = 10.0
    gamma: float = 0.25
    alpha0: float = 0.0
    h_tol: float = 1e-8
    rho_max: float = 1e16
    tau: float = 1e-6
    tau_decay: float = 1.0
    lam: float = 0.0
    optimizer: str = "lbfgs"
    inner_max_iters: int = 5000
    lbfgs_memory: int = 10
    adam_step: float = 1e-3
    momentum_step: float = 1e-4
    momentum: float = 0.9
    max_outer: int = 100
    threshold: float = 0.3
    cycle_cap: int = 10_000
    timing: bool = True

    def __post_init__(self):
        if isinstance(self.constraint, str):
            try:
                object.__setattr__(self, "constraint", ConstraintKind.parse(self.constraint))
            except InvalidInputError as exc:
                raise ConfigError("constraint", str(exc)) from None
        checks = [
            ("method", self.method in ("alm", "qpm"), "must be 'alm' or 'qpm'"),
            ("optimizer", self.optimizer in OPTIMIZERS, f"must be one of {sorted(OPTIMIZERS)}"),
            ("rho0", self.rho0 > 0, "must be > 0"),
            ("beta", self.beta > 1, "must be > 1"),
            ("gamma", 0 < self.gamma < 1, "must lie in (0, 1)"),
            ("h_tol", self.h_tol > 0, "must be > 0"),
            ("rho_max", self.rho_max > 0, "must be > 0"),
            ("tau", self.tau > 0, "must be > 0"),
            ("tau_decay", self.tau_decay > 0, "must be > 0"),
            ("lam", self.lam >= 0, "must be >= 0"),
            ("inner_max_iters", self.inner_max_iters >= 0, "must be >= 0"),
            ("lbfgs_memory", self.lbfgs_memory >= 1, "must be >= 1"),
            ("adam_step", self.adam_step > 0, "must be > 0"),
            ("momentum_step", self.momentum_step > 0, "must be > 0"),
            ("momentum", 0 <= self.momentum < 1, "must lie in [0, 1)"),
            ("max_outer", self.max_outer >= 0, "must be >= 0"),
            ("threshold", self.threshold >= 0, "must be >= 0"),
            ("cycle_cap", self.cycle_cap >= 1, "must be >= 1"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(name, f"{msg}, got {getattr(self, name)!r}")

    @classmethod
    def from_dict(cls, values: dict) -> "SolverConfig":
        """Build from plain key/value pairs, rejecting unknown keys and bad types."""
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(key, "unknown configuration field")
            default = known[key].default
            try:
                if key == "constraint":
                    kwargs[key] = str(raw)
                elif isinstance(default, bool):
                    if not isinstance(raw, bool):
                        raise TypeError
                    kwargs[key] = raw
                elif isinstance(default, int):
                    if isinstance(raw, bool) or float(raw) != int(raw):
                        raise TypeError
                    kwargs[key] = int(raw)
                elif isinstance(default, float):
                    if isinstance(raw, bool):
                        raise TypeError
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = str(raw).lower()
            except (TypeError, ValueError):
                raise ConfigError(key, f"cannot use {raw!r} as {type(default).__name__}") from None
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["constraint"] = str(self.constraint)
        return out

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def optimizer_options(self) -> dict:
        if self.optimizer == "lbfgs":
            return {"memory": self.lbfgs_memory}
        if self.optimizer == "adam":
            return {"step": self.adam_step}
        return {"step": self.momentum_step, "momentum": self.momentum}


@dataclass
class IterationRecord:
    k: int
    rho: float
    alpha: float
    h: float
    f: float
    l1: float
    inner_iters: int
    inner_status: Status
    grad_norm: float
    cycles_005: int
    cycles_capped: bool
    seconds: Optional[float]
    start: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


@dataclass
class SolveResult:
    weights: np.ndarray
    trace: List[IterationRecord]
    termination: Termination
    adjacency: np.ndarray
    config: SolverConfig
    seconds: Optional[float] = None

    @property
    def h_final(self) -> float:
        return h_value(self.weights, self.config.constraint)

    @property
    def inner_failures(self) -> int:
        return sum(r.inner_status is Status.NUMERICAL_FAILURE for r in self.trace)


def final_convergence_test(B, kind: ConstraintKind = EXP, h_tol: float = 1e-8) -> bool:
    """True iff ``h(B) <= h_tol``."""
    if not h_tol > 0:
        raise InvalidInputError(f"h_tol must be positive, got {h_tol}")
    return h_value(B, kind) <= h_tol


def _inner_problem(data: Dataset, cfg: SolverConfig, rho: float, alpha: float):
    d = data.d
    kind = cfg.constraint
    if cfg.lam > 0:
        def fun(x):
            value, grad = penalized_value_grad(data, SplitMatrix.from_vector(x, d), kind, rho, alpha, cfg.lam)
            return value, grad.ravel()

        return InnerProblem(fun, 2 * d * d, lower=0.0)

    def fun(x):
        value, grad = penalized_value_grad(data, x.reshape(d, d), kind, rho, alpha, 0.0)
        return value, grad.ravel()

    return InnerProblem(fun, d * d)


def _encode(B: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    return split(B).to_vector() if cfg.lam > 0 else B.ravel().copy()


def _decode(x: np.ndarray, d: int, cfg: SolverConfig) -> np.ndarray:
    return merge(SplitMatrix.from_vector(x, d)) if cfg.lam > 0 else x.reshape(d, d).copy()


def _solve(data: Dataset, cfg: SolverConfig, B0=None) -> SolveResult:
    d = data.d
    B = np.zeros((d, d)) if B0 is None else np.array(B0, dtype=float)
    if B.shape != (d, d):
        raise InvalidInputError(f"B0 must be {d}x{d}")
    minimize = OPTIMIZERS[cfg.optimizer]
    options = cfg.optimizer_options()
    alm = cfg.method == "alm"
    rho = cfg.rho0
    alpha = cfg.alpha0 if alm else 0.0
    h_prev = h_value(B, cfg.constraint)
    trace: List[IterationRecord] = []
    termination = Termination.MAX_OUTER
    t_start = time.perf_counter()

    for k in range(1, cfg.max_outer + 1):
        t0 = time.perf_counter()
        tau_k = cfg.tau * cfg.tau_decay ** (k - 1)
        problem = _inner_problem(data, cfg, rho, alpha)
        res = minimize(problem, _encode(B, cfg), tau_k, max_iters=cfg.inner_max_iters, **options)
        B_new = _decode(res.x, d, cfg)
        h_new = h_value(B_new, cfg.constraint)
        cycles, capped = count_simple_cycles(threshold(B_new, CYCLE_THRESHOLD), cap=cfg.cycle_cap,
                                             return_capped=True)
        trace.append(IterationRecord(
            k=k, rho=rho, alpha=alpha, h=h_new, f=least_squares(data, B_new),
            l1=float(np.abs(B_new).sum()), inner_iters=res.iterations, inner_status=res.status,
            grad_norm=res.grad_norm, cycles_005=cycles, cycles_capped=capped,
            seconds=time.perf_counter() - t0 if cfg.timing else None,
            start=B, weights=B_new,
        ))
        B = B_new
        # first-order methods only fail by producing non-finite values; stop
        # on the best finite iterate. L-BFGS failures are line-search stalls.
        if res.status is Status.NUMERICAL_FAILURE and cfg.optimizer != "lbfgs":
            termination = Termination.NUMERICAL_FAILURE
            break
        if h_new <= cfg.h_tol:
            termination = Termination.FEASIBLE_TOL
            break
        if alm:
            alpha = alpha + rho * h_new
            escalate = h_new > cfg.gamma * h_prev
        else:
            escalate = True
        h_prev = h_new
        if escalate:
            rho = cfg.beta * rho
        if rho > cfg.rho_max:
            termination = Termination.RHO_CAP
            break

    return SolveResult(
        weights=B,
        trace=trace,
        termination=termination,
        adjacency=threshold(B, cfg.threshold),
        config=cfg,
        seconds=time.perf_counter() - t_start if cfg.timing else None,
    )


def solve_qpm(data: Dataset, cfg: SolverConfig = SolverConfig(), B0=None) -> SolveResult:
    if cfg.method != "qpm":
        raise InvalidInputError(f"solve_qpm needs method='qpm', got {cfg.method!r}")
    return _solve(data, cfg, B0)


def solve_alm(data: Dataset, cfg: SolverConfig = SolverConfig(method="alm"), B0=None) -> SolveResult:
    if cfg.method != "alm":
        raise InvalidInputError(f"solve_alm needs method='alm', got {cfg.method!r}")
    return _solve(data, cfg, B0)


def solve(data: Dataset, cfg: SolverConfig, B0=None) -> SolveResult:
    return _solve(data, cfg, B0)
