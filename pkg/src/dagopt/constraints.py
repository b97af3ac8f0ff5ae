"""Smooth acyclicity constraints on weighted adjacency matrices.

Two characterisations are provided, both zero exactly when the nonzero
pattern of ``B`` is a DAG:

``exp``
    ``h(B) = tr(exp(B * B)) - d``
``bin``
    ``h(B) = tr((I + c B * B)^d) - d`` with scale ``c > 0``

``B * B`` is the elementwise square. Entry ``B[i, j]`` is the weight of
the edge ``i -> j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NumericOverflowError

# exp(400) overflows nothing by itself, but entries of B*B beyond this make
# tr(exp(B*B)) meaningless for the solver; surface it instead of returning inf.
EXP_ENTRY_LIMIT = 20.0


@dataclass(frozen=True)
class ConstraintKind:
    """Which acyclicity function to use.

    ``c`` only matters for ``"bin"``; ``None`` means ``1/d`` at evaluation time.
    """

    name: str = "exp"
    c: Optional[float] = None

    def __post_init__(self):
        if self.name not in ("exp", "bin"):
            raise InvalidInputError(f"unknown constraint kind {self.name!r}")
        if self.c is not None:
            if self.name != "bin":
                raise InvalidInputError("scale c is only meaningful for the 'bin' constraint")
            if not np.isfinite(self.c) or self.c <= 0:
                raise InvalidInputError(f"binomial scale c must be > 0, got {self.c}")

    @classmethod
    def parse(cls, text: str) -> "ConstraintKind":
        """Parse ``"exp"``, ``"bin"`` or ``"bin:<c>"``."""
        text = text.strip().lower()
        if text.startswith("bin:"):
            try:
                c = float(text[4:])
            except ValueError:
                raise InvalidInputError(f"bad binomial scale in {text!r}") from None
            return cls("bin", c)
        return cls(text)

    def scale(self, d: int) -> float:
        return self.c if self.c is not None else 1.0 / d

    def __str__(self):
        if self.name == "bin" and self.c is not None:
            return f"bin:{self.c!r}"
        return self.name


EXP = ConstraintKind("exp")
BIN = ConstraintKind("bin")


@dataclass(frozen=True)
class RegularityReport:
    h_value: float
    grad_frobenius_norm: float
    is_feasible_at_tol: bool
    gradient_vanishes_at_tol: bool
    tol_h: float
    tol_grad: float


def _check_square(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise InvalidInputError("matrix has non-finite entries")
    return B


def matrix_exp(M) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade approximant."""
    M = _check_square(M)
    with np.errstate(over="ignore", invalid="ignore"):
        E = scipy.linalg.expm(M)
    if not np.all(np.isfinite(E)):
        norm = np.linalg.norm(M, 1)
        raise NumericOverflowError(f"matrix exponential overflowed (1-norm of input {norm:.6g})")
    return E


def _kernel(B: np.ndarray, kind: ConstraintKind):
    """Return ``(K, scale)`` with ``h = tr(K) - d`` before the power step."""
    W2 = B * B
    d = B.shape[0]
    if kind.name == "exp":
        peak = W2.max(initial=0.0)
        if peak > EXP_ENTRY_LIMIT:
            raise NumericOverflowError(
                f"entry of B*B is {peak:.6g} > {EXP_ENTRY_LIMIT}; exp constraint would overflow"
            )
        return matrix_exp(W2)
    c = kind.scale(d)
    with np.errstate(over="ignore", invalid="ignore"):
        K = np.linalg.matrix_power(np.eye(d) + c * W2, d - 1)
    if not np.all(np.isfinite(K)):
        raise NumericOverflowError(
            f"(I + cB*B)^(d-1) overflowed (max |B| = {np.abs(B).max():.6g}, c = {c:.6g})"
        )
    return K


def h_value(B, kind: ConstraintKind = EXP) -> float:
    """Acyclicity constraint value; zero iff the support of ``B`` is a DAG."""
    B = _check_square(B)
    return h_value_grad(B, kind)[0]


def h_grad(B, kind: ConstraintKind = EXP) -> np.ndarray:
    """Analytic gradient of :func:`h_value` with respect to ``B``."""
    B = _check_square(B)
    return h_value_grad(B, kind)[1]


def h_value_grad(B, kind: ConstraintKind = EXP):
    """Value and gradient together, sharing one matrix function evaluation.

    exp: ``grad = exp(B*B).T * 2B``; bin: ``grad = [(I + cB*B)^(d-1)].T * 2dcB``.
    """
    B = np.asarray(B, dtype=float)
    d = B.shape[0]
    K = _kernel(B, kind)
    if kind.name == "exp":
        h = np.trace(K) - d
        G = K.T * (2.0 * B)
    else:
        c = kind.scale(d)
        # (I + cM)^d = (I + cM)^(d-1) (I + cM)
        full = K @ (np.eye(d) + c * (B * B))
        h = np.trace(full) - d
        G = K.T * (2.0 * d * c * B)
    if not np.isfinite(h):
        raise NumericOverflowError("constraint value is not finite")
    return float(h), G


def regularity_probe(B, kind: ConstraintKind = EXP, tol_h: float = 1e-10,
                     tol_grad: float = 1e-8) -> RegularityReport:
    """Check feasibility and the size of the constraint Jacobian at ``B``.

    The Jacobian of a scalar constraint is the single row ``vec(grad h)``;
    it has full rank iff it is nonzero. At feasible points of these
    constraints the gradient vanishes, so no feasible point is regular.
    """
    if tol_h <= 0 or tol_grad <= 0:
        raise InvalidInputError("tolerances must be positive")
    B = _check_square(B)
    h, G = h_value_grad(B, kind)
    gnorm = float(np.linalg.norm(G))
    return RegularityReport(
        h_value=h,
        grad_frobenius_norm=gnorm,
        is_feasible_at_tol=h <= tol_h,
        gradient_vanishes_at_tol=gnorm <= tol_grad,
        tol_h=tol_h,
        tol_grad=tol_grad,
    )
