"""Least-squares score and the penalised objectives built on top of it."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .constraints import EXP, ConstraintKind, h_value_grad
from .errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``n x d`` design matrix plus how it was generated.

    ``ground_truth`` is the binary adjacency of the generating DAG and
    ``true_weights`` its coefficients, when known.
    """

    X: np.ndarray
    ground_truth: Optional[np.ndarray] = None
    true_weights: Optional[np.ndarray] = None
    seed: Optional[int] = None
    noise_std: float = 1.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise InvalidInputError(f"design matrix must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1 or d < 2:
            raise InvalidInputError(f"need n >= 1 and d >= 2, got n={n}, d={d}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("design matrix has non-finite entries")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.ground_truth is not None:
            from .graphs import is_dag

            G = (np.asarray(self.ground_truth) != 0).astype(int)
            if G.shape != (d, d):
                raise InvalidInputError(f"ground truth must be {d}x{d}, got {G.shape}")
            if not is_dag(G):
                raise InvalidInputError("ground truth graph is cyclic")
            G.setflags(write=False)
            object.__setattr__(self, "ground_truth", G)
        if self.true_weights is not None:
            W = np.array(self.true_weights, dtype=float)
            W.setflags(write=False)
            object.__setattr__(self, "true_weights", W)
        if not self.noise_std > 0:
            raise InvalidInputError(f"noise_std must be positive, got {self.noise_std}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @cached_property
    def gram(self) -> np.ndarray:
        """``X.T @ X / n``; every score evaluation works through this."""
        S = self.X.T @ self.X / self.n
        S.setflags(write=False)
        return S


@dataclass(frozen=True)
class SplitMatrix:
    """``B = pos - neg`` with both parts elementwise nonnegative."""

    pos: np.ndarray
    neg: np.ndarray

    @property
    def l1(self) -> float:
        return float(self.pos.sum() + self.neg.sum())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.pos.ravel(), self.neg.ravel()])

    @classmethod
    def from_vector(cls, x: np.ndarray, d: int) -> "SplitMatrix":
        m = d * d
        return cls(x[:m].reshape(d, d), x[m:].reshape(d, d))


def split(B) -> SplitMatrix:
    B = np.asarray(B, dtype=float)
    return SplitMatrix(np.maximum(B, 0.0), np.maximum(-B, 0.0))


def merge(S: SplitMatrix) -> np.ndarray:
    return S.pos - S.neg


def _gram_of(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.gram
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError(f"design matrix must be 2-D, got shape {X.shape}")
    return X.T @ X / X.shape[0]


def _residual_op(S: np.ndarray, B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    d = S.shape[0]
    if B.shape != (d, d):
        raise InvalidInputError(f"B must be {d}x{d} to match the data, got {B.shape}")
    return np.eye(d) - B


def least_squares(data: Union[Dataset, np.ndarray], B) -> float:
    """``||X - XB||_F^2 / (2n)``, evaluated as ``tr(R.T S R) / 2`` with ``R = I - B``."""
    S = _gram_of(data)
    R = _residual_op(S, B)
    return max(0.5 * float(np.sum((S @ R) * R)), 0.0)


def least_squares_grad(data: Union[Dataset, np.ndarray], B) -> np.ndarray:
    """``-X.T (X - XB) / n``."""
    S = _gram_of(data)
    R = _residual_op(S, B)
    return -(S @ R)


def penalized_value_grad(data, params, kind: ConstraintKind = EXP, rho: float = 0.0,
                         alpha: float = 0.0, lam: float = 0.0):
    """Value and gradient of ``f + alpha*h + rho/2*h^2 + lam*l1``.

    ``params`` is either a plain ``d x d`` matrix (requires ``lam == 0``) or a
    :class:`SplitMatrix`; in the split case the gradient has shape
    ``(2, d, d)`` holding the derivatives with respect to ``pos`` and ``neg``.
    """
    if rho < 0 or lam < 0:
        raise InvalidInputError("rho and lam must be nonnegative")
    is_split = isinstance(params, SplitMatrix)
    if lam > 0 and not is_split:
        raise InvalidInputError("an l1 weight needs the split parameterisation")
    B = merge(params) if is_split else np.asarray(params, dtype=float)

    value = least_squares(data, B)
    G = least_squares_grad(data, B)
    if rho != 0.0 or alpha != 0.0:
        h, Gh = h_value_grad(B, kind)
        value = value + alpha * h + 0.5 * rho * h * h
        G = G + (rho * h + alpha) * Gh
    if not is_split:
        return value, G
    if lam != 0.0:
        value = value + lam * params.l1
    return value, np.stack([G + lam, -G + lam])
