"""Clamped-ratio loss and its closed-form gradients.

For a point x whose true class is j, every rival class k contributes
``max(alpha[j, k], f_j(x) / f_k(x))``. The loss is the plain sum of these
terms over a batch. Where the ratio exceeds its floor the term is smooth and

    d/dA_j  =  2 (A_j x - b_j) x^T / f_k(x)
    d/dA_k  = -2 f_j(x) (A_k x - b_k) x^T / f_k(x)^2

with the b-derivatives equal to minus the same expressions without ``x^T``.
At the floor (ratio <= alpha, boundary included) the term is flat.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .errors import NumericalError, ShapeError
from .model import QmsModel, _squared_norms, member_values

#: Denominators f_k(x) are replaced by max(f_k(x), DEN_EPS).
DEN_EPS = 1e-12


def phi_jk(fj: float, fk: float, alpha_jk: float) -> float:
    """``max(alpha_jk, fj / fk)`` with a guarded denominator."""
    return max(alpha_jk, fj / max(fk, DEN_EPS))


def clamp_indicator(fi: float, fj: float, alpha_ij: float) -> int:
    """1 where the guarded ratio ``fi / fj`` strictly exceeds ``alpha_ij``."""
    return int(fi / max(fj, DEN_EPS) > alpha_ij)


@dataclass(frozen=True, eq=False)
class ClassPartitionedBatch:
    """A mini-batch together with its true labels.

    ``X`` is (p, n) and ``labels`` holds class indices in ``0..m-1``. The
    per-class blocks are views derived from these two arrays.
    """

    X: np.ndarray
    labels: np.ndarray
    m: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or labels.shape != (X.shape[1],):
            raise ShapeError(f"batch X {X.shape} and labels {labels.shape} disagree")
        if labels.size and (labels.min() < 0 or labels.max() >= self.m):
            raise ShapeError(f"batch labels must lie in 0..{self.m - 1}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_blocks(cls, blocks) -> ClassPartitionedBatch:
        blocks = [np.asarray(b, dtype=np.float64) for b in blocks]
        rows = {b.shape[0] for b in blocks}
        if len(rows) != 1:
            raise ShapeError(f"blocks must share the row count p, got {sorted(rows)}")
        X = np.hstack(blocks)
        labels = np.concatenate([np.full(b.shape[1], j) for j, b in enumerate(blocks)])
        return cls(X, labels, len(blocks))

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def size(self) -> int:
        return self.X.shape[1]

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.m)

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.X[:, self.labels == j] for j in range(self.m)]


@dataclass(frozen=True, eq=False)
class GradientSet:
    """Loss gradients, stacked like the model: ``dA`` is (m, q, p), ``db`` is (m, q)."""

    dA: np.ndarray
    db: np.ndarray

    def __iter__(self):
        return iter(zip(self.dA, self.db))

    def __len__(self):
        return self.dA.shape[0]


def _check(model: QmsModel, batch: ClassPartitionedBatch):
    if batch.p != model.p:
        raise ShapeError(f"batch has p={batch.p} features, model expects p={model.p}")
    if batch.m != model.m:
        raise ShapeError(f"batch is partitioned into {batch.m} classes, model has m={model.m}")


def _ratio_terms(F: np.ndarray, labels: np.ndarray, alpha: np.ndarray):
    """Ratios f_y(x)/f_k(x), rival mask and active indicators for every (k, x)."""
    n = labels.shape[0]
    cols = np.arange(n)
    f_own = F[labels, cols]
    den = np.maximum(F, DEN_EPS)
    ratio = f_own[None, :] / den
    rival = np.ones_like(F, dtype=bool)
    rival[labels, cols] = False
    floor = alpha[labels].T  # floor[k, x] = alpha[y(x), k]
    active = rival & (ratio > floor)
    return f_own, den, ratio, rival, floor, active


def _total(ratio, rival, floor) -> float:
    # Correctly rounded sum, so the value does not depend on batch order and
    # an all-clamped batch gives exactly alpha * n * (m - 1).
    return math.fsum(np.maximum(floor, ratio)[rival].tolist())


def loss_arrays(weights, offsets, alpha, X, labels) -> float:
    """Loss for stacked parameters; see :func:`loss`."""
    if X.shape[1] == 0:
        return 0.0
    F = member_values(weights, offsets, X)
    _, _, ratio, rival, floor, _ = _ratio_terms(F, labels, alpha)
    return _total(ratio, rival, floor)


def loss_and_gradients_arrays(weights, offsets, alpha, X, labels):
    """Loss value and (dA, db) for stacked parameters, from one member table."""
    n = X.shape[1]
    if n == 0:
        return 0.0, np.zeros_like(weights), np.zeros_like(offsets)
    with np.errstate(over="ignore", invalid="ignore"):
        R = np.matmul(weights, X)
        R -= offsets[:, :, None]  # R[i] = A_i X - b_i, shape (m, q, n)
        F = _squared_norms(R)
        f_own, den, ratio, rival, floor, active = _ratio_terms(F, labels, alpha)
        value = _total(ratio, rival, floor)

        # coef[i, x] multiplies d f_i(x): own class gets sum_k I/f_k, a rival k
        # gets -I f_y / f_k^2.
        inv = np.where(active, 1.0 / den, 0.0)
        coef = -inv * ratio
        coef[labels, np.arange(n)] = inv.sum(axis=0)

        G = R * coef[:, None, :]  # (m, q, n)
        dA, db = _accumulate(G, X)
    if not (np.isfinite(dA).all() and np.isfinite(db).all()) or not np.isfinite(value):
        raise NumericalError("non-finite loss or gradient; a denominator guard was bypassed")
    return value, dA, db


def _accumulate(G: np.ndarray, X: np.ndarray):
    """Per-point gradient contributions summed in ascending batch order.

    A plain loop rather than a BLAS product, so every entry is the same
    left-to-right sum a scalar reference would compute.
    """
    m, q, n = G.shape
    gA = np.zeros((m, q, X.shape[0]))
    gb = np.zeros((m, q))
    for j in range(n):
        gj = G[:, :, j]
        gA += gj[:, :, None] * X[:, j]
        gb += gj
    return 2.0 * gA, -2.0 * gb


def loss(model: QmsModel, batch: ClassPartitionedBatch) -> float:
    """Sum over batch points x and rival classes k of max(alpha[y, k], f_y(x)/f_k(x))."""
    _check(model, batch)
    return loss_arrays(model.weights, model.offsets, model.alpha, batch.X, batch.labels)


def gradients(model: QmsModel, batch: ClassPartitionedBatch) -> GradientSet:
    """Analytic gradient of :func:`loss` with respect to every A_i and b_i."""
    _check(model, batch)
    _, dA, db = loss_and_gradients_arrays(model.weights, model.offsets, model.alpha,
                                          batch.X, batch.labels)
    return GradientSet(dA, db)
