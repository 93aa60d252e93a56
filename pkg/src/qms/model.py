"""Member functions, the argmin classifier and the model container.

A member function is ``f(x) = ||A x - b||^2`` with ``A`` of shape (q, p) and
``b`` of length q. A model holds one member function per class and assigns
an observation to the class whose member function is smallest there.

Observations are stored column-wise: a feature matrix has shape (p, n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import ScalerParams
from .errors import ConfigError, ShapeError


@dataclass(frozen=True, eq=False)
class MemberFunctionParams:
    """One class's ``(A, b)`` pair."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ShapeError(f"A must be a non-empty 2-D matrix, got shape {A.shape}")
        if b.shape != (A.shape[0],):
            raise ShapeError(f"b must have length q={A.shape[0]}, got shape {b.shape}")
        if not (np.isfinite(A).all() and np.isfinite(b).all()):
            raise ConfigError("member function parameters must be finite")
        A.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def q(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    def __eq__(self, other):
        if not isinstance(other, MemberFunctionParams):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.b, other.b)


def alpha_matrix(alpha, m: int) -> np.ndarray:
    """Expand a scalar or validate an (m, m) matrix of clamp floors.

    Off-diagonal entries must lie in [0, 1). The diagonal is never used and is
    forced to zero.
    """
    if np.ndim(alpha) == 0:
        a = float(alpha)
        if not (0.0 <= a < 1.0):
            raise ConfigError(f"alpha must satisfy 0 <= alpha < 1, got {a}")
        out = np.full((m, m), a)
    else:
        out = np.array(alpha, dtype=np.float64)
        if out.shape != (m, m):
            raise ShapeError(f"alpha matrix must be {m}x{m}, got shape {out.shape}")
        off = ~np.eye(m, dtype=bool)
        vals = out[off]
        if not (np.isfinite(vals).all() and (vals >= 0).all() and (vals < 1).all()):
            raise ConfigError("alpha entries off the diagonal must satisfy 0 <= alpha < 1")
    np.fill_diagonal(out, 0.0)
    return out


def param_count(q: int, p: int, m: int) -> int:
    """Number of scalar weights in a model: ``q*p*m`` for the A's plus ``q*m`` for the b's."""
    return q * m * (p + 1)


def _squared_norms(R: np.ndarray) -> np.ndarray:
    # Sum of squares over axis -2, accumulated in ascending row order so the
    # result does not depend on numpy's pairwise-summation blocking.
    out = R[..., 0, :] * R[..., 0, :]
    for k in range(1, R.shape[-2]):
        out += R[..., k, :] * R[..., k, :]
    return out


def member_values(weights: np.ndarray, offsets: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Table of member-function values for stacked parameters.

    ``weights`` is (m, q, p), ``offsets`` is (m, q) and ``X`` is (p, n).
    Returns an (m, n) array whose entry (i, k) is f_i evaluated at column k.
    """
    R = np.matmul(weights, X)
    R -= offsets[:, :, None]
    return _squared_norms(R)


def _as_matrix(X, p: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D (p x n), got shape {X.shape}")
    if X.shape[0] != p:
        raise ShapeError(f"feature matrix has {X.shape[0]} rows, expected p={p}")
    if X.shape[1] < 1:
        raise ShapeError("feature matrix must have at least one column")
    return X


def _as_vector(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p,):
        actual = x.shape[0] if x.ndim == 1 else x.shape
        raise ShapeError(f"feature vector has length {actual}, expected p={p}")
    return x


def member_eval_batch(params: MemberFunctionParams, X) -> np.ndarray:
    """Evaluate one member function on every column of a (p, n) matrix."""
    X = _as_matrix(X, params.p)
    R = params.A @ X
    R -= params.b[:, None]
    return _squared_norms(R)


def member_eval(params: MemberFunctionParams, x) -> float:
    """Evaluate ``||A x - b||^2`` at a single point."""
    x = _as_vector(x, params.p)
    return float(member_eval_batch(params, x[:, None])[0])


@dataclass(frozen=True, eq=False)
class QmsModel:
    """A trained (or freshly initialised) classifier.

    Parameters are held stacked: ``weights[i]`` is A_i and ``offsets[i]`` is
    b_i. Instances are immutable; all arrays are read-only.
    """

    weights: np.ndarray
    offsets: np.ndarray
    alpha: np.ndarray
    class_names: tuple[str, ...]
    scaler: ScalerParams | None = None
    feature_names: tuple[str, ...] | None = None
    categories: dict[str, tuple[str, ...]] | None = field(default=None)

    def __post_init__(self):
        W = np.array(self.weights, dtype=np.float64)
        c = np.array(self.offsets, dtype=np.float64)
        if W.ndim != 3 or min(W.shape) < 1:
            raise ShapeError(f"weights must be (m, q, p), got shape {W.shape}")
        m, q, p = W.shape
        if m < 2:
            raise ConfigError(f"a model needs at least two classes, got m={m}")
        if c.shape != (m, q):
            raise ShapeError(f"offsets must be ({m}, {q}), got shape {c.shape}")
        if not (np.isfinite(W).all() and np.isfinite(c).all()):
            raise ConfigError("model parameters must be finite")
        alpha = alpha_matrix(self.alpha, m)
        names = tuple(str(s) for s in self.class_names)
        if len(names) != m or len(set(names)) != m:
            raise ConfigError(f"class_names must hold {m} unique labels, got {list(names)}")
        if self.scaler is not None and self.scaler.mean.shape != (p,):
            raise ShapeError(f"scaler covers {self.scaler.mean.shape[0]} features, expected p={p}")
        if self.feature_names is not None:
            fnames = tuple(str(s) for s in self.feature_names)
            if len(fnames) != p:
                raise ShapeError(f"feature_names has {len(fnames)} entries, expected p={p}")
            object.__setattr__(self, "feature_names", fnames)
        if self.categories is not None:
            cats = {str(k): tuple(str(v) for v in vals) for k, vals in self.categories.items()}
            object.__setattr__(self, "categories", cats)
        for arr in (W, c, alpha):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "offsets", c)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "class_names", names)

    @classmethod
    def from_members(cls, members, alpha, class_names, **kwargs) -> QmsModel:
        members = list(members)
        shapes = {mp.A.shape for mp in members}
        if len(shapes) != 1:
            raise ShapeError(f"all member functions must share (q, p), got {sorted(shapes)}")
        W = np.stack([mp.A for mp in members])
        c = np.stack([mp.b for mp in members])
        return cls(W, c, alpha, tuple(class_names), **kwargs)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def q(self) -> int:
        return self.weights.shape[1]

    @property
    def p(self) -> int:
        return self.weights.shape[2]

    @property
    def members(self) -> tuple[MemberFunctionParams, ...]:
        return tuple(MemberFunctionParams(A, b) for A, b in zip(self.weights, self.offsets))

    @property
    def n_params(self) -> int:
        return self.weights.size + self.offsets.size

    def replace_params(self, weights, offsets) -> QmsModel:
        """Same metadata, new parameters."""
        return QmsModel(weights, offsets, self.alpha, self.class_names, self.scaler,
                        self.feature_names, self.categories)

    def scaled(self, c: float) -> QmsModel:
        """Multiply every A_i and b_i by ``c``."""
        return self.replace_params(c * self.weights, c * self.offsets)

    def transform(self, X) -> np.ndarray:
        """Map raw (p, n) features into model space using the stored scaler."""
        X = _as_matrix(X, self.p)
        if self.scaler is None:
            return X
        return self.scaler.apply(X)

    def member_values(self, X) -> np.ndarray:
        """(m, n) table of f_i over the columns of X (already in model space)."""
        return member_values(self.weights, self.offsets, _as_matrix(X, self.p))

    def __eq__(self, other):
        if not isinstance(other, QmsModel):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.alpha, other.alpha)
            and self.class_names == other.class_names
            and self.scaler == other.scaler
            and self.feature_names == other.feature_names
            and self.categories == other.categories
        )


def predict_batch(model: QmsModel, X) -> np.ndarray:
    """Class index of the smallest member function for each column of X.

    Ties resolve to the lowest class index.
    """
    return np.argmin(model.member_values(X), axis=0)


def predict(model: QmsModel, x) -> int:
    x = _as_vector(x, model.p)
    return int(predict_batch(model, x[:, None])[0])
