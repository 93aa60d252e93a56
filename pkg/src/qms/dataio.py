"""Dataset loading, z-score standardization, splitting and k-fold generation."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, ShapeError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScalerParams:
    """Per-feature mean and (population) standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        std = np.array(self.std, dtype=np.float64)
        if mean.ndim != 1 or mean.shape != std.shape:
            raise ShapeError(f"scaler mean/std shapes differ: {mean.shape} vs {std.shape}")
        if not (np.isfinite(mean).all() and np.isfinite(std).all()) or (std <= 0).any():
            raise DataError("scaler std entries must be finite and positive")
        mean.flags.writeable = False
        std.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean[:, None]) / self.std[:, None]

    def invert(self, Z: np.ndarray) -> np.ndarray:
        return Z * self.std[:, None] + self.mean[:, None]

    def __eq__(self, other):
        if not isinstance(other, ScalerParams):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.std, other.std)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Features stored column-wise, ``X.shape == (p, n)``, with integer labels."""

    X: np.ndarray
    y: np.ndarray
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2:
            raise ShapeError(f"X must be (p, n), got shape {X.shape}")
        if y.shape != (X.shape[1],):
            raise ShapeError(f"y has {y.shape} entries but X has {X.shape[1]} columns")
        if X.shape[1] < 1:
            raise DataError("dataset is empty")
        m = len(self.class_names)
        if y.min() < 0 or y.max() >= m:
            raise DataError(f"labels must lie in 0..{m - 1}")
        if len(self.feature_names) != X.shape[0]:
            raise ShapeError(f"{len(self.feature_names)} feature names for p={X.shape[0]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> LabeledDataset:
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.X[:, idx], self.y[idx], self.class_names,
                              self.feature_names, self.categories)

    def with_features(self, X) -> LabeledDataset:
        return LabeledDataset(X, self.y, self.class_names, self.feature_names, self.categories)


# --------------------------------------------------------------------------
# CSV ingestion
# --------------------------------------------------------------------------

def _read_table(path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    try:
        return pd.read_csv(path, sep=",", header=0, dtype=str, keep_default_na=False,
                           encoding="utf-8", skipinitialspace=False)
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: cannot parse CSV: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"{path}: file is empty") from exc


def _bad_rows(mask: np.ndarray, limit: int = 10) -> str:
    # Data row k (0-based) sits on file line k + 2 because of the header.
    lines = (np.flatnonzero(mask) + 2).tolist()
    shown = ", ".join(map(str, lines[:limit]))
    return shown + (f" (+{len(lines) - limit} more)" if len(lines) > limit else "")


def _encode_features(df: pd.DataFrame, path, categorical, categories):
    categorical = list(categorical or [])
    for col in categorical:
        if col not in df.columns:
            raise DataError(f"{path}: categorical column {col!r} not found")
    numeric_cols = [c for c in df.columns if c not in categorical]

    blocks, names = [], []
    if numeric_cols:
        raw = df[numeric_cols]
        num = raw.apply(lambda s: pd.to_numeric(s.str.strip(), errors="coerce"))
        values = num.to_numpy(dtype=np.float64)
        bad = ~np.isfinite(values)
        if bad.any():
            col = numeric_cols[int(np.flatnonzero(bad.any(axis=0))[0])]
            raise DataError(f"{path}: missing or non-numeric value in column {col!r} "
                            f"on line(s) {_bad_rows(bad.any(axis=1))}")
        blocks.append(values)
        names.extend(numeric_cols)

    used = {}
    for col in categorical:
        vals = df[col].str.strip().to_numpy()
        missing = vals == ""
        if missing.any():
            raise DataError(f"{path}: missing value in categorical column {col!r} "
                            f"on line(s) {_bad_rows(missing)}")
        if categories is not None and col in categories:
            cats = tuple(categories[col])
            unseen = sorted(set(vals) - set(cats))
            if unseen:
                warnings.warn(f"column {col!r}: unseen categories {unseen} encoded as all zeros",
                              stacklevel=3)
        else:
            cats = tuple(sorted(set(vals)))
        used[col] = cats
        onehot = (vals[:, None] == np.array(cats, dtype=object)[None, :]).astype(np.float64)
        blocks.append(onehot)
        names.extend(f"{col}={c}" for c in cats)

    if not blocks:
        raise DataError(f"{path}: no feature columns")
    X = np.hstack(blocks).T.copy()
    return X, tuple(names), used


def load_csv(path, label_column: str, categorical_columns=None, *,
             categories: dict | None = None, class_names=None) -> LabeledDataset:
    """Read a headed CSV into a :class:`LabeledDataset`.

    Numeric columns become features in file order, followed by one indicator
    feature per category (sorted) for each categorical column. Labels map to
    indices by sorted order of their distinct values, unless ``class_names``
    fixes the mapping (used when scoring a file against an existing model).
    """
    df = _read_table(path)
    if label_column not in df.columns:
        raise DataError(f"{path}: label column {label_column!r} not found "
                        f"(columns: {', '.join(df.columns)})")
    labels = df[label_column].str.strip().to_numpy()
    if (labels == "").any():
        raise DataError(f"{path}: missing label on line(s) {_bad_rows(labels == '')}")
    X, names, used = _encode_features(df.drop(columns=[label_column]), path,
                                      categorical_columns, categories)
    if class_names is None:
        class_names = tuple(sorted(set(labels)))
        if len(class_names) < 2:
            raise DataError(f"{path}: only one class ({class_names[0]!r}) present")
    else:
        class_names = tuple(class_names)
        unknown = sorted(set(labels) - set(class_names))
        if unknown:
            raise DataError(f"{path}: labels {unknown} are not among the model classes")
    lookup = {name: i for i, name in enumerate(class_names)}
    y = np.fromiter((lookup[v] for v in labels), dtype=np.int64, count=len(labels))
    return LabeledDataset(X, y, class_names, names, used)


def load_features(path, *, categorical_columns=None, categories=None,
                  drop_columns=()) -> tuple[np.ndarray, tuple[str, ...]]:
    """Read an unlabeled CSV into a (p, n) feature matrix and its column names."""
    df = _read_table(path)
    drop = [c for c in drop_columns if c in df.columns]
    X, names, _ = _encode_features(df.drop(columns=drop), path, categorical_columns, categories)
    return X, names


# --------------------------------------------------------------------------
# Standardization
# --------------------------------------------------------------------------

def fit_standardizer(dataset: LabeledDataset) -> ScalerParams:
    """Per-feature mean and population std; constant features get std 1."""
    X = dataset.X
    if X.shape[1] < 2:
        raise DataError("fitting a standardizer needs at least two observations")
    mean = X.mean(axis=1)
    std = X.std(axis=1)
    degenerate = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if degenerate.any():
        log.info("constant features %s: std set to 1",
                 [dataset.feature_names[i] for i in np.flatnonzero(degenerate)])
    std = np.where(degenerate, 1.0, std)
    return ScalerParams(mean, std)


def apply_standardizer(dataset: LabeledDataset, scaler: ScalerParams) -> LabeledDataset:
    if scaler.mean.shape[0] != dataset.p:
        raise ShapeError(f"scaler covers {scaler.mean.shape[0]} features, data has p={dataset.p}")
    return dataset.with_features(scaler.apply(dataset.X))


# --------------------------------------------------------------------------
# Splitting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.63
    validation: float = 0.07
    test: float = 0.30
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        fr = (self.train, self.validation, self.test)
        if not (0 < self.train < 1 and 0 < self.test < 1 and 0 <= self.validation < 1):
            raise ConfigError(f"split fractions out of range: {fr}")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fr)}")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train, self.validation, self.test)


_TOL = 1e-9


def _floor_parts(ideal: np.ndarray):
    # Floor that treats values within _TOL of an integer as that integer.
    base = np.floor(ideal + _TOL).astype(np.int64)
    return base, np.maximum(ideal - base, 0.0)


def _largest_remainder(total: int, fractions) -> np.ndarray:
    counts, rem = _floor_parts(total * np.asarray(fractions, dtype=np.float64))
    order = sorted(range(len(rem)), key=lambda k: (-rem[k], k))
    for k in order[: total - counts.sum()]:
        counts[k] += 1
    return counts


def _stratified_counts(class_sizes, fractions) -> np.ndarray:
    """(classes x parts) integer table.

    Every cell is the floor or ceiling of its ideal share, each row sums to the
    class size, and column sums follow largest-remainder rounding of the total
    whenever such a table exists. Leftover units are placed by a small
    augmenting-path matching of rows to columns over the cells whose ideal
    share is fractional.
    """
    sizes = np.asarray(class_sizes, dtype=np.int64)
    fr = np.asarray(fractions, dtype=np.float64)
    table, rem = _floor_parts(sizes[:, None] * fr[None, :])
    extras = sizes - table.sum(axis=1)
    demand = _largest_remainder(int(sizes.sum()), fr) - table.sum(axis=0)
    n_cls, n_parts = table.shape
    cells = [sorted((k for k in range(n_parts) if rem[c, k] > _TOL),
                    key=lambda k: (-rem[c, k], k)) for c in range(n_cls)]
    bump = np.zeros_like(table)  # 0/1 per cell
    load = np.zeros(n_parts, dtype=np.int64)

    def augment(c, seen):
        # Give class c one more unit, possibly rerouting another class.
        for k in cells[c]:
            if bump[c, k] or (c, k) in seen:
                continue
            seen.add((c, k))
            if load[k] < demand[k]:
                bump[c, k], load[k] = 1, load[k] + 1
                return True
            for d in range(n_cls):
                if d != c and bump[d, k]:
                    bump[d, k] = 0
                    if augment(d, seen):
                        bump[c, k] = 1
                        return True
                    bump[d, k] = 1
        return False

    for c in range(n_cls):
        for _ in range(extras[c]):
            if not augment(c, set()):
                # Column totals cannot all be met; keep rows exact anyway.
                k = next(k for k in cells[c] if not bump[c, k])
                bump[c, k], load[k] = 1, load[k] + 1
    return table + bump


def split_indices(y, fractions, seed: int, stratified: bool = True) -> list[np.ndarray]:
    """Partition ``range(len(y))`` into parts with the given fractions.

    Zero fractions yield empty parts. Index arrays are returned sorted.
    """
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if n < 1:
        raise DataError("cannot split an empty dataset")
    fr = np.asarray(fractions, dtype=np.float64)
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[] for _ in fr]
    if stratified:
        classes = np.unique(y)
        members = [rng.permutation(np.flatnonzero(y == c)) for c in classes]
        sizes = [len(mb) for mb in members]
        needed = int((fr > 0).sum())
        small = [int(c) for c, s in zip(classes, sizes) if s < needed]
        if small:
            raise DataError(f"classes {small} have fewer than {needed} instances; "
                            "cannot stratify across all parts")
        table = _stratified_counts(sizes, fr)
        for mb, row in zip(members, table):
            bounds = np.concatenate([[0], np.cumsum(row)])
            for k in range(len(fr)):
                parts[k].append(mb[bounds[k]:bounds[k + 1]])
    else:
        perm = rng.permutation(n)
        bounds = np.concatenate([[0], np.cumsum(_largest_remainder(n, fr))])
        for k in range(len(fr)):
            parts[k].append(perm[bounds[k]:bounds[k + 1]])
    return [np.sort(np.concatenate(p)) if p else np.empty(0, np.int64) for p in parts]


def split(dataset: LabeledDataset, spec: SplitSpec):
    """Return ``(train, validation, test)``; validation is None when its fraction is 0."""
    idx = split_indices(dataset.y, spec.fractions, spec.seed, spec.stratified)
    train, val, test = (dataset.subset(i) if len(i) else None for i in idx)
    if train is None or test is None:
        raise DataError(f"dataset of {dataset.n} rows too small for split {spec.fractions}")
    return train, val, test


def kfold_indices(y, k: int, seed: int, stratified: bool = True):
    """``k`` (train_idx, val_idx) pairs; fold i is the validation part of pair i.

    Points are dealt round-robin over a shuffled sequence (grouped by class when
    stratified), so fold sizes and per-class fold counts differ by at most one.
    """
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if k < 2:
        raise ConfigError(f"k must be at least 2, got {k}")
    if k > n:
        raise DataError(f"k={k} exceeds the number of observations n={n}")
    rng = np.random.default_rng(seed)
    if stratified:
        classes, counts = np.unique(y, return_counts=True)
        if (counts < k).any():
            raise DataError(f"classes {classes[counts < k].tolist()} have fewer than k={k} members")
        order = np.concatenate([rng.permutation(np.flatnonzero(y == c)) for c in classes])
    else:
        order = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % k
    return [(np.flatnonzero(fold_of != i), np.flatnonzero(fold_of == i)) for i in range(k)]


def kfold(dataset: LabeledDataset, k: int, seed: int, stratified: bool = True):
    return [(dataset.subset(tr), dataset.subset(va))
            for tr, va in kfold_indices(dataset.y, k, seed, stratified)]
