"""Parameter initialisation, mini-batching and the Adam training loop."""

from __future__ import annotations

import copy
import sys
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .adam import AdamConfig, AdamState, adam_init, adam_step
from .dataio import LabeledDataset, ScalerParams, apply_standardizer, fit_standardizer
from .errors import ConfigError, DataError, NumericalError
from .loss import ClassPartitionedBatch, loss_and_gradients_arrays
from .model import QmsModel, alpha_matrix, member_values


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    ``adam`` applies to the A matrices; ``lr_b`` overrides the learning rate
    for the b vectors (defaults to ``adam.lr``). ``patience`` turns on early
    stopping on validation accuracy.
    """

    q: int = 15
    alpha: float | np.ndarray = 0.4
    epochs: int = 15
    batch_size: int = 200
    adam: AdamConfig = field(default_factory=AdamConfig)
    lr_b: float | None = None
    seed: int = 42
    patience: int | None = None
    standardize: bool = True

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ConfigError(f"q must be a positive integer, got {self.q}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError(f"epochs must be a positive integer, got {self.epochs}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be positive, got {self.patience}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if np.ndim(self.alpha) == 0 and not 0 <= float(self.alpha) < 1:
            raise ConfigError(f"alpha must satisfy 0 <= alpha < 1, got {self.alpha}")
        AdamConfig(self.lr_b_value, self.adam.beta1, self.adam.beta2, self.adam.epsilon)

    @property
    def lr_b_value(self) -> float:
        return self.adam.lr if self.lr_b is None else self.lr_b

    @property
    def adam_b(self) -> AdamConfig:
        return replace(self.adam, lr=self.lr_b_value)

    def with_(self, **changes) -> TrainConfig:
        return replace(self, **changes)

    def echo(self) -> dict:
        """Plain-dict summary, suitable for reports."""
        alpha = self.alpha if np.ndim(self.alpha) == 0 else np.asarray(self.alpha).tolist()
        return {"q": self.q, "alpha": alpha, "epochs": self.epochs,
                "batch_size": self.batch_size, "lr_a": self.adam.lr, "lr_b": self.lr_b_value,
                "beta1": self.adam.beta1, "beta2": self.adam.beta2,
                "epsilon": self.adam.epsilon, "seed": self.seed,
                "patience": self.patience, "standardize": self.standardize}


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    train_acc: float
    val_acc: float | None
    secs: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)
    batch_losses: list[list[float]] = field(default_factory=list)
    steps: int = 0
    best_epoch: int | None = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_csv(self) -> str:
        lines = ["epoch,loss,train_acc,val_acc,secs"]
        for r in self.records:
            val = "" if r.val_acc is None else repr(r.val_acc)
            lines.append(f"{r.epoch},{r.loss!r},{r.train_acc!r},{val},{r.secs:.3f}")
        return "\n".join(lines) + "\n"


def init_model(q: int, p: int, m: int, seed: int, *, alpha=0.0,
               class_names=None) -> QmsModel:
    """Every entry of every A_i and b_i drawn from N(0, 1).

    Draw order: A_0, b_0, A_1, b_1, ... from ``np.random.default_rng(seed)``.
    """
    if m < 2:
        raise ConfigError(f"need at least two classes, got m={m}")
    if min(q, p) < 1:
        raise ConfigError(f"q and p must be positive, got q={q}, p={p}")
    rng = np.random.default_rng(seed)
    W = np.empty((m, q, p))
    c = np.empty((m, q))
    for i in range(m):
        W[i] = rng.standard_normal((q, p))
        c[i] = rng.standard_normal(q)
    names = class_names if class_names is not None else [str(i) for i in range(m)]
    return QmsModel(W, c, alpha_matrix(alpha, m), tuple(names))


def make_batches(dataset: LabeledDataset, batch_size: int, seed: int,
                 epoch_index: int) -> list[ClassPartitionedBatch]:
    """Shuffle with a generator seeded by ``(seed, epoch_index)`` and slice.

    The last batch may be short. Every observation appears exactly once.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be positive, got {batch_size}")
    n = dataset.n
    if n < 1:
        raise DataError("cannot batch an empty dataset")
    order = np.random.default_rng([seed, epoch_index]).permutation(n)
    return [ClassPartitionedBatch(dataset.X[:, idx], dataset.y[idx], dataset.m)
            for idx in (order[s:s + batch_size] for s in range(0, n, batch_size))]


class Trainer:
    """Runs a single training job; not reusable across runs."""

    def __init__(self, config: TrainConfig, *, verbose: bool = False, stream=None):
        self.config = config
        self.verbose = verbose
        self.stream = stream if stream is not None else sys.stderr
        self.states_A: list[AdamState] = []
        self.states_b: list[AdamState] = []
        self._used = False

    def _log(self, rec: EpochRecord):
        if not self.verbose:
            return
        val = "" if rec.val_acc is None else f" val_acc={rec.val_acc:.6f}"
        print(f"epoch={rec.epoch} loss={rec.loss:.6f} train_acc={rec.train_acc:.6f}"
              f"{val} secs={rec.secs:.3f}", file=self.stream, flush=True)

    def fit(self, train_set: LabeledDataset, val_set: LabeledDataset | None = None):
        """Train on ``train_set``; returns ``(model, history)``.

        With ``patience`` set and a validation set supplied, the returned model
        is the one from the epoch with the highest validation accuracy
        (earliest on ties) and training stops after ``patience`` epochs
        without improvement.
        """
        if self._used:
            raise RuntimeError("a Trainer instance runs exactly one training job")
        self._used = True
        cfg = self.config
        m = train_set.m
        present = np.bincount(train_set.y, minlength=m) > 0
        if not present.all():
            missing = [train_set.class_names[i] for i in np.flatnonzero(~present)]
            raise ConfigError(f"classes {missing} have no training observations")
        if val_set is not None and (val_set.m != m or val_set.p != train_set.p):
            raise DataError("validation set does not match the training set's classes/features")
        alpha = alpha_matrix(cfg.alpha, m)
        if cfg.batch_size < m:
            warnings.warn(f"batch_size={cfg.batch_size} is smaller than the number of "
                          f"classes m={m}", stacklevel=2)

        scaler: ScalerParams | None = None
        if cfg.standardize:
            scaler = fit_standardizer(train_set)
            train_set = apply_standardizer(train_set, scaler)
            if val_set is not None:
                val_set = apply_standardizer(val_set, scaler)

        init = init_model(cfg.q, train_set.p, m, cfg.seed)
        W = np.array(init.weights)
        c = np.array(init.offsets)
        self.states_A = [adam_init(W[i].shape) for i in range(m)]
        self.states_b = [adam_init(c[i].shape) for i in range(m)]
        cfg_A, cfg_b = cfg.adam, cfg.adam_b

        history = TrainingHistory()
        early = cfg.patience is not None and val_set is not None
        best = (-1.0, None)
        stale = 0
        for epoch in range(cfg.epochs):
            start = time.perf_counter()
            losses = []
            for bi, batch in enumerate(make_batches(train_set, cfg.batch_size, cfg.seed, epoch)):
                try:
                    value, dA, db = loss_and_gradients_arrays(W, c, alpha, batch.X, batch.labels)
                except NumericalError as exc:
                    raise NumericalError(f"epoch {epoch} batch {bi}: {exc}") from exc
                losses.append(value)
                for i in range(m):
                    self.states_A[i], W[i] = adam_step(self.states_A[i], W[i], dA[i], cfg_A)
                    self.states_b[i], c[i] = adam_step(self.states_b[i], c[i], db[i], cfg_b)
                history.steps += 1
            if not (np.isfinite(W).all() and np.isfinite(c).all()):
                raise NumericalError(f"epoch {epoch}: parameters became non-finite")
            train_acc = _accuracy(W, c, train_set)
            val_acc = _accuracy(W, c, val_set) if val_set is not None else None
            rec = EpochRecord(epoch, float(np.mean(losses)), train_acc, val_acc,
                              time.perf_counter() - start)
            history.records.append(rec)
            history.batch_losses.append(losses)
            self._log(rec)
            if early:
                if val_acc > best[0]:
                    best = (val_acc, (W.copy(), c.copy()))
                    history.best_epoch = epoch
                    stale = 0
                else:
                    stale += 1
                    if stale >= cfg.patience:
                        break

        if early:
            W, c = best[1]
        model = QmsModel(W, c, alpha, train_set.class_names, scaler,
                         train_set.feature_names, copy.deepcopy(train_set.categories) or None)
        return model, history


def _accuracy(W, c, dataset: LabeledDataset) -> float:
    pred = np.argmin(member_values(W, c, dataset.X), axis=0)
    return float(np.mean(pred == dataset.y))


def train(config: TrainConfig, train_set: LabeledDataset,
          val_set: LabeledDataset | None = None, *, verbose: bool = False):
    """Convenience wrapper: ``Trainer(config).fit(train_set, val_set)``."""
    return Trainer(config, verbose=verbose).fit(train_set, val_set)
