"""Accuracy, k-fold cross-validation and one-parameter sweeps."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .dataio import LabeledDataset, SplitSpec, kfold_indices, split
from .errors import ConfigError, ShapeError
from .model import QmsModel, predict_batch
from .trainer import TrainConfig, train

SWEEPABLE = ("q", "alpha")


def accuracy(predictions, truth) -> float:
    """Fraction of positions where the two label vectors agree."""
    pred = np.asarray(predictions)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ShapeError(f"length mismatch: {pred.shape} predictions vs {truth.shape} labels")
    if pred.size == 0:
        raise ShapeError("accuracy of an empty vector is undefined")
    return float(np.count_nonzero(pred == truth) / pred.size)


def evaluate(model: QmsModel, dataset: LabeledDataset) -> float:
    """Accuracy of ``model`` on raw (unscaled) features of ``dataset``."""
    return accuracy(predict_batch(model, model.transform(dataset.X)), dataset.y)


@dataclass(frozen=True)
class CvReport:
    fold_accuracies: tuple[float, ...]
    mean: float
    std: float
    config: dict = field(default_factory=dict)

    @classmethod
    def from_folds(cls, accs, config: dict | None = None) -> CvReport:
        a = np.asarray(accs, dtype=np.float64)
        std = float(a.std(ddof=1)) if a.size > 1 else 0.0
        return cls(tuple(a.tolist()), float(a.mean()), std, dict(config or {}))

    @property
    def k(self) -> int:
        return len(self.fold_accuracies)

    def to_csv(self) -> str:
        rows = ["fold,accuracy"]
        rows += [f"{i},{acc!r}" for i, acc in enumerate(self.fold_accuracies)]
        return "\n".join(rows) + "\n"

    def table(self) -> str:
        lines = [f"{'fold':>4}  accuracy"]
        lines += [f"{i:>4}  {acc:.4%}" for i, acc in enumerate(self.fold_accuracies)]
        lines.append(f"mean  {self.mean:.4%}  (std {self.std:.4%}, k={self.k})")
        return "\n".join(lines)


def cross_validate(config: TrainConfig, dataset: LabeledDataset, k: int = 10, *,
                   stratified: bool = True, verbose: bool = False) -> CvReport:
    """Train on k-1 folds, score on the held-out fold, k times.

    Fold assignment is seeded by ``config.seed``; fold i trains with seed
    ``config.seed + i``. Each fold fits its own scaler on its training part.
    """
    accs = []
    for i, (tr, va) in enumerate(kfold_indices(dataset.y, k, config.seed, stratified)):
        model, _ = train(config.with_(seed=config.seed + i), dataset.subset(tr),
                         verbose=verbose)
        accs.append(evaluate(model, dataset.subset(va)))
    return CvReport.from_folds(accs, {**config.echo(), "k": k})


def holdout(config: TrainConfig, dataset: LabeledDataset, test_fraction: float = 0.3, *,
            seed: int | None = None):
    """Stratified train/test split, train on the first part, score the second.

    Returns ``(model, test_accuracy)``.
    """
    spec = SplitSpec(1.0 - test_fraction, 0.0, test_fraction, True,
                     config.seed if seed is None else seed)
    train_part, _, test_part = split(dataset, spec)
    model, _ = train(config, train_part)
    return model, evaluate(model, test_part)


@dataclass(frozen=True)
class SweepReport:
    parameter: str
    grid: tuple
    reports: tuple[CvReport, ...]

    @property
    def means(self) -> list[float]:
        return [r.mean for r in self.reports]

    def best_value(self):
        """Grid value with the highest mean accuracy (first one on ties)."""
        return self.grid[int(np.argmax(self.means))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("param_value,fold,accuracy\n")
        for v, rep in zip(self.grid, self.reports):
            for i, acc in enumerate(rep.fold_accuracies):
                buf.write(f"{v!r},{i},{acc!r}\n")
        return buf.getvalue()

    def summary_csv(self) -> str:
        rows = ["param_value,mean,std"]
        rows += [f"{v!r},{r.mean!r},{r.std!r}" for v, r in zip(self.grid, self.reports)]
        return "\n".join(rows) + "\n"

    def table(self) -> str:
        lines = [f"{self.parameter:>8}  mean      std"]
        for v, r in zip(self.grid, self.reports):
            lines.append(f"{v!s:>8}  {r.mean:.4%}  {r.std:.4%}")
        lines.append(f"best {self.parameter} = {self.best_value()}")
        return "\n".join(lines)


def validate_grid(parameter: str, grid) -> tuple:
    if parameter not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {parameter!r}; choose one of {SWEEPABLE}")
    grid = tuple(grid)
    if not grid:
        raise ConfigError("sweep grid is empty")
    for v in grid:
        if parameter == "q":
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ConfigError(f"q grid values must be positive integers, got {v!r}")
        elif not 0 <= float(v) < 1:
            raise ConfigError(f"alpha grid values must satisfy 0 <= alpha < 1, got {v!r}")
    return tuple(int(v) for v in grid) if parameter == "q" else tuple(float(v) for v in grid)


def sweep(base: TrainConfig, dataset: LabeledDataset, parameter: str, grid, k: int = 10, *,
          stratified: bool = True, verbose: bool = False) -> SweepReport:
    """Cross-validate once per grid value, changing only ``parameter``.

    Every grid value sees the same fold assignment, so curves are paired.
    """
    grid = validate_grid(parameter, grid)
    reports = tuple(cross_validate(base.with_(**{parameter: v}), dataset, k,
                                   stratified=stratified, verbose=verbose) for v in grid)
    return SweepReport(parameter, grid, reports)
