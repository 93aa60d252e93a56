"""Command-line entry point: ``qms {train,predict,evaluate,cv,sweep,inspect}``.

Exit codes: 0 success, 1 configuration/usage error, 2 data error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .adam import AdamConfig
from .dataio import SplitSpec, load_csv, load_features, split
from .errors import ConfigError, DataError, NumericalError, QmsError, ShapeError
from .evaluation import cross_validate, evaluate, sweep, validate_grid
from .model import QmsModel, param_count, predict_batch
from .serialization import load_model, save_model
from .trainer import TrainConfig, Trainer

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _add_data(p, label_required=True):
    p.add_argument("--data", help="input CSV (header row, comma separated)")
    p.add_argument("--label-col", help="name of the label column"
                   + ("" if label_required else "; dropped from the features if present"))
    p.add_argument("--categorical", type=_csv_list, default=[],
                   help="comma-separated categorical columns to one-hot encode (default: none)")


def _add_training(p):
    g = p.add_argument_group("training")
    g.add_argument("--q", type=int, default=15, help="rows of each A_i (default: %(default)s)")
    g.add_argument("--alpha", type=float, default=0.4,
                   help="clamp floor, 0 <= alpha < 1 (default: %(default)s)")
    g.add_argument("--epochs", type=int, default=15, help="(default: %(default)s)")
    g.add_argument("--batch-size", type=int, default=200, help="(default: %(default)s)")
    g.add_argument("--lr-a", type=float, default=1.0,
                   help="Adam learning rate for A_i (default: %(default)s)")
    g.add_argument("--lr-b", type=float, default=1.0,
                   help="Adam learning rate for b_i (default: %(default)s)")
    g.add_argument("--beta1", type=float, default=0.9, help="(default: %(default)s)")
    g.add_argument("--beta2", type=float, default=0.999, help="(default: %(default)s)")
    g.add_argument("--epsilon", type=float, default=1e-8, help="(default: %(default)s)")
    g.add_argument("--seed", type=int, default=42, help="(default: %(default)s)")
    g.add_argument("--no-standardize", action="store_true",
                   help="train on raw features instead of z-scores")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qms", description="Quadratic multiform separation classifier.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="JSON file of flag values; explicit flags win")
        return p

    p = add("train", "train a model and write it as JSON")
    _add_data(p)
    _add_training(p)
    p.add_argument("--patience", type=int, default=None,
                   help="early-stopping patience in epochs (needs --val-fraction)")
    p.add_argument("--val-fraction", type=float, default=0.0,
                   help="stratified share of the data held out for validation (default: 0)")
    p.add_argument("--out", help="model file to write")
    p.add_argument("--history", help="history CSV (default: <out>.history.csv)")
    p.add_argument("--quiet", action="store_true", help="no per-epoch progress on stderr")

    p = add("predict", "write predicted labels for a CSV")
    p.add_argument("--model", help="model file")
    _add_data(p, label_required=False)
    p.add_argument("--out", help="prediction CSV to write")
    p.add_argument("--emit-members", action="store_true",
                   help="append member-function values f_0..f_{m-1}")

    p = add("evaluate", "print the accuracy of a model on a labeled CSV")
    p.add_argument("--model", help="model file")
    _add_data(p)

    p = add("cv", "k-fold cross-validation")
    _add_data(p)
    _add_training(p)
    p.add_argument("--k", type=int, default=10, help="(default: %(default)s)")
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--out", help="report CSV (fold,accuracy)")

    p = add("sweep", "cross-validate over a grid of q or alpha values")
    _add_data(p)
    _add_training(p)
    p.add_argument("--param", choices=["q", "alpha"], help="parameter to vary")
    p.add_argument("--grid", type=_csv_list, help="comma-separated values")
    p.add_argument("--k", type=int, default=10, help="(default: %(default)s)")
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--out", help="per-fold report CSV (param_value,fold,accuracy)")
    p.add_argument("--summary-out",
                   help="summary CSV param_value,mean,std (default: <out>.summary.csv)")

    p = add("inspect", "print model dimensions, parameter count and alpha")
    p.add_argument("--model", help="model file")
    return parser


REQUIRED = {
    "train": ("data", "label_col", "out"),
    "predict": ("model", "data", "out"),
    "evaluate": ("model", "data", "label_col"),
    "cv": ("data", "label_col", "out"),
    "sweep": ("data", "label_col", "param", "grid", "out"),
    "inspect": ("model",),
}


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sp = _subparser(parser, args.command)
        known = {a.dest: a for a in sp._actions}
        try:
            values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"config {args.config} must hold a JSON object")
        defaults = {}
        for key, value in values.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("config", "help"):
                raise ConfigError(f"unknown key {key!r} in config {args.config}")
            if dest in ("categorical", "grid") and isinstance(value, str):
                value = _csv_list(value)
            defaults[dest] = value
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    missing = [f"--{d.replace('_', '-')}" for d in REQUIRED[args.command]
               if getattr(args, d, None) in (None, [])]
    if missing:
        sp = _subparser(parser, args.command)
        sp.print_usage(sys.stderr)
        raise ConfigError(f"missing required option(s): {', '.join(missing)}")
    return args


def _train_config(args, **extra) -> TrainConfig:
    return TrainConfig(q=args.q, alpha=args.alpha, epochs=args.epochs,
                       batch_size=args.batch_size,
                       adam=AdamConfig(args.lr_a, args.beta1, args.beta2, args.epsilon),
                       lr_b=args.lr_b, seed=args.seed, standardize=not args.no_standardize,
                       **extra)


def _align(model: QmsModel, X: np.ndarray, names) -> np.ndarray:
    """Order data columns like the model's features."""
    names = list(names)
    if model.feature_names is not None and set(model.feature_names) <= set(names):
        pos = {n: i for i, n in enumerate(names)}
        return X[[pos[n] for n in model.feature_names]]
    if X.shape[0] != model.p:
        raise DataError(f"model expects p={model.p} features but data has p={X.shape[0]}")
    if model.feature_names is not None and tuple(names) != model.feature_names:
        unknown = [n for n in names if n not in model.feature_names]
        raise DataError(f"data columns {unknown} are not model features")
    return X


def _model_encoding(model: QmsModel):
    cats = model.categories or {}
    return list(cats), cats


def cmd_train(args) -> int:
    if args.patience is not None and not args.val_fraction:
        raise ConfigError("--patience needs a validation set; pass --val-fraction")
    cfg = _train_config(args, patience=args.patience)
    data = load_csv(args.data, args.label_col, args.categorical)
    val = None
    if args.val_fraction:
        spec = SplitSpec(1.0 - args.val_fraction, 0.0, args.val_fraction, True, args.seed)
        data, _, val = split(data, spec)
    model, history = Trainer(cfg, verbose=not args.quiet).fit(data, val)
    out = Path(args.out)
    save_model(model, out)
    hist = Path(args.history) if args.history else out.with_suffix(".history.csv")
    hist.write_text(history.to_csv(), encoding="utf-8")
    print(f"wrote {out} ({model.n_params} parameters) and {hist}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    cols, cats = _model_encoding(model)
    drop = [args.label_col] if args.label_col else []
    X, names = load_features(args.data, categorical_columns=cols, categories=cats,
                             drop_columns=drop)
    X = _align(model, X, names)
    Z = model.transform(X)
    pred = predict_batch(model, Z)
    lines = ["row_index,predicted_label"
             + "".join(f",f_{i}" for i in range(model.m) if args.emit_members)]
    F = model.member_values(Z) if args.emit_members else None
    for r, k in enumerate(pred):
        row = f"{r},{_csv_cell(model.class_names[k])}"
        if F is not None:
            row += "".join(f",{float(v)!r}" for v in F[:, r])
        lines.append(row)
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _csv_cell(s: str) -> str:
    if any(ch in s for ch in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    cols, cats = _model_encoding(model)
    data = load_csv(args.data, args.label_col, cols, categories=cats,
                    class_names=model.class_names)
    data = data.with_features(_align(model, data.X, data.feature_names))
    print(f"accuracy={evaluate(model, data)!r}")
    return EXIT_OK


def cmd_cv(args) -> int:
    data = load_csv(args.data, args.label_col, args.categorical)
    report = cross_validate(_train_config(args), data, args.k, stratified=not args.no_stratify)
    Path(args.out).write_text(report.to_csv(), encoding="utf-8")
    print(report.table())
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        grid = [int(v) if args.param == "q" else float(v) for v in args.grid]
    except ValueError as exc:
        raise ConfigError(f"bad --grid value: {exc}") from exc
    base = _train_config(args)
    validate_grid(args.param, grid)
    data = load_csv(args.data, args.label_col, args.categorical)
    report = sweep(base, data, args.param, grid, args.k, stratified=not args.no_stratify)
    out = Path(args.out)
    out.write_text(report.to_csv(), encoding="utf-8")
    summary = Path(args.summary_out) if args.summary_out else out.with_suffix(".summary.csv")
    summary.write_text(report.summary_csv(), encoding="utf-8")
    print(report.table())
    return EXIT_OK


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    print(f"q={model.q} p={model.p} m={model.m} "
          f"params={param_count(model.q, model.p, model.m)}")
    print("classes: " + ", ".join(model.class_names))
    print(f"scaler: {'yes' if model.scaler is not None else 'no'}")
    print("alpha:")
    for row in model.alpha:
        print("  " + " ".join(f"{v:.4g}" for v in row))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate,
            "cv": cmd_cv, "sweep": cmd_sweep, "inspect": cmd_inspect}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    warnings.simplefilter("default")
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        code, msg = EXIT_NUMERIC, str(exc)
    except (DataError, ShapeError) as exc:
        code, msg = EXIT_DATA, str(exc)
    except (ConfigError, QmsError) as exc:
        code, msg = EXIT_CONFIG, str(exc)
    except OSError as exc:
        code, msg = EXIT_DATA, f"{exc.filename}: {exc.strerror}"
    print(f"qms: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
