"""Versioned JSON model documents (``qms-model/1``).

Floats are written with ``repr`` precision, so a save/load cycle is exact and
re-saving a loaded model reproduces the same bytes.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .dataio import ScalerParams
from .errors import ModelFormatError, QmsError
from .model import QmsModel

FORMAT_VERSION = "qms-model/1"


def _floats(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def to_document(model: QmsModel) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "q": model.q,
        "p": model.p,
        "m": model.m,
        "alpha": _floats(model.alpha),
        "class_names": list(model.class_names),
        "scaler": None if model.scaler is None else {
            "mean": _floats(model.scaler.mean), "std": _floats(model.scaler.std)},
        "members": [{"A": _floats(A), "b": _floats(b)}
                    for A, b in zip(model.weights, model.offsets)],
    }
    if model.feature_names is not None or model.categories:
        doc["encoding"] = {
            "feature_names": None if model.feature_names is None else list(model.feature_names),
            "categories": {k: list(v) for k, v in (model.categories or {}).items()},
        }
    return doc


def serialize(model: QmsModel) -> str:
    return json.dumps(to_document(model), indent=1, ensure_ascii=False, allow_nan=False) + "\n"


def _expect(cond, message, location):
    if not cond:
        raise ModelFormatError(message, location)


def _int(doc, key):
    v = doc.get(key)
    _expect(isinstance(v, int) and not isinstance(v, bool) and v >= 1,
            f"{key!r} must be a positive integer, got {v!r}", key)
    return v


def _number_array(value, shape, location) -> np.ndarray:
    def walk(v, dims, loc):
        if not dims:
            _expect(isinstance(v, (int, float)) and not isinstance(v, bool)
                    and math.isfinite(v), f"expected a finite number, got {v!r}", loc)
            return
        _expect(isinstance(v, list), f"expected an array, got {type(v).__name__}", loc)
        _expect(len(v) == dims[0], f"expected {dims[0]} entries, got {len(v)}", loc)
        for i, item in enumerate(v):
            walk(item, dims[1:], f"{loc}[{i}]")

    walk(value, list(shape), location)
    return np.array(value, dtype=np.float64).reshape(shape)


def from_document(doc) -> QmsModel:
    _expect(isinstance(doc, dict), "top level must be an object", "$")
    version = doc.get("version")
    _expect(version == FORMAT_VERSION,
            f"unsupported version {version!r}, expected {FORMAT_VERSION!r}", "version")
    for key in ("q", "p", "m", "alpha", "class_names", "scaler", "members"):
        _expect(key in doc, f"missing key {key!r}", "$")
    q, p, m = _int(doc, "q"), _int(doc, "p"), _int(doc, "m")

    alpha = _number_array(doc["alpha"], (m, m), "alpha")
    names = doc["class_names"]
    _expect(isinstance(names, list) and len(names) == m
            and all(isinstance(s, str) for s in names),
            f"class_names must be a list of {m} strings", "class_names")

    scaler = None
    if doc["scaler"] is not None:
        sc = doc["scaler"]
        _expect(isinstance(sc, dict) and {"mean", "std"} <= set(sc),
                "scaler must be null or an object with 'mean' and 'std'", "scaler")
        mean = _number_array(sc["mean"], (p,), "scaler.mean")
        std = _number_array(sc["std"], (p,), "scaler.std")
        _expect((std > 0).all(), "scaler std entries must be positive", "scaler.std")
        scaler = ScalerParams(mean, std)

    members = doc["members"]
    _expect(isinstance(members, list) and len(members) == m,
            f"members must be a list of {m} objects", "members")
    W = np.empty((m, q, p))
    c = np.empty((m, q))
    for i, mem in enumerate(members):
        loc = f"members[{i}]"
        _expect(isinstance(mem, dict) and {"A", "b"} <= set(mem),
                "member must be an object with 'A' and 'b'", loc)
        W[i] = _number_array(mem["A"], (q, p), f"{loc}.A")
        c[i] = _number_array(mem["b"], (q,), f"{loc}.b")

    feature_names = categories = None
    enc = doc.get("encoding")
    if enc is not None:
        _expect(isinstance(enc, dict), "encoding must be an object", "encoding")
        feature_names = enc.get("feature_names")
        if feature_names is not None:
            _expect(isinstance(feature_names, list) and len(feature_names) == p,
                    f"feature_names must list {p} names", "encoding.feature_names")
        categories = enc.get("categories") or None
        if categories is not None:
            _expect(isinstance(categories, dict), "categories must be an object",
                    "encoding.categories")

    try:
        return QmsModel(W, c, alpha, tuple(names), scaler,
                        None if feature_names is None else tuple(feature_names), categories)
    except QmsError as exc:
        raise ModelFormatError(str(exc), "$") from exc


def deserialize(text: str) -> QmsModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc.msg}", f"{exc.lineno}:{exc.colno}") from exc
    return from_document(doc)


def save_model(model: QmsModel, path) -> None:
    Path(path).write_text(serialize(model), encoding="utf-8")


def load_model(path) -> QmsModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file: {exc.strerror}", str(path)) from exc
    return deserialize(text)
