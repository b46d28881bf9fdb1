"""Versioned JSON model files.

Document layout::

    {
      "format_version": 1,
      "kind": "linear" | "polynomial" | "tree" | "forest",
      "hyperparams": {...},
      "seed": int | null,
      "payload": {...},
      "data_fingerprint": "sha256:...",
      "created_at": "ISO-8601 UTC",
      "feature_names": [...],
      "feature_bounds": [[lo, hi], ...]
    }

Floats are written with ``repr`` precision, so a reloaded model predicts
bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Union

import numpy as np

from .linear import LinearModel, PolynomialModel
from .tree import ForestModel, ForestParams, TreeModel, TreeParams

FORMAT_VERSION = 1

Model = Union[LinearModel, PolynomialModel, TreeModel, ForestModel]


class ModelFormatError(ValueError):
    """A model file is unreadable or a field fails validation."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class TrainedModel:
    model: Model
    data_fingerprint: str = ""
    created_at: str = ""
    feature_names: tuple[str, ...] = ()
    feature_bounds: tuple[tuple[float, float], ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.model.kind

    def predict(self, X) -> np.ndarray:
        return self.model.predict(X)

    def predict_one(self, x) -> float:
        return float(self.model.predict_one(x))

    def outside_envelope(self, x) -> list[str]:
        """Names of features of ``x`` lying outside the training range."""
        flagged = []
        for i, (lo, hi) in enumerate(self.feature_bounds):
            if not lo <= float(np.ravel(x)[i]) <= hi:
                name = self.feature_names[i] if i < len(self.feature_names) else f"x{i}"
                flagged.append(name)
        return flagged


def data_fingerprint(features, targets) -> str:
    X = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(targets, dtype=np.float64))
    h = hashlib.sha256()
    h.update(str(X.shape).encode())
    h.update(X.tobytes())
    h.update(y.tobytes())
    return "sha256:" + h.hexdigest()


def feature_bounds(features) -> tuple[tuple[float, float], ...]:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return tuple((float(lo), float(hi)) for lo, hi in zip(X.min(axis=0), X.max(axis=0)))


def utc_timestamp(epoch: float | None = None) -> str:
    when = datetime.now(timezone.utc) if epoch is None else datetime.fromtimestamp(epoch, timezone.utc)
    return when.replace(microsecond=0).isoformat()


# -- encoding ---------------------------------------------------------------

def _tree_payload(tree: TreeModel) -> dict:
    nodes = []
    for i in range(tree.n_nodes):
        if tree.feature[i] < 0:
            nodes.append({"value": float(tree.value[i])})
        else:
            nodes.append({
                "feature": int(tree.feature[i]),
                "threshold": float(tree.threshold[i]),
                "left": int(tree.left[i]),
                "right": int(tree.right[i]),
                "value": float(tree.value[i]),
            })
    return {"n_features": tree.n_features, "nodes": nodes}


def model_to_document(trained: TrainedModel | Model) -> dict:
    if not isinstance(trained, TrainedModel):
        trained = TrainedModel(trained)
    model = trained.model
    seed = None
    if isinstance(model, LinearModel):
        hyper = {}
        payload = {"slope": model.slope, "intercept": model.intercept}
    elif isinstance(model, PolynomialModel):
        hyper = {"degree": model.degree}
        payload = {"coefficients": list(model.coefficients)}
    elif isinstance(model, TreeModel):
        hyper = {"max_depth": model.params.max_depth, "min_samples_leaf": model.params.min_samples_leaf}
        payload = _tree_payload(model)
    elif isinstance(model, ForestModel):
        p = model.params
        hyper = {
            "n_trees": p.n_trees,
            "max_depth": p.max_depth,
            "min_samples_leaf": p.min_samples_leaf,
            "bootstrap": p.bootstrap,
        }
        seed = model.seed
        payload = {"trees": [_tree_payload(t) for t in model.trees]}
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "hyperparams": hyper,
        "seed": seed,
        "payload": payload,
        "data_fingerprint": trained.data_fingerprint,
        "created_at": trained.created_at,
        "feature_names": list(trained.feature_names),
        "feature_bounds": [list(b) for b in trained.feature_bounds],
    }
    if trained.extra:
        doc["extra"] = trained.extra
    return doc


def save_model(model: TrainedModel | Model, path) -> Path:
    path = Path(path)
    text = json.dumps(model_to_document(model), indent=1, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


# -- decoding ---------------------------------------------------------------

def _require(doc: dict, key: str, types, where: str = ""):
    name = f"{where}{key}"
    if not isinstance(doc, dict) or key not in doc:
        raise ModelFormatError(name, "missing")
    val = doc[key]
    if isinstance(val, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise ModelFormatError(name, f"expected {types}, got bool")
    if not isinstance(val, types):
        raise ModelFormatError(name, f"expected {types}, got {type(val).__name__}")
    return val


def _real(doc: dict, key: str, where: str = "") -> float:
    val = float(_require(doc, key, (int, float), where))
    if not math.isfinite(val):
        raise ModelFormatError(f"{where}{key}", "not finite")
    return val


def _tree_from_payload(payload: dict, params: TreeParams, where: str) -> TreeModel:
    n_features = _require(payload, "n_features", int, where)
    nodes = _require(payload, "nodes", list, where)
    if not nodes:
        raise ModelFormatError(f"{where}nodes", "empty tree")
    n = len(nodes)
    feature = np.full(n, -1, dtype=np.int64)
    threshold = np.zeros(n)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    value = np.zeros(n)
    for i, node in enumerate(nodes):
        at = f"{where}nodes[{i}]."
        value[i] = _real(node, "value", at)
        if "feature" in node:
            feature[i] = _require(node, "feature", int, at)
            if not 0 <= feature[i] < n_features:
                raise ModelFormatError(at + "feature", "out of range")
            threshold[i] = _real(node, "threshold", at)
            for key, arr in (("left", left), ("right", right)):
                child = _require(node, key, int, at)
                if not i < child < n:
                    raise ModelFormatError(at + key, f"child index {child} invalid")
                arr[i] = child
    return TreeModel(feature, threshold, left, right, value, n_features, params)


def model_from_document(doc: Any) -> TrainedModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("<root>", "expected a JSON object")
    version = _require(doc, "format_version", int)
    if version != FORMAT_VERSION:
        raise ModelFormatError("format_version", f"unsupported version {version}")
    kind = _require(doc, "kind", str)
    hyper = _require(doc, "hyperparams", dict)
    payload = _require(doc, "payload", dict)
    try:
        if kind == "linear":
            model = LinearModel(_real(payload, "slope", "payload."), _real(payload, "intercept", "payload."))
        elif kind == "polynomial":
            coef = _require(payload, "coefficients", list, "payload.")
            model = PolynomialModel(tuple(coef))
        elif kind == "tree":
            params = TreeParams(hyper.get("max_depth"), hyper.get("min_samples_leaf", 1))
            model = _tree_from_payload(payload, params, "payload.")
        elif kind == "forest":
            params = ForestParams(
                n_trees=_require(hyper, "n_trees", int, "hyperparams."),
                max_depth=hyper.get("max_depth"),
                min_samples_leaf=hyper.get("min_samples_leaf", 1),
                bootstrap=bool(hyper.get("bootstrap", True)),
            )
            seed = _require(doc, "seed", int)
            raw_trees = _require(payload, "trees", list, "payload.")
            trees = tuple(
                _tree_from_payload(t, params.tree_params, f"payload.trees[{i}].")
                for i, t in enumerate(raw_trees)
            )
            model = ForestModel(trees=trees, seed=seed, params=params)
        else:
            raise ModelFormatError("kind", f"unknown model kind {kind!r}")
    except ModelFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelFormatError("payload", str(exc)) from exc
    bounds = tuple(tuple(float(v) for v in b) for b in doc.get("feature_bounds", []))
    return TrainedModel(
        model=model,
        data_fingerprint=str(doc.get("data_fingerprint", "")),
        created_at=str(doc.get("created_at", "")),
        feature_names=tuple(doc.get("feature_names", [])),
        feature_bounds=bounds,
        extra=dict(doc.get("extra", {})),
    )


def load_model(path) -> TrainedModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError("<root>", f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return model_from_document(doc)


def file_sha256(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()
