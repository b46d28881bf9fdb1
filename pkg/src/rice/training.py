"""Fit the device-count, encoding-latency and per-token-latency models."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import EncodingSample, MinDeviceSample, PerTokenSample, bundled_path, load_samples
from .estimator import MODEL_FILES, ModelBundle
from .regression import (
    ComparisonRow,
    ForestParams,
    TrainedModel,
    compare_algorithms,
    file_sha256,
    fit_linear,
    fit_polynomial,
    fit_random_forest,
    leave_one_out_r2,
    metrics,
    save_model,
)
from .regression.persistence import data_fingerprint, feature_bounds, utc_timestamp

DEFAULT_SEED = 0
DEFAULT_POLY_DEGREE = 2
ENCODING_FEATURES = ("model_params", "prompt_tokens")


@dataclass
class TrainingReport:
    min_devices_r2: float
    per_token_r2: float
    per_token_loo_r2: float
    polynomial_degree: int
    encoding_comparison: list[ComparisonRow] = field(default_factory=list)
    seed: int = DEFAULT_SEED

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "min_devices": {"r_squared": self.min_devices_r2},
            "per_token": {
                "degree": self.polynomial_degree,
                "r_squared": self.per_token_r2,
                "loo_r_squared": self.per_token_loo_r2,
            },
            "encoding": [row.to_dict() for row in self.encoding_comparison],
        }


def train_bundle(
    encoding: Sequence[EncodingSample],
    per_token: Sequence[PerTokenSample],
    min_devices: Sequence[MinDeviceSample],
    *,
    seed: int = DEFAULT_SEED,
    degree: int = DEFAULT_POLY_DEGREE,
    forest_params: ForestParams | None = None,
    created_at: str = "",
    compare: bool = True,
) -> tuple[ModelBundle, TrainingReport]:
    forest_params = forest_params or ForestParams()

    dev_x = [s.model_params for s in min_devices]
    dev_y = [float(s.device_count) for s in min_devices]
    linear = fit_linear(zip(dev_x, dev_y))
    linear_r2 = metrics(dev_y, linear.predict(dev_x)).r_squared

    tok_x = [s.model_params for s in per_token]
    tok_y = [s.per_token_latency for s in per_token]
    poly = fit_polynomial(zip(tok_x, tok_y), degree)
    poly_r2 = metrics(tok_y, poly.predict(tok_x)).r_squared
    loo = leave_one_out_r2(list(zip(tok_x, tok_y)), degree) if len(set(tok_x)) > degree + 1 else float("nan")

    X = np.array([[s.model_params, s.prompt_tokens] for s in encoding], dtype=np.float64)
    y = np.array([s.encoding_latency for s in encoding], dtype=np.float64)
    forest = fit_random_forest(X, y, forest_params, seed=seed)
    comparison = compare_algorithms(encoding, seed, polynomial_degree=degree, forest_params=forest_params) if compare else []

    bundle = ModelBundle(
        min_devices=TrainedModel(
            linear, data_fingerprint(dev_x, dev_y), created_at, ("model_params",), feature_bounds(dev_x)
        ),
        encoding=TrainedModel(forest, data_fingerprint(X, y), created_at, ENCODING_FEATURES, feature_bounds(X)),
        per_token=TrainedModel(
            poly, data_fingerprint(tok_x, tok_y), created_at, ("model_params",), feature_bounds(tok_x)
        ),
    )
    report = TrainingReport(linear_r2, poly_r2, loo, degree, comparison, seed)
    return bundle, report


def creation_time(inputs: Sequence[Path]) -> str:
    """Timestamp for model files: ``SOURCE_DATE_EPOCH`` if set, else newest input mtime.

    Pinning it to the inputs keeps retraining on unchanged data byte-identical.
    """
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return utc_timestamp(float(epoch))
    return utc_timestamp(max(Path(p).stat().st_mtime for p in inputs))


def train_from_files(
    encoding_csv, per_token_csv, min_device_csv, **kwargs
) -> tuple[ModelBundle, TrainingReport]:
    paths = [Path(encoding_csv), Path(per_token_csv), Path(min_device_csv)]
    kwargs.setdefault("created_at", creation_time(paths))
    return train_bundle(
        load_samples(paths[0], "encoding"),
        load_samples(paths[1], "per_token"),
        load_samples(paths[2], "min_device"),
        **kwargs,
    )


def save_bundle(bundle: ModelBundle, directory) -> ModelBundle:
    """Write the three model files and return the bundle with file hashes filled in."""
    bundle.require()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    prints = {}
    for name, filename in MODEL_FILES.items():
        path = save_model(getattr(bundle, name), directory / filename)
        prints[name] = file_sha256(path)
    return ModelBundle(bundle.min_devices, bundle.encoding, bundle.per_token, prints)


def bundled_training_paths() -> tuple[Path, Path, Path]:
    return (
        bundled_path("encoding_samples.csv"),
        bundled_path("per_token_samples.csv"),
        bundled_path("min_device_samples.csv"),
    )


@lru_cache(maxsize=4)
def default_bundle(seed: int = DEFAULT_SEED) -> ModelBundle:
    """Models fit on the bundled datasets (cached per seed)."""
    bundle, _ = train_from_files(*bundled_training_paths(), seed=seed, compare=False, created_at="")
    return bundle
