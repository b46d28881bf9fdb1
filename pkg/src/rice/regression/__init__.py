"""Regression models: OLS line, polynomial, CART tree, random forest."""

import numpy as np

from .compare import ComparisonRow, compare_algorithms
from .linear import (
    DegenerateFitError,
    LinearModel,
    PolynomialModel,
    fit_linear,
    fit_polynomial,
    leave_one_out_r2,
    select_degree,
)
from .metrics import MetricReport, absolute_percentage_errors, metrics, train_test_split
from .persistence import (
    ModelFormatError,
    TrainedModel,
    data_fingerprint,
    file_sha256,
    load_model,
    save_model,
)
from .tree import ForestModel, ForestParams, TreeModel, TreeParams, fit_decision_tree, fit_random_forest


def predict(model, features) -> float:
    """Apply any fitted model (bare or wrapped in ``TrainedModel``) to one feature vector."""
    inner = model.model if isinstance(model, TrainedModel) else model
    x = np.atleast_1d(np.asarray(features, dtype=np.float64))
    if x.ndim != 1 or x.size != inner.n_features:
        raise ValueError(f"{inner.kind} model expects {inner.n_features} feature(s), got {x.size}")
    if inner.n_features == 1:
        return float(inner.predict_one(float(x[0])))
    return float(inner.predict_one(x))


__all__ = [
    "ComparisonRow",
    "DegenerateFitError",
    "ForestModel",
    "ForestParams",
    "LinearModel",
    "MetricReport",
    "ModelFormatError",
    "PolynomialModel",
    "TrainedModel",
    "TreeModel",
    "TreeParams",
    "absolute_percentage_errors",
    "compare_algorithms",
    "data_fingerprint",
    "file_sha256",
    "fit_decision_tree",
    "fit_linear",
    "fit_polynomial",
    "fit_random_forest",
    "leave_one_out_r2",
    "load_model",
    "metrics",
    "predict",
    "save_model",
    "select_degree",
    "train_test_split",
]
