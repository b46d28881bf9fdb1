"""Least-squares line and polynomial fits.

Both models are univariate: the single feature is model size in billions of
parameters for the device-count and per-token-latency regressions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DegenerateFitError(ValueError):
    """Raised when the data cannot determine a unique fit."""


@dataclass(frozen=True)
class LinearModel:
    slope: float
    intercept: float

    kind = "linear"
    n_features = 1

    def __post_init__(self):
        if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
            raise ValueError("linear model coefficients must be finite")

    def predict_one(self, x: float) -> float:
        return self.slope * x + self.intercept

    def predict(self, X) -> np.ndarray:
        x = _column(X)
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class PolynomialModel:
    # coefficients[i] multiplies x**i
    coefficients: tuple[float, ...]

    kind = "polynomial"
    n_features = 1

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if len(self.coefficients) < 2:
            raise ValueError("polynomial degree must be >= 1")
        if not all(math.isfinite(c) for c in self.coefficients):
            raise ValueError("polynomial coefficients must be finite")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def predict_one(self, x: float) -> float:
        # Horner
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def predict(self, X) -> np.ndarray:
        x = _column(X)
        acc = np.zeros_like(x)
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc


def _column(X) -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ValueError(f"expected 1 feature, got {arr.shape[1]}")
        arr = arr[:, 0]
    return np.atleast_1d(arr)


def _split_points(points: Iterable[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    pts = [(float(x), float(y)) for x, y in points]
    if not pts:
        return np.empty(0), np.empty(0)
    xs, ys = zip(*pts)
    x = np.array(xs, dtype=np.float64)
    y = np.array(ys, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("points must be finite")
    return x, y


def fit_linear(points: Iterable[Sequence[float]]) -> LinearModel:
    """Ordinary least-squares line through (x, y) points.

    Uses the closed form slope = Sxy / Sxx on centred data.
    """
    x, y = _split_points(points)
    if x.size < 2:
        raise DegenerateFitError(f"need at least 2 points, got {x.size}")
    x_mean = x.mean()
    y_mean = y.mean()
    dx = x - x_mean
    sxx = float(np.dot(dx, dx))
    if sxx == 0.0:
        raise DegenerateFitError("x values are all identical")
    sxy = float(np.dot(dx, y - y_mean))
    slope = sxy / sxx
    return LinearModel(slope=slope, intercept=float(y_mean - slope * x_mean))


def fit_polynomial(points: Iterable[Sequence[float]], degree: int) -> PolynomialModel:
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    x, y = _split_points(points)
    n_distinct = np.unique(x).size
    if n_distinct < degree + 1:
        raise DegenerateFitError(
            f"degree {degree} needs {degree + 1} distinct x values, got {n_distinct}"
        )
    # polyfit scales the Vandermonde columns before the SVD solve
    coef = np.polynomial.polynomial.polyfit(x, y, degree)
    return PolynomialModel(tuple(float(c) for c in coef))


def leave_one_out_r2(points: Sequence[Sequence[float]], degree: int) -> float:
    """R² of leave-one-out predictions for a polynomial of the given degree."""
    x, y = _split_points(points)
    preds = np.empty_like(y)
    for i in range(x.size):
        mask = np.arange(x.size) != i
        model = fit_polynomial(zip(x[mask], y[mask]), degree)
        preds[i] = model.predict_one(x[i])
    ss_res = float(np.sum((y - preds) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def select_degree(points: Sequence[Sequence[float]], threshold: float = 0.9, max_degree: int = 5) -> int:
    """Smallest degree whose leave-one-out R² exceeds ``threshold``.

    Falls back to the degree with the best LOO score if none clears it.
    """
    pts = list(points)
    scores = {}
    for degree in range(1, max_degree + 1):
        # LOO drops one point, so the fit needs degree + 2 distinct x values
        if len({p[0] for p in pts}) < degree + 2:
            break
        scores[degree] = leave_one_out_r2(pts, degree)
        if scores[degree] > threshold:
            return degree
    if not scores:
        raise DegenerateFitError("too few points to select a polynomial degree")
    return max(scores, key=scores.get)
