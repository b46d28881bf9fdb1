"""Side-by-side evaluation of regressors on the prompt-encoding data."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np

from .metrics import MetricReport, metrics, train_test_split
from .tree import ForestParams, TreeParams, fit_decision_tree, fit_random_forest


@dataclass(frozen=True)
class _LeastSquaresSurface:
    """OLS on all monomials of the features up to ``degree`` (intercept included)."""

    degree: int
    coef: np.ndarray
    scale: np.ndarray

    @staticmethod
    def _design(X: np.ndarray, degree: int) -> np.ndarray:
        cols = [np.ones(X.shape[0])]
        for d in range(1, degree + 1):
            for combo in combinations_with_replacement(range(X.shape[1]), d):
                cols.append(np.prod(X[:, list(combo)], axis=1))
        return np.column_stack(cols)

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, degree: int) -> "_LeastSquaresSurface":
        scale = np.abs(X).max(axis=0)
        scale[scale == 0] = 1.0
        A = cls._design(X / scale, degree)
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        return cls(degree, coef, scale)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return self._design(X / self.scale, self.degree) @ self.coef


@dataclass(frozen=True)
class ComparisonRow:
    algorithm: str
    report: MetricReport

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, **self.report.to_dict()}


def compare_algorithms(
    samples: Sequence,
    seed: int = 0,
    *,
    polynomial_degree: int = 2,
    ratio: float = 0.8,
    tree_params: TreeParams | None = None,
    forest_params: ForestParams | None = None,
) -> list[ComparisonRow]:
    """Fit each algorithm on one 80:20 split and report held-out metrics.

    ``samples`` are encoding samples (anything with ``model_params``,
    ``prompt_tokens`` and ``encoding_latency``). Rows come back sorted by
    ascending MAPE.
    """
    if len(samples) < 10:
        raise ValueError(f"need at least 10 samples to compare algorithms, got {len(samples)}")
    train, test = train_test_split(samples, ratio, seed)

    def xy(rows):
        X = np.array([[s.model_params, s.prompt_tokens] for s in rows], dtype=np.float64)
        y = np.array([s.encoding_latency for s in rows], dtype=np.float64)
        return X, y

    X_tr, y_tr = xy(train)
    X_te, y_te = xy(test)
    tree_params = tree_params or TreeParams(max_depth=16, min_samples_leaf=2)
    forest_params = forest_params or ForestParams()

    fitters: dict[str, Callable[[], object]] = {
        "Linear": lambda: _LeastSquaresSurface.fit(X_tr, y_tr, 1),
        f"Polynomial (degree {polynomial_degree})": lambda: _LeastSquaresSurface.fit(X_tr, y_tr, polynomial_degree),
        "Decision Tree": lambda: fit_decision_tree(X_tr, y_tr, tree_params),
        "Random Forest": lambda: fit_random_forest(X_tr, y_tr, forest_params, seed=seed),
    }
    rows = [ComparisonRow(name, metrics(y_te, fit().predict(X_te))) for name, fit in fitters.items()]
    rows.sort(key=lambda r: r.report.mape)
    return rows
