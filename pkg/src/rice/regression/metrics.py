from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence, TypeVar

import numpy as np

T = TypeVar("T")


@dataclass(frozen=True)
class MetricReport:
    r_squared: float
    mse: float
    mape: float  # fraction, not percent

    def to_dict(self) -> dict:
        return asdict(self)


def absolute_percentage_errors(y_true, y_pred) -> np.ndarray:
    t, p = _pair(y_true, y_pred)
    zeros = np.flatnonzero(t == 0)
    if zeros.size:
        raise ZeroDivisionError(f"y_true[{int(zeros[0])}] is zero; MAPE is undefined")
    return np.abs(t - p) / np.abs(t)


def metrics(y_true, y_pred) -> MetricReport:
    """R², MSE and MAPE of predictions against ground truth.

    A zero ground-truth value raises rather than being skipped.
    """
    t, p = _pair(y_true, y_pred)
    ape = absolute_percentage_errors(t, p)
    resid = t - p
    ss_res = float(np.sum(resid * resid))
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        # constant target: perfect or not, R² of a constant is degenerate
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return MetricReport(r_squared=r2, mse=ss_res / t.size, mape=float(ape.mean()))


def _pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if t.size != p.size:
        raise ValueError(f"length mismatch: {t.size} true vs {p.size} predicted")
    if t.size == 0:
        raise ValueError("metrics need at least one value")
    return t, p


def train_test_split(data: Sequence[T], ratio: float = 0.8, seed: int = 0) -> tuple[list[T], list[T]]:
    """Shuffle deterministically by ``seed``; the first floor(ratio*n) items train."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    items = list(data)
    if not items:
        raise ValueError("cannot split empty data")
    order = np.random.default_rng(seed).permutation(len(items))
    n_train = math.floor(ratio * len(items))
    train = [items[i] for i in order[:n_train]]
    test = [items[i] for i in order[n_train:]]
    return train, test
