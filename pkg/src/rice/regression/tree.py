"""CART regression trees and bootstrap random forests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = 16
    min_samples_leaf: int = 2
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")

    @property
    def tree_params(self) -> TreeParams:
        return TreeParams(max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf)


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Binary regression tree stored as preorder parallel arrays.

    ``feature[i] == LEAF`` marks a leaf whose prediction is ``value[i]``.
    Internal nodes send ``x[feature] < threshold`` left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int
    params: TreeParams = field(default_factory=TreeParams)

    kind = "tree"

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        # preorder: parents precede children
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def leaf_values(self) -> np.ndarray:
        return self.value[self.feature == LEAF]

    def predict(self, X) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        rows = np.arange(X.shape[0])
        idx = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = feat != LEAF
            if not active.any():
                break
            safe_feat = np.where(active, feat, 0)
            go_left = X[rows, safe_feat] < self.threshold[idx]
            nxt = np.where(go_left, self.left[idx], self.right[idx])
            idx = np.where(active, nxt, idx)
        return self.value[idx]

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])

    def __eq__(self, other):
        if not isinstance(other, TreeModel):
            return NotImplemented
        return (
            self.n_features == other.n_features
            and self.params == other.params
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in ("feature", "threshold", "left", "right", "value")
            )
        )


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[TreeModel, ...]
    seed: int
    params: ForestParams = field(default_factory=ForestParams)

    kind = "forest"

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if len(self.trees) != self.params.n_trees:
            raise ValueError(
                f"forest declares {self.params.n_trees} trees but holds {len(self.trees)}"
            )

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_features(self) -> int:
        return self.trees[0].n_features

    def tree_predictions(self, X) -> np.ndarray:
        return np.stack([tree.predict(X) for tree in self.trees])

    def predict(self, X) -> np.ndarray:
        return self.tree_predictions(X).mean(axis=0)

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])

    def __eq__(self, other):
        if not isinstance(other, ForestModel):
            return NotImplemented
        return self.seed == other.seed and self.params == other.params and self.trees == other.trees


def _as_matrix(X, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if n_features in (None, 1) else X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"features must be a 2-D matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def _check_training_data(features, targets) -> tuple[np.ndarray, np.ndarray]:
    X = _as_matrix(features)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if X.shape[0] == 0:
        raise ValueError("cannot fit a tree on empty data")
    if X.shape[0] != y.size:
        raise ValueError(f"dimension mismatch: {X.shape[0]} feature rows vs {y.size} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    return X, y


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Return (feature, threshold, left_mask) minimizing summed child SSE, or None.

    Scans features in index order and thresholds in ascending order, keeping
    the first strict improvement, so ties resolve to the lowest feature then
    the lowest threshold.
    """
    n = y.size
    best_sse = math.inf
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total, total_sq = csum[-1], csq[-1]
        # candidate cut after position k-1 (k samples on the left)
        k = np.arange(min_leaf, n - min_leaf + 1)
        # only cut between distinct values
        k = k[xs[k - 1] < xs[k]]
        if k.size == 0:
            continue
        left_sum = csum[k - 1]
        left_sq = csq[k - 1]
        right_sum = total - left_sum
        right_sq = total_sq - left_sq
        sse = (left_sq - left_sum**2 / k) + (right_sq - right_sum**2 / (n - k))
        pos = int(np.argmin(sse))
        if sse[pos] < best_sse:
            best_sse = float(sse[pos])
            cut = int(k[pos])
            threshold = 0.5 * (xs[cut - 1] + xs[cut])
            # midpoint can round onto the upper value for adjacent floats
            if not threshold > xs[cut - 1]:
                threshold = xs[cut]
            best = (j, float(threshold))
    if best is None:
        return None
    j, threshold = best
    return j, threshold, X[:, j] < threshold


def fit_decision_tree(features, targets, params: TreeParams | None = None) -> TreeModel:
    """Greedy CART with variance reduction; leaves predict the mean target."""
    params = params or TreeParams()
    X, y = _check_training_data(features, targets)
    return _grow(X, y, params)


def _grow(X: np.ndarray, y: np.ndarray, params: TreeParams) -> TreeModel:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def build(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        ys = y[idx]
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(ys.mean()))

        if (
            idx.size < 2 * params.min_samples_leaf
            or (params.max_depth is not None and depth >= params.max_depth)
            or ys.max() == ys.min()
        ):
            return node
        split = _best_split(X[idx], ys, params.min_samples_leaf)
        if split is None:
            return node
        j, thr, go_left = split
        feature[node] = j
        threshold[node] = thr
        left[node] = build(idx[go_left], depth + 1)
        right[node] = build(idx[~go_left], depth + 1)
        return node

    build(np.arange(y.size), 0)
    return TreeModel(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
        n_features=X.shape[1],
        params=params,
    )


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent bootstrap stream for one tree of a seeded forest."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tree_index)]))


def fit_random_forest(features, targets, params: ForestParams | None = None, seed: int = 0) -> ForestModel:
    """Average of CART trees, each grown on its own bootstrap resample.

    Every split considers all features; randomness comes only from the
    resampling, and tree ``i`` draws from ``tree_rng(seed, i)`` so trees can
    be grown in any order with identical results.
    """
    params = params or ForestParams()
    X, y = _check_training_data(features, targets)
    if y.size < 2:
        raise ValueError("random forest needs at least 2 samples")
    tree_params = params.tree_params
    trees = []
    for i in range(params.n_trees):
        if params.bootstrap:
            rows = tree_rng(seed, i).integers(0, y.size, size=y.size)
            trees.append(_grow(X[rows], y[rows], tree_params))
        else:
            trees.append(_grow(X, y, tree_params))
    return ForestModel(trees=tuple(trees), seed=int(seed), params=params)
