"""Bagged Gini trees over binary per-channel decisions.

Each tree is stored as flat arrays: ``feature[i] == -1`` marks a leaf, and
an internal node sends a subject to ``left[i]`` when its feature value is 0
and to ``right[i]`` when it is 1 (threshold 0.5).
"""
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_labels
from .exceptions import InsufficientData, InvalidInput


@dataclass(frozen=True)
class PredictionMatrix:
    """Binary subject-by-channel decisions (1 = mTBI)."""

    values: np.ndarray
    column_names: tuple
    subject_ids: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise InvalidInput("prediction matrix must be two-dimensional")
        if not np.all(np.isin(v, (0, 1))):
            raise InvalidInput("prediction matrix entries must be 0 or 1")
        object.__setattr__(self, "values", v.astype(np.int8))
        names = tuple(str(c) for c in self.column_names) or tuple(f"c{j}" for j in range(v.shape[1]))
        if len(names) != v.shape[1]:
            raise InvalidInput("column_names must match the number of columns")
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))

    @property
    def n_columns(self):
        return self.values.shape[1]

    def select(self, columns):
        idx = [self.column_names.index(c) if isinstance(c, str) else int(c) for c in columns]
        return PredictionMatrix(self.values[:, idx], tuple(self.column_names[i] for i in idx), self.subject_ids)


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) class counts
    value: np.ndarray  # majority class per node, ties -> control

    @property
    def depth(self):
        depth = np.zeros(self.feature.size, dtype=int)
        for i in range(self.feature.size):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            a = rows[active]
            go_right = X[a, feat[active]] > 0.5
            node[a] = np.where(go_right, self.right[node[a]], self.left[node[a]])

    def predict(self, X):
        return self.value[self.apply(X)]


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    n_trees: int
    max_depth: int
    features_per_split: int
    seed: int
    n_columns: int
    column_names: tuple = field(default_factory=tuple)


def _gini(counts):
    total = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / total[..., None]
        g = 1.0 - np.sum(p * p, axis=-1)
    return np.where(total > 0, g, 0.0)


def _grow_tree(X, y, max_depth, n_features, rng):
    feature, left, right, counts, value = [], [], [], [], []

    def new_node(idx):
        c = np.bincount(y[idx], minlength=2)
        feature.append(-1)
        left.append(-1)
        right.append(-1)
        counts.append(c)
        value.append(1 if c[1] > c[0] else 0)
        return len(feature) - 1

    root = new_node(np.arange(y.size))
    stack = [(root, np.arange(y.size), 0)]
    n_cols = X.shape[1]
    while stack:
        node, idx, depth = stack.pop()
        c = counts[node]
        if depth >= max_depth or c[0] == 0 or c[1] == 0:
            continue
        feats = rng.choice(n_cols, size=n_features, replace=False)
        sub = X[np.ix_(idx, feats)].astype(bool)
        yi = y[idx]
        ones1 = (sub & (yi == 1)[:, None]).sum(axis=0)
        ones = sub.sum(axis=0)
        right_counts = np.stack([ones - ones1, ones1], axis=1)
        left_counts = c[None, :] - right_counts
        n = idx.size
        child = (left_counts.sum(1) * _gini(left_counts) + right_counts.sum(1) * _gini(right_counts)) / n
        gain = _gini(c[None, :])[0] - child
        valid = (ones > 0) & (ones < n)
        gain = np.where(valid, gain, -np.inf)
        best = int(np.argmax(gain))
        if not valid[best] or gain[best] <= 1e-15:
            continue
        f = int(feats[best])
        mask = sub[:, best]
        l_node = new_node(idx[~mask])
        r_node = new_node(idx[mask])
        feature[node], left[node], right[node] = f, l_node, r_node
        stack.append((r_node, idx[mask], depth + 1))
        stack.append((l_node, idx[~mask], depth + 1))
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.asarray(counts, dtype=np.int64).reshape(-1, 2),
        value=np.asarray(value, dtype=np.int8),
    )


def _as_matrix(Z):
    if isinstance(Z, PredictionMatrix):
        return Z.values, Z.column_names
    v = np.asarray(Z)
    return PredictionMatrix(v, tuple(f"c{j}" for j in range(v.shape[1]))).values, ()


def fit_forest(Z, y, n_trees=100, max_depth=8, features_per_split=None, seed=0, return_inbag=False):
    """Grow ``n_trees`` bootstrap trees on a binary prediction matrix.

    At each node ``features_per_split`` columns (default ``ceil(sqrt(n_cols))``)
    are drawn without replacement and the split with the largest Gini
    decrease is kept.  Everything is determined by ``seed``.
    """
    X, names = _as_matrix(Z)
    y = check_binary_labels(y)
    if X.shape[0] != y.size:
        raise InvalidInput("Z and y must have the same number of rows")
    counts = np.bincount(y, minlength=2)
    if counts.min() < 2:
        raise InsufficientData("each class needs at least two subjects")
    n_cols = X.shape[1]
    m = math.ceil(math.sqrt(n_cols)) if features_per_split is None else int(features_per_split)
    if not 1 <= m <= n_cols:
        raise InvalidInput(f"features_per_split must lie in [1, {n_cols}]")
    if n_trees < 1 or max_depth < 1:
        raise InvalidInput("n_trees and max_depth must be positive")
    trees, inbag = [], []
    for child in np.random.SeedSequence(int(seed)).spawn(int(n_trees)):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, y.size, size=y.size)
        trees.append(_grow_tree(X[boot], y[boot], int(max_depth), m, rng))
        inbag.append(np.bincount(boot, minlength=y.size) > 0)
    model = ForestModel(tuple(trees), int(n_trees), int(max_depth), m, int(seed), n_cols, tuple(names))
    if return_inbag:
        return model, np.array(inbag)
    return model


def forest_votes(model, Z):
    X, _ = _as_matrix(Z)
    if X.shape[1] != model.n_columns:
        raise InvalidInput(f"expected {model.n_columns} columns, got {X.shape[1]}")
    return np.array([t.predict(X) for t in model.trees], dtype=np.int64)


def predict_forest(model, Z):
    """Majority vote over trees; an even split goes to control (0)."""
    votes = forest_votes(model, Z)
    return (2 * votes.sum(axis=0) > votes.shape[0]).astype(int)


class BinaryRandomForest(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_forest` with out-of-bag accuracy."""

    def __init__(self, n_trees=100, max_depth=8, features_per_split=None, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.features_per_split = features_per_split
        self.seed = seed

    def fit(self, X, y):
        y = check_binary_labels(y)
        self.forest_, inbag = fit_forest(X, y, self.n_trees, self.max_depth, self.features_per_split,
                                         self.seed, return_inbag=True)
        votes = forest_votes(self.forest_, X)
        oob = ~inbag
        n_oob = oob.sum(axis=0)
        mtbi_votes = (votes * oob).sum(axis=0)
        have = n_oob > 0
        oob_pred = (2 * mtbi_votes > n_oob).astype(int)
        self.oob_score_ = float(np.mean(oob_pred[have] == y[have])) if have.any() else float("nan")
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = self.forest_.n_columns
        return self

    def predict(self, X):
        check_is_fitted(self, "forest_")
        return predict_forest(self.forest_, X)
