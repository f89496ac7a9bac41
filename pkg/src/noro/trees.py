"""Variance-reduction regression trees and bootstrap forests.

Tree induction is delegated to scikit-learn's CART builder; the fitted
structure is copied into :class:`RegressionTree` so importance accounting and
prediction only depend on the arrays stored here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from noro.errors import NoroError, ShapeError

LEAF = -1


@dataclass(frozen=True)
class RegressionTree:
    """Flat array representation of a binary regression tree.

    Node ``i`` is internal when ``feature[i] >= 0``; rows with
    ``x[feature] <= threshold`` go to ``left[i]``. ``impurity`` is the
    (population) variance of the node's training targets and ``value`` their
    mean.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"tree expects {self.n_features} columns, got shape {X.shape}")
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r, n = rows[active], node[active]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] != LEAF
        return self.value[node]

    def impurity_decrease(self) -> np.ndarray:
        """Per-node weighted impurity decrease, ``n_node/n_root * (imp - child imp)``.

        Zero at leaves.
        """
        out = np.zeros(self.n_nodes)
        internal = np.flatnonzero(self.feature != LEAF)
        if len(internal) == 0:
            return out
        n = self.n_samples.astype(np.float64)
        l, r = self.left[internal], self.right[internal]
        out[internal] = (
            n[internal] * self.impurity[internal]
            - n[l] * self.impurity[l]
            - n[r] * self.impurity[r]
        ) / n[0]
        return out


def _from_sklearn(est: DecisionTreeRegressor, n_features: int) -> RegressionTree:
    t = est.tree_
    feature = np.where(t.children_left == -1, LEAF, t.feature).astype(np.int64)
    return RegressionTree(
        feature=feature,
        threshold=t.threshold.astype(np.float64),
        left=t.children_left.astype(np.int64),
        right=t.children_right.astype(np.int64),
        value=t.value[:, 0, 0].astype(np.float64),
        n_samples=t.n_node_samples.astype(np.int64),
        impurity=t.impurity.astype(np.float64),
        n_features=n_features,
    )


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int | None = None,
    min_leaf: int = 1,
    max_features: int | None = None,
    seed: int = 0,
) -> RegressionTree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise NoroError("cannot fit a tree on empty input")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    est = DecisionTreeRegressor(
        criterion="squared_error",
        max_depth=max_depth,
        min_samples_leaf=min_leaf,
        max_features=max_features,
        random_state=seed,
    )
    est.fit(X, y)
    return _from_sklearn(est, X.shape[1])


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 5
    feature_subsample: int | None = None  # None -> ceil(D / 3)
    bootstrap: bool = True

    def resolved_subsample(self, n_features: int) -> int:
        if self.feature_subsample is None:
            return max(1, math.ceil(n_features / 3))
        return min(max(1, self.feature_subsample), n_features)


@dataclass(frozen=True)
class Forest:
    trees: tuple[RegressionTree, ...]
    n_features: int
    seed: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def fit_random_forest(
    X: np.ndarray, y: np.ndarray, params: ForestParams | None = None, seed: int = 2024
) -> Forest:
    """Bootstrap ensemble of regression trees with per-split feature subsampling.

    Tree ``b`` draws its bootstrap rows and split randomness from
    ``SeedSequence([seed, b])``, so the forest is reproducible per seed
    regardless of fitting order.
    """
    params = params or ForestParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise NoroError("cannot fit a forest on empty input")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if params.n_trees < 1:
        raise NoroError("n_trees must be >= 1")
    m, d = X.shape
    mtry = params.resolved_subsample(d)
    trees = []
    for b in range(params.n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        rows = rng.integers(0, m, size=m) if params.bootstrap else np.arange(m)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        trees.append(
            fit_tree(X[rows], y[rows], params.max_depth, params.min_leaf, mtry, tree_seed)
        )
    return Forest(tuple(trees), d, seed)
