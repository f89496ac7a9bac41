"""Random-forest MDI importances and choice of the binning feature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from noro.errors import ShapeError
from noro.trees import Forest, ForestParams, RegressionTree, fit_random_forest


@dataclass(frozen=True)
class ForestImportance:
    importances: np.ndarray
    trees: int
    seed: int


def mdi_importance(forest: Forest | list[RegressionTree] | tuple[RegressionTree, ...]) -> np.ndarray:
    """Mean decrease in impurity per feature, normalized to sum to one.

    Each split contributes ``(node samples / root samples) * impurity
    decrease`` to its feature; per-tree sums are averaged over trees and the
    result is normalized. A forest without any impurity decrease yields the
    uniform vector.
    """
    trees = forest.trees if isinstance(forest, Forest) else tuple(forest)
    d = trees[0].n_features
    total = np.zeros(d)
    for tree in trees:
        dec = tree.impurity_decrease()
        internal = tree.feature >= 0
        total += np.bincount(tree.feature[internal], weights=dec[internal], minlength=d)
    total /= len(trees)
    # rounding can leave -1e-17 on pure nodes
    total = np.clip(total, 0.0, None)
    s = total.sum()
    if s <= 0.0:
        return np.full(d, 1.0 / d)
    return total / s


def forest_importance(
    X: np.ndarray, y: np.ndarray, params: ForestParams | None = None, seed: int = 2024
) -> ForestImportance:
    params = params or ForestParams()
    forest = fit_random_forest(X, y, params, seed)
    return ForestImportance(mdi_importance(forest), params.n_trees, seed)


def averaged_importance(
    X: np.ndarray,
    y: np.ndarray,
    trials: int = 10,
    params: ForestParams | None = None,
    base_seed: int = 2024,
) -> np.ndarray:
    """MDI averaged over ``trials`` forests seeded ``base_seed + t``."""
    runs = [forest_importance(X, y, params, base_seed + t).importances for t in range(trials)]
    return np.mean(runs, axis=0)


def select_binning_feature(importance_motor: np.ndarray, importance_total: np.ndarray) -> int:
    """Argmax of the elementwise mean of the two importance vectors.

    Ties go to the lowest index.
    """
    a = np.asarray(importance_motor, dtype=np.float64)
    b = np.asarray(importance_total, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"importance vectors differ in shape: {a.shape} vs {b.shape}")
    return int(np.argmax((a + b) / 2.0))
