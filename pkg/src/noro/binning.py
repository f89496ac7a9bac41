"""Equal-width binning of the selected feature and bin centers in encoded space.

Bins are numbered 1..K in every public function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from noro.errors import NoroError, ShapeError


@dataclass(frozen=True)
class BinningModel:
    feature_index: int
    K: int
    lo: float
    hi: float

    @property
    def degenerate(self) -> bool:
        return self.hi == self.lo

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.K

    def edges(self) -> np.ndarray:
        return self.lo + np.arange(self.K + 1) * self.width

    def assign(self, values) -> np.ndarray:
        return assign_bins(self, values)


def fit_binning(column, K: int = 5, feature_index: int = 0) -> BinningModel:
    column = np.asarray(column, dtype=np.float64).ravel()
    if column.size == 0:
        raise NoroError("cannot bin an empty column")
    if K < 1:
        raise NoroError(f"bin count must be >= 1, got {K}")
    return BinningModel(int(feature_index), int(K), float(column.min()), float(column.max()))


def assign_bins(model: BinningModel, values) -> np.ndarray:
    """Vectorized bin lookup.

    ``k`` is returned when ``lo + (k-1)w <= v < lo + k w``. Values at or above
    the top of the range land in bin K and values below ``lo`` clamp to 1.
    A degenerate model (``hi == lo``) puts everything in bin K.
    """
    v = np.asarray(values, dtype=np.float64)
    if model.degenerate:
        return np.full(v.shape, model.K, dtype=np.int64)
    # searching the literal edges (not (v-lo)/w) keeps float boundary cases
    # identical to the interval definition
    k = np.searchsorted(model.edges(), v, side="right")
    return np.clip(k, 1, model.K).astype(np.int64)


def assign_bin(model: BinningModel, value: float) -> int:
    return int(assign_bins(model, np.array([value]))[0])


def bin_counts(assignment: np.ndarray, K: int) -> np.ndarray:
    return np.bincount(np.asarray(assignment) - 1, minlength=K)[:K]


def compute_bin_centers(H: np.ndarray, assignment: np.ndarray, K: int) -> np.ndarray:
    """K x D' matrix of bin centers.

    Non-empty bins use the mean of their rows. An empty bin copies the center
    of the nearest non-empty bin by index distance; when a non-empty bin sits
    at the same distance on both sides the two centers are averaged.
    """
    H = np.asarray(H, dtype=np.float64)
    assignment = np.asarray(assignment)
    if H.ndim != 2 or H.shape[0] == 0:
        raise NoroError("bin centers need a non-empty 2-D matrix")
    if assignment.shape != (H.shape[0],):
        raise ShapeError("assignment must have one entry per row of H")
    if assignment.min() < 1 or assignment.max() > K:
        raise NoroError(f"bin assignments must lie in [1, {K}]")
    idx = assignment - 1
    counts = np.bincount(idx, minlength=K).astype(np.float64)
    sums = np.zeros((K, H.shape[1]))
    np.add.at(sums, idx, H)
    filled = counts > 0
    centers = np.zeros_like(sums)
    centers[filled] = sums[filled] / counts[filled, None]

    nonempty = np.flatnonzero(filled)
    for i in np.flatnonzero(~filled):
        dist = np.abs(nonempty - i)
        nearest = nonempty[dist == dist.min()]
        centers[i] = centers[nearest].mean(axis=0)
    return centers
