"""Error metrics, trial statistics and cluster-quality scores."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.spatial.distance import cdist

from noro.errors import NoroError, ShapeError

METRICS = ("rmse", "mae", "median_ae")


@dataclass(frozen=True)
class ErrorTriple:
    rmse: float
    mae: float
    median_ae: float

    def get(self, metric: str) -> float:
        return getattr(self, metric)


def error_triple(y, y_hat) -> ErrorTriple:
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise ShapeError(f"length mismatch: {y.size} targets vs {y_hat.size} predictions")
    if y.size == 0:
        raise NoroError("cannot score empty predictions")
    err = np.abs(y - y_hat)
    # np.median averages the two middle values for even n
    return ErrorTriple(
        rmse=float(np.sqrt(np.mean(err * err))),
        mae=float(np.mean(err)),
        median_ae=float(np.median(err)),
    )


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float


@dataclass(frozen=True)
class TrialSummary:
    rmse: MetricSummary
    mae: MetricSummary
    median_ae: MetricSummary
    n_trials: int

    def get(self, metric: str) -> MetricSummary:
        return getattr(self, metric)


def aggregate_trials(trials: list[ErrorTriple]) -> TrialSummary:
    """Per-metric mean and sample standard deviation (``ddof=1``; 0 for one trial)."""
    if not trials:
        raise NoroError("no trials to aggregate")
    out = {}
    for metric in METRICS:
        values = np.array([t.get(metric) for t in trials])
        std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        out[metric] = MetricSummary(float(values.mean()), std)
    return TrialSummary(n_trials=len(trials), **out)


@dataclass(frozen=True)
class RelativeErrorEstimate:
    delta_hat: float
    sigma_hat: float


def relative_error(base: MetricSummary, augmented: MetricSummary) -> RelativeErrorEstimate:
    """Relative change of the mean error and its propagated standard deviation.

    ``delta = (E' - E) / E`` and
    ``sigma = (E'/E) * sqrt(s^2/E^2 + s'^2/E'^2)``.
    """
    e, e2 = base.mean, augmented.mean
    if not (e > 0 and e2 > 0):
        raise NoroError(f"relative error needs positive mean errors, got {e} and {e2}")
    ratio = e2 / e
    sigma = ratio * math.sqrt((base.std / e) ** 2 + (augmented.std / e2) ** 2)
    return RelativeErrorEstimate((e2 - e) / e, sigma)


@dataclass(frozen=True)
class Significance:
    significant: bool
    p: float
    test: str


def significance_flag(errors_x, errors_xprime, level: float = 0.05, paired: bool = False) -> Significance:
    """Two-sided Welch t-test (or paired t-test) between two trial samples.

    When both samples have zero spread the t statistic is undefined; equal
    means then give ``p = 1`` and different means ``p = 0``.
    """
    a = np.asarray(errors_x, dtype=np.float64)
    b = np.asarray(errors_xprime, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("trial samples must be 1-D and of equal length")
    if a.size < 2:
        raise NoroError("significance test needs at least 2 trials")
    test = "paired-t" if paired else "welch-t"
    spread = np.std(a - b) if paired else max(np.std(a), np.std(b))
    if spread == 0.0:
        diff = np.mean(a - b)
        p = 1.0 if diff == 0.0 else 0.0
    else:
        res = sps.ttest_rel(a, b) if paired else sps.ttest_ind(a, b, equal_var=False)
        p = float(res.pvalue)
    return Significance(bool(p < level), p, test)


def _check_labels(points, labels):
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    if points.ndim != 2 or labels.shape != (points.shape[0],):
        raise ShapeError("points must be 2-D with one label per row")
    uniq, codes = np.unique(labels, return_inverse=True)
    if len(uniq) < 2:
        raise NoroError("cluster metrics need at least 2 distinct labels")
    return points, codes, len(uniq)


def silhouette(points, labels, chunk: int = 512) -> float:
    """Mean Euclidean silhouette coefficient; singleton clusters score 0."""
    X, codes, g = _check_labels(points, labels)
    n = X.shape[0]
    onehot = np.zeros((n, g))
    onehot[np.arange(n), codes] = 1.0
    sizes = onehot.sum(axis=0)
    s = np.empty(n)
    for start in range(0, n, chunk):
        rows = slice(start, start + chunk)
        sums = cdist(X[rows], X) @ onehot
        own = codes[rows]
        idx = np.arange(sums.shape[0])
        own_size = sizes[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = sums[idx, own] / (own_size - 1)
            mean_other = sums / sizes
        mean_other[idx, own] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = (b - a) / denom
        val = np.where((own_size > 1) & (denom > 0), val, 0.0)
        s[rows] = val
    return float(s.mean())


def calinski_harabasz(points, labels) -> float:
    """Between-cluster over within-cluster dispersion, each divided by its degrees of freedom."""
    X, codes, g = _check_labels(points, labels)
    n = X.shape[0]
    overall = X.mean(axis=0)
    between = within = 0.0
    for k in range(g):
        members = X[codes == k]
        center = members.mean(axis=0)
        between += len(members) * float(np.sum((center - overall) ** 2))
        within += float(np.sum((members - center) ** 2))
    if within == 0.0:
        return math.inf
    if n == g:
        return math.inf
    return (between / (g - 1)) / (within / (n - g))


@dataclass(frozen=True)
class ClusterQuality:
    silhouette: float
    calinski_harabasz: float


def cluster_quality(points, labels) -> ClusterQuality:
    return ClusterQuality(silhouette(points, labels), calinski_harabasz(points, labels))


def pca_2d(X) -> np.ndarray:
    """Project onto the first two principal components (sign fixed so the
    largest-magnitude loading of each component is positive)."""
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    comps = vt[:2]
    signs = np.sign(comps[np.arange(len(comps)), np.argmax(np.abs(comps), axis=1)])
    comps = comps * signs[:, None]
    proj = Xc @ comps.T
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((proj.shape[0], 2 - proj.shape[1]))])
    return proj
