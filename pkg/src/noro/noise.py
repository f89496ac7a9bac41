"""SNR-calibrated additive Gaussian noise on feature matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from noro.errors import NoroError, ShapeError

NO_NOISE = math.inf


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    feature_powers: np.ndarray
    variances: np.ndarray
    seed: int


def feature_power(X: np.ndarray) -> np.ndarray:
    """Mean square of each column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise NoroError("feature power needs a non-empty 2-D matrix")
    return np.mean(X * X, axis=0)


def noise_variances(powers: np.ndarray, snr_db: float) -> np.ndarray:
    powers = np.asarray(powers, dtype=np.float64)
    if (powers < 0).any():
        raise NoroError("signal powers must be non-negative")
    if snr_db == NO_NOISE:
        return np.zeros_like(powers)
    return powers * 10.0 ** (-snr_db / 10.0)


def noise_generator(seed) -> np.random.Generator:
    """Counter-based Philox stream; one per (seed, ...) tuple."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def make_noise_spec(X: np.ndarray, snr_db: float, seed, powers: np.ndarray | None = None) -> NoiseSpec:
    powers = feature_power(X) if powers is None else np.asarray(powers, dtype=np.float64)
    return NoiseSpec(float(snr_db), powers, noise_variances(powers, snr_db), seed)


def inject(
    X: np.ndarray, snr_db: float, seed, powers: np.ndarray | None = None
) -> np.ndarray:
    """Return ``X + N'`` with ``N'[:, j] ~ N(0, P_j * 10^(-snr/10))``.

    ``P_j`` is the mean square of column ``j`` of ``X`` unless ``powers`` is
    supplied (e.g. training-split powers). ``snr_db=inf`` returns a copy of
    ``X``. The draw depends only on ``seed`` and the shape of ``X``; it is
    then scaled per column.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise NoroError("cannot inject noise into non-finite features")
    if snr_db == NO_NOISE:
        return X.copy()
    if math.isnan(snr_db):
        raise NoroError("SNR must not be NaN")
    spec = make_noise_spec(X, snr_db, seed, powers)
    if spec.variances.shape != (X.shape[1],):
        raise ShapeError("powers must have one entry per column")
    z = noise_generator(seed).standard_normal(X.shape)
    return X + z * np.sqrt(spec.variances)
