"""Schema-compatible synthetic telemonitoring data.

Useful for exercising the pipeline without the UCI file. The generator has
the same columns and rough feature scales as the real data, a per-subject
severity level and labels driven mostly by the DFA/PPE/HNR columns; it makes
no claim to reproduce any statistic of the real recordings.
"""

from __future__ import annotations

import numpy as np

from noro.dataset import Dataset


def make_surrogate(n_rows: int = 5875, n_subjects: int = 42, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    subject = np.sort(rng.integers(1, n_subjects + 1, size=n_rows))
    subject[: min(n_subjects, n_rows)] = np.arange(1, min(n_subjects, n_rows) + 1)
    subject = np.sort(subject)
    severity = rng.normal(0.0, 1.0, size=n_subjects + 1)[subject]

    voice = rng.normal(0.0, 1.0, size=n_rows) + 0.3 * severity
    jitter_base = np.exp(-5.0 + 0.5 * voice + 0.3 * rng.normal(size=n_rows))
    jitter = np.column_stack([
        100 * jitter_base,
        4e-5 * jitter_base / 0.006,
        0.5 * jitter_base * np.exp(0.1 * rng.normal(size=n_rows)),
        0.55 * jitter_base * np.exp(0.1 * rng.normal(size=n_rows)),
        1.5 * jitter_base * np.exp(0.1 * rng.normal(size=n_rows)),
    ])
    shimmer_base = np.exp(-3.5 + 0.4 * voice + 0.3 * rng.normal(size=n_rows))
    shimmer = np.column_stack([
        shimmer_base,
        10 * shimmer_base * np.exp(0.05 * rng.normal(size=n_rows)),
        0.5 * shimmer_base * np.exp(0.1 * rng.normal(size=n_rows)),
        0.6 * shimmer_base * np.exp(0.1 * rng.normal(size=n_rows)),
        0.8 * shimmer_base * np.exp(0.1 * rng.normal(size=n_rows)),
        1.5 * shimmer_base * np.exp(0.1 * rng.normal(size=n_rows)),
    ])
    nhr = np.exp(-4.0 + 0.6 * voice + 0.5 * rng.normal(size=n_rows))
    hnr = 21.0 - 2.5 * voice + 2.0 * rng.normal(size=n_rows)
    rpde = np.clip(0.54 + 0.05 * voice + 0.08 * rng.normal(size=n_rows), 0.15, 0.99)
    dfa = np.clip(0.65 + 0.05 * severity + 0.03 * rng.normal(size=n_rows), 0.5, 0.87)
    ppe = np.clip(0.22 + 0.05 * voice + 0.05 * rng.normal(size=n_rows), 0.02, 0.75)
    features = np.column_stack([jitter, shimmer, nhr, hnr, rpde, dfa, ppe])

    dfa_z = (dfa - 0.65) / 0.06
    motor = (
        21.0
        + 6.0 * np.tanh(dfa_z)
        + 1.5 * dfa_z**2
        + 1.0 * (ppe - 0.22) / 0.07
        - 0.4 * (hnr - 21.0) / 3.0
        + 2.0 * severity
        + 2.5 * rng.normal(size=n_rows)
    )
    total = 1.3 * motor + 2.0 + 3.0 * severity + 2.0 * rng.normal(size=n_rows)

    return Dataset(
        features=features,
        motor=motor,
        total=total,
        subject_ids=subject.astype(np.int64),
        age=rng.integers(36, 86, size=n_subjects + 1)[subject].astype(np.float64),
        sex=rng.integers(0, 2, size=n_subjects + 1)[subject].astype(np.float64),
        test_time=np.round(rng.uniform(0, 215, size=n_rows), 4),
    )
