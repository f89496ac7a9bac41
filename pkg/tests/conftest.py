import os
from pathlib import Path

import numpy as np
import pytest

from noro.synthetic import make_surrogate

ROOT = Path(__file__).resolve().parents[1]
CANONICAL_CANDIDATES = (
    ROOT / "data" / "parkinsons_updrs.data",
    ROOT / "data" / "parkinsons_updrs.csv",
)


def canonical_path() -> Path | None:
    env = os.environ.get("NORO_DATASET")
    if env:
        return Path(env)
    for p in CANONICAL_CANDIDATES:
        if p.exists():
            return p
    return None


@pytest.fixture(scope="session")
def surrogate():
    return make_surrogate(seed=7)


@pytest.fixture(scope="session")
def small_surrogate():
    return make_surrogate(n_rows=400, n_subjects=12, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
