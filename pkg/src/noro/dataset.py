"""Loading, normalization and splitting of the UCI Parkinson's telemonitoring data."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from noro.errors import NoroError, ParseError, ShapeError

CSV_COLUMNS = (
    "subject#", "age", "sex", "test_time", "motor_UPDRS", "total_UPDRS",
    "Jitter(%)", "Jitter(Abs)", "Jitter:RAP", "Jitter:PPQ5", "Jitter:DDP",
    "Shimmer", "Shimmer(dB)", "Shimmer:APQ3", "Shimmer:APQ5", "Shimmer:APQ11",
    "Shimmer:DDA", "NHR", "HNR", "RPDE", "DFA", "PPE",
)
FEATURE_NAMES = CSV_COLUMNS[6:]
TARGETS = ("motor", "total")

# Table "Dataset Split" counts for the 5875-row file.
CANONICAL_ROWS = 5875
CANONICAL_POOL = 3000
N_FOLDS = 10
DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    motor: np.ndarray
    total: np.ndarray
    subject_ids: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    age: np.ndarray | None = None
    sex: np.ndarray | None = None
    test_time: np.ndarray | None = None

    def __post_init__(self):
        for arr in (self.features, self.motor, self.total, self.subject_ids):
            arr.setflags(write=False)
        m = self.features.shape[0]
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise ShapeError(
                f"features must be M x {len(self.feature_names)}, got {self.features.shape}"
            )
        if not (len(self.motor) == len(self.total) == len(self.subject_ids) == m):
            raise ShapeError("label and subject vectors must have one entry per row")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def target(self, name: str) -> np.ndarray:
        if name not in TARGETS:
            raise NoroError(f"unknown target {name!r}; expected one of {TARGETS}")
        return self.motor if name == "motor" else self.total

    def feature_index(self, name: str) -> int:
        return self.feature_names.index(name)


def parse_csv(raw: bytes | str) -> Dataset:
    """Parse the telemonitoring CSV into a :class:`Dataset`.

    Rows keep file order. Data rows are numbered from 1 in error messages
    (the header is not counted).
    """
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    if not text.strip():
        raise ParseError("empty file")
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise ParseError(f"missing column(s): {', '.join(missing)}", column=missing[0])
    if tuple(header) != CSV_COLUMNS:
        raise ParseError(
            "header columns are present but out of canonical order: " + ",".join(header)
        )

    rows = []
    for row_no, cells in enumerate(reader, start=1):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(CSV_COLUMNS):
            raise ParseError(
                f"row {row_no}: expected {len(CSV_COLUMNS)} cells, got {len(cells)}", row=row_no
            )
        values = []
        for col, cell in zip(CSV_COLUMNS, cells):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"row {row_no}, column {col}: non-numeric value {cell.strip()!r}",
                    row=row_no, column=col,
                ) from None
            if not math.isfinite(v):
                raise ParseError(
                    f"row {row_no}, column {col}: non-finite value {cell.strip()!r}",
                    row=row_no, column=col,
                )
            values.append(v)
        rows.append(values)
    if not rows:
        raise ParseError("no data rows")

    table = np.asarray(rows, dtype=np.float64)
    return Dataset(
        features=np.ascontiguousarray(table[:, 6:]),
        motor=table[:, 4].copy(),
        total=table[:, 5].copy(),
        subject_ids=table[:, 0].astype(np.int64),
        age=table[:, 1].copy(),
        sex=table[:, 2].copy(),
        test_time=table[:, 3].copy(),
    )


def load_csv(path: str | Path) -> Dataset:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise NoroError(f"cannot read dataset {path}: {exc.strerror or exc}") from exc
    return parse_csv(raw)


def to_csv(dataset: Dataset) -> str:
    """Serialize a dataset back to the canonical CSV layout."""
    m = dataset.n_rows
    zeros = np.zeros(m)
    meta = [
        dataset.subject_ids,
        dataset.age if dataset.age is not None else zeros,
        dataset.sex if dataset.sex is not None else zeros,
        dataset.test_time if dataset.test_time is not None else zeros,
        dataset.motor,
        dataset.total,
    ]
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for i in range(m):
        cells = [str(int(meta[0][i]))] + [repr(float(c[i])) for c in meta[1:]]
        cells += [repr(float(v)) for v in dataset.features[i]]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


@dataclass(frozen=True)
class NormalizationStats:
    feature_means: np.ndarray
    feature_stds: np.ndarray
    label_mean: float = 0.0
    label_std: float = 1.0
    degenerate: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n_features(self) -> int:
        return len(self.feature_means)


def zscore_fit(matrix: np.ndarray, labels: np.ndarray | None = None) -> NormalizationStats:
    """Column means and population standard deviations.

    Columns with std below 1e-12 get std 1 and are flagged in ``degenerate``.
    The same rule applies to the labels.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {matrix.shape}")
    if matrix.shape[0] < 2:
        raise NoroError("z-score fit needs at least 2 rows")
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)
    degenerate = stds < DEGENERATE_STD
    stds = np.where(degenerate, 1.0, stds)

    label_mean, label_std = 0.0, 1.0
    if labels is not None:
        labels = np.asarray(labels, dtype=np.float64)
        if labels.shape != (matrix.shape[0],):
            raise ShapeError("labels must have one entry per row")
        label_mean = float(labels.mean())
        label_std = float(labels.std())
        if label_std < DEGENERATE_STD:
            label_std = 1.0
    return NormalizationStats(means, stds, label_mean, label_std, degenerate)


def zscore_apply(matrix: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != stats.n_features:
        raise ShapeError(
            f"matrix has shape {matrix.shape}, stats expect {stats.n_features} columns"
        )
    return (matrix - stats.feature_means) / stats.feature_stds


def zscore_inverse(matrix: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != stats.n_features:
        raise ShapeError(
            f"matrix has shape {matrix.shape}, stats expect {stats.n_features} columns"
        )
    return matrix * stats.feature_stds + stats.feature_means


def zscore_labels(labels: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return (np.asarray(labels, dtype=np.float64) - stats.label_mean) / stats.label_std


def unscale_labels(labels: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    return np.asarray(labels, dtype=np.float64) * stats.label_std + stats.label_mean


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_rows: np.ndarray
    valid_rows: np.ndarray
    test_rows: np.ndarray


def split_sizes(n_rows: int) -> tuple[int, int]:
    """(pool, test) sizes; 3000/2875 for the canonical file, scaled otherwise."""
    if n_rows == CANONICAL_ROWS:
        return CANONICAL_POOL, CANONICAL_ROWS - CANONICAL_POOL
    pool = int(round(n_rows * CANONICAL_POOL / CANONICAL_ROWS))
    pool = min(max(pool, N_FOLDS), n_rows - 1)
    return pool, n_rows - pool


def split_folds(
    dataset: Dataset | int,
    seed: int = 2024,
    subject_disjoint: bool = False,
    subject_ids: np.ndarray | None = None,
) -> list[FoldSplit]:
    """Ten train/valid/test splits sharing one fixed test set.

    A seeded shuffle picks the train+valid pool and the test rows once.
    Fold ``k`` uses the ``k``-th of ten contiguous blocks of the shuffled pool
    as validation and the rest as training.

    With ``subject_disjoint`` the pool is filled with whole subjects (in
    shuffled subject order) until it reaches the target size, so no subject
    appears in both pool and test. Fold blocks are still row-level.
    """
    if isinstance(dataset, Dataset):
        n_rows = dataset.n_rows
        subject_ids = dataset.subject_ids if subject_ids is None else subject_ids
    else:
        n_rows = int(dataset)
    if n_rows < 20:
        raise NoroError(f"need at least 20 rows to split, got {n_rows}")
    n_pool, _ = split_sizes(n_rows)
    rng = np.random.default_rng(seed)

    if subject_disjoint:
        if subject_ids is None:
            raise NoroError("subject-disjoint split needs subject ids")
        subject_ids = np.asarray(subject_ids)
        subjects = rng.permutation(np.unique(subject_ids))
        pool_parts, size = [], 0
        for s in subjects:
            if size >= n_pool:
                break
            rows = np.flatnonzero(subject_ids == s)
            pool_parts.append(rows)
            size += len(rows)
        pool = rng.permutation(np.concatenate(pool_parts))
        test = np.setdiff1d(np.arange(n_rows), pool)
        if len(test) == 0:
            raise NoroError("subject-disjoint split left no test rows")
    else:
        order = rng.permutation(n_rows)
        pool, test = order[:n_pool], np.sort(order[n_pool:])

    blocks = np.array_split(pool, N_FOLDS)
    folds = []
    for k in range(N_FOLDS):
        train = np.concatenate([b for j, b in enumerate(blocks) if j != k])
        folds.append(FoldSplit(k, train, blocks[k].copy(), test))
    return folds


def pool_rows(folds: list[FoldSplit]) -> np.ndarray:
    """The train+valid pool in fold-rotation order."""
    return np.concatenate([f.valid_rows for f in folds])
