"""Contrastive training of the single-layer tanh encoder used for augmentation.

Samples are grouped by the equal-width bin of one selected feature. The loss
pulls each encoded sample towards its own bin center and pushes it away from
the others, with nearby bins repelled less through the distance
coefficients ``alpha``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln, logsumexp

from noro.binning import BinningModel, assign_bins, compute_bin_centers
from noro.errors import ConfigError, DivergenceError, NoroError, ShapeError

logger = logging.getLogger(__name__)

ALPHA_CONVENTIONS = ("anchor", "symmetric")


def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


EXACT_ALPHA_MAX_K = 100


def distance_coefficients(K: int, convention: str = "anchor") -> np.ndarray:
    """K x K matrix of normalized binomial distance coefficients.

    Row ``m`` (anchor bin, 1-indexed) uses ``N = 2 * max(m, K - m)`` and
    ``alpha[m, n] = C(N, n - m + N/2) / C(N, N/2)``. That choice of ``N`` makes
    the matrix asymmetric; ``convention="symmetric"`` instead uses the largest
    such ``N`` (``2K``) for every row, which depends only on ``|n - m|``.
    """
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if convention not in ALPHA_CONVENTIONS:
        raise ConfigError(f"alpha convention must be one of {ALPHA_CONVENTIONS}")
    if K <= EXACT_ALPHA_MAX_K:
        # integer binomials; int / int division rounds correctly
        alpha = np.empty((K, K))
        for m in range(1, K + 1):
            half = max(m, K - m) if convention == "anchor" else K
            row = [math.comb(2 * half, k) for k in range(2 * half + 1)]
            for n in range(1, K + 1):
                alpha[m - 1, n - 1] = row[n - m + half] / row[half]
        return alpha
    m = np.arange(1, K + 1)[:, None].astype(np.float64)
    n = np.arange(1, K + 1)[None, :].astype(np.float64)
    if convention == "anchor":
        half = np.maximum(m, K - m)
    else:
        half = np.full_like(m, float(K))
    N = 2.0 * half
    alpha = np.exp(_log_binom(N, n - m + half) - _log_binom(N, half))
    np.fill_diagonal(alpha, 1.0)
    return alpha


def forward(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if W.ndim != 2 or X.ndim != 2 or X.shape[1] != W.shape[0]:
        raise ShapeError(f"cannot multiply X {X.shape} by W {W.shape}")
    return np.tanh(X @ W)


def augment(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Return ``[X, tanh(XW)]``."""
    X = np.asarray(X, dtype=np.float64)
    return np.hstack([X, forward(W, X)])


def _check_assignment(assignment, n_rows, K):
    assignment = np.asarray(assignment)
    if assignment.shape != (n_rows,):
        raise ShapeError(f"assignment has shape {assignment.shape}, expected ({n_rows},)")
    if n_rows and (assignment.min() < 1 or assignment.max() > K):
        raise NoroError(f"bin assignments must lie in [1, {K}]")
    return assignment.astype(np.int64) - 1


def contrastive_loss(H: np.ndarray, centers: np.ndarray, assignment, alpha: np.ndarray) -> float:
    """Summed contrastive loss over all samples.

    For a sample ``h`` in bin ``i``:
    ``-h.c_i + log sum_k exp(alpha[i, k] * h.c_k)``.
    """
    H = np.asarray(H, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    K = centers.shape[0]
    if alpha.shape != (K, K):
        raise ShapeError(f"alpha must be {K} x {K}")
    if H.ndim != 2 or centers.ndim != 2 or H.shape[1] != centers.shape[1]:
        raise ShapeError(f"H {H.shape} and centers {centers.shape} disagree")
    if np.isnan(H).any() or np.isnan(centers).any():
        raise NoroError("NaN in contrastive loss inputs")
    b = _check_assignment(assignment, H.shape[0], K)
    sims = H @ centers.T
    logits = alpha[b] * sims
    rows = np.arange(H.shape[0])
    return float(np.sum(logsumexp(logits, axis=1) - sims[rows, b]))


def loss_and_gradient(
    W: np.ndarray,
    X: np.ndarray,
    assignment,
    alpha: np.ndarray,
    centers: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Contrastive loss and its gradient with respect to ``W``.

    Bin centers are held constant (computed from ``tanh(XW)`` when not
    given), so the gradient only flows through each sample's own encoding.
    """
    W = np.asarray(W, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    H = forward(W, X)
    K = alpha.shape[0]
    b = _check_assignment(assignment, X.shape[0], K)
    if centers is None:
        centers = compute_bin_centers(H, b + 1, K)
    sims = H @ centers.T
    logits = alpha[b] * sims
    lse = logsumexp(logits, axis=1)
    rows = np.arange(X.shape[0])
    loss = float(np.sum(lse - sims[rows, b]))

    p = np.exp(logits - lse[:, None])
    # d loss / d h_j = sum_k p_jk alpha[b_j, k] c_k - c_{b_j}
    dH = (p * alpha[b]) @ centers - centers[b]
    dZ = dH * (1.0 - H * H)
    return loss, X.T @ dZ


def loss_gradient(W, X, assignment, alpha, centers=None) -> np.ndarray:
    return loss_and_gradient(W, X, assignment, alpha, centers)[1]


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Return the updated parameter (the input is left untouched)."""
        if self.m is None:
            self.m = np.zeros_like(param)
            self.v = np.zeros_like(param)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return param - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if norm > max_norm > 0:
        return grad * (max_norm / norm)
    return grad


@dataclass(frozen=True)
class TrainConfig:
    K: int = 5
    epochs_per_fold: int = 200
    folds: int = 10
    learning_rate: float = 1e-3
    grad_clip: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 2024
    d_prime: int | None = None  # None -> same as input dimension
    alpha_convention: str = "anchor"

    @property
    def total_epochs(self) -> int:
        return self.epochs_per_fold * self.folds

    def validate(self):
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if self.epochs_per_fold < 1 or self.folds < 1:
            raise ConfigError("epochs_per_fold and folds must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.alpha_convention not in ALPHA_CONVENTIONS:
            raise ConfigError(f"alpha_convention must be one of {ALPHA_CONVENTIONS}")


@dataclass(frozen=True)
class EncoderWeights:
    W: np.ndarray
    feature_index: int
    K: int
    lo: float
    hi: float
    train_config: TrainConfig = field(default_factory=TrainConfig)
    validation_loss: float = float("nan")
    feature_name: str | None = None

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def d_prime(self) -> int:
        return self.W.shape[1]

    @property
    def binning(self) -> BinningModel:
        return BinningModel(self.feature_index, self.K, self.lo, self.hi)

    def encode(self, X: np.ndarray) -> np.ndarray:
        return forward(self.W, X)

    def augment(self, X: np.ndarray) -> np.ndarray:
        return augment(self.W, X)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "d_prime": self.d_prime,
            "k": self.K,
            "feature_index": self.feature_index,
            "feature_name": self.feature_name,
            "lo": self.lo,
            "hi": self.hi,
            "weights": [float(v) for v in self.W.ravel(order="C")],
            "train_config": asdict(self.train_config),
            "seed": self.train_config.seed,
            "validation_loss": self.validation_loss,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EncoderWeights":
        try:
            W = np.asarray(doc["weights"], dtype=np.float64).reshape(doc["d"], doc["d_prime"])
            cfg = TrainConfig(**doc.get("train_config", {}))
            return cls(
                W=W,
                feature_index=int(doc["feature_index"]),
                K=int(doc["k"]),
                lo=float(doc["lo"]),
                hi=float(doc["hi"]),
                train_config=cfg,
                validation_loss=float(doc["validation_loss"]),
                feature_name=doc.get("feature_name"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise NoroError(f"malformed encoder document: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EncoderWeights":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise NoroError(f"cannot read encoder {path}: {exc.strerror or exc}") from exc
        return cls.from_dict(doc)


@dataclass
class TrainingLog:
    epoch: list[int] = field(default_factory=list)
    fold: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)

    def append(self, epoch, fold, train_loss, valid_loss):
        self.epoch.append(epoch)
        self.fold.append(fold)
        self.train_loss.append(train_loss)
        self.valid_loss.append(valid_loss)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,valid_loss,fold"]
        for e, tr, va, f in zip(self.epoch, self.train_loss, self.valid_loss, self.fold):
            lines.append(f"{e},{tr!r},{va!r},{f}")
        return "\n".join(lines) + "\n"


def init_weights(d: int, d_prime: int, seed: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(d)
    return np.random.default_rng(seed).uniform(-bound, bound, size=(d, d_prime))


def train_encoder(
    X: np.ndarray,
    folds: list[tuple[np.ndarray, np.ndarray]],
    binning: BinningModel,
    config: TrainConfig | None = None,
    feature_name: str | None = None,
) -> tuple[EncoderWeights, TrainingLog]:
    """Full-batch contrastive training rotated over train/validation folds.

    ``X`` holds normalized features for every row; ``folds`` lists
    ``(train_rows, valid_rows)`` index pairs, visited in order for
    ``config.epochs_per_fold`` epochs each (only the first ``config.folds``
    are used). Weights and Adam moments carry over between folds.

    Each epoch encodes the training rows, recomputes the bin centers from
    them, evaluates the training loss and the validation loss (validation
    rows against the training centers) at the current weights, then takes
    one clipped Adam step. The weights with the lowest validation loss seen
    are returned.
    """
    config = config or TrainConfig()
    config.validate()
    if config.K != binning.K:
        raise ConfigError(f"config K={config.K} disagrees with binning K={binning.K}")
    X = np.asarray(X, dtype=np.float64)
    if not np.isfinite(X).all():
        raise NoroError("training features contain non-finite values")
    d = X.shape[1]
    d_prime = config.d_prime or d
    folds = list(folds)[: config.folds]
    if len(folds) < config.folds:
        raise ConfigError(f"config asks for {config.folds} folds, got {len(folds)}")

    assignment = assign_bins(binning, X[:, binning.feature_index])
    alpha = distance_coefficients(config.K, config.alpha_convention)
    W = init_weights(d, d_prime, config.seed)
    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
    log = TrainingLog()
    best_W, best_loss = W.copy(), math.inf

    epoch = 0
    for fold_no, (train_rows, valid_rows) in enumerate(folds):
        X_tr, b_tr = X[train_rows], assignment[train_rows]
        X_va, b_va = X[valid_rows], assignment[valid_rows]
        for _ in range(config.epochs_per_fold):
            epoch += 1
            H_tr = forward(W, X_tr)
            centers = compute_bin_centers(H_tr, b_tr, config.K)
            train_loss, grad = loss_and_gradient(W, X_tr, b_tr, alpha, centers)
            valid_loss = contrastive_loss(forward(W, X_va), centers, b_va, alpha)
            if not (math.isfinite(train_loss) and math.isfinite(valid_loss)):
                raise DivergenceError(f"loss became non-finite at epoch {epoch}", epoch)
            log.append(epoch, fold_no, train_loss, valid_loss)
            if valid_loss < best_loss:
                best_loss, best_W = valid_loss, W.copy()
            W = opt.step(W, clip_global_norm(grad, config.grad_clip))
        logger.debug("fold %d done: train %.4f valid %.4f", fold_no, train_loss, valid_loss)

    weights = EncoderWeights(
        W=best_W,
        feature_index=binning.feature_index,
        K=config.K,
        lo=binning.lo,
        hi=binning.hi,
        train_config=config,
        validation_loss=best_loss,
        feature_name=feature_name,
    )
    return weights, log
