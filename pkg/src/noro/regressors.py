"""Downstream regressors behind one fit/predict interface.

Every model takes a plain feature matrix, so original features ``X`` and
augmented features ``[X, H]`` go through the same code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from noro.errors import ConfigError, NoroError, ShapeError
from noro.trees import Forest, ForestParams, fit_random_forest

DEFAULTS: dict[str, dict] = {
    "ridge": {"lam": 1.0},
    "knn": {"k": 5},
    "neural": {
        "hidden": 32,
        "learning_rate": 1e-3,
        "momentum": 0.9,
        "l2": 1e-3,
        "batch_size": 200,
        "max_iter": 2000,
        "tol": 1e-3,
        "n_iter_no_change": 10,
    },
    "bagged_trees": {"n_trees": 10, "max_depth": None, "min_leaf": 1},
    "gpr": {"length_scale": 1.0, "signal_variance": 1.0, "jitter": 1e-6},
}
KINDS = tuple(DEFAULTS)
ALIASES = {"bagged": "bagged_trees", "bagging": "bagged_trees", "nn": "neural", "mlp": "neural"}
ENSEMBLE_KINDS = frozenset({"bagged_trees"})


def canonical_kind(name: str) -> str:
    kind = ALIASES.get(name.strip().lower(), name.strip().lower())
    if kind not in DEFAULTS:
        raise ConfigError(f"unknown model {name!r}; valid kinds: {', '.join(KINDS)}")
    return kind


@dataclass(frozen=True)
class RegressorSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 2024

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_kind(self.kind))
        unknown = set(self.hyperparameters) - set(DEFAULTS[self.kind])
        if unknown:
            raise ConfigError(
                f"unknown {self.kind} hyperparameter(s): {', '.join(sorted(unknown))}"
            )
        _validate(self.kind, self.params)

    @property
    def params(self) -> dict:
        return {**DEFAULTS[self.kind], **self.hyperparameters}


def _validate(kind: str, p: dict) -> None:
    def positive(name):
        if not p[name] > 0:
            raise ConfigError(f"{kind}: {name} must be > 0, got {p[name]}")

    if kind == "ridge" and not p["lam"] >= 0:
        raise ConfigError(f"ridge: lam must be >= 0, got {p['lam']}")
    if kind == "knn" and not (int(p["k"]) == p["k"] and p["k"] >= 1):
        raise ConfigError(f"knn: k must be an integer >= 1, got {p['k']}")
    if kind == "neural":
        for name in ("hidden", "learning_rate", "batch_size", "max_iter", "n_iter_no_change"):
            positive(name)
        if not 0 <= p["momentum"] < 1 or p["l2"] < 0:
            raise ConfigError("neural: momentum must be in [0, 1) and l2 >= 0")
    if kind == "bagged_trees":
        positive("n_trees")
        positive("min_leaf")
    if kind == "gpr":
        for name in ("length_scale", "signal_variance", "jitter"):
            positive(name)


def _as_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"X must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if X.shape[0] < 2:
        raise NoroError("need at least 2 training rows")
    return X, y


class TrainedModel:
    kind: str = ""

    def __init__(self, input_dim: int):
        self.input_dim = input_dim

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeError(f"{self.kind} model expects {self.input_dim} columns, got {X.shape}")
        return X

    def predict(self, X) -> np.ndarray:
        return self._predict(self._check(X))

    def _predict(self, X):
        raise NotImplementedError


class RidgeModel(TrainedModel):
    kind = "ridge"

    def __init__(self, coef, intercept):
        super().__init__(len(coef))
        self.coef = coef
        self.intercept = intercept

    @classmethod
    def fit(cls, X, y, lam):
        x_mean, y_mean = X.mean(axis=0), y.mean()
        Xc = X - x_mean
        A = Xc.T @ Xc + lam * np.eye(X.shape[1])
        if lam == 0 and np.linalg.matrix_rank(A) < X.shape[1]:
            raise NoroError("ridge system is singular with lam=0; use lam > 0")
        try:
            coef = np.linalg.solve(A, Xc.T @ (y - y_mean))
        except np.linalg.LinAlgError as exc:
            raise NoroError("ridge system is singular; use lam > 0") from exc
        return cls(coef, float(y_mean - x_mean @ coef))

    def _predict(self, X):
        return X @ self.coef + self.intercept


class KNNModel(TrainedModel):
    kind = "knn"

    def __init__(self, X, y, k):
        super().__init__(X.shape[1])
        self.X, self.y, self.k = X, y, min(int(k), X.shape[0])

    def _predict(self, X, chunk=1024):
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], chunk):
            d = cdist(X[s : s + chunk], self.X, "sqeuclidean")
            # stable sort: equidistant neighbours resolve to the lowest training index
            nn = np.argsort(d, axis=1, kind="stable")[:, : self.k]
            out[s : s + chunk] = self.y[nn].mean(axis=1)
        return out


class NeuralModel(TrainedModel):
    """One hidden ReLU layer trained by minibatch SGD with Nesterov momentum.

    Loss is half the mean squared error plus an L2 penalty. Training stops
    after ``max_iter`` epochs or once the epoch loss fails to improve by
    ``tol`` for ``n_iter_no_change`` epochs in a row.
    """

    kind = "neural"

    def __init__(self, W1, b1, W2, b2, n_iter):
        super().__init__(W1.shape[0])
        self.W1, self.b1, self.W2, self.b2 = W1, b1, W2, b2
        self.n_iter = n_iter

    @staticmethod
    def _glorot(rng, fan_in, fan_out):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, (fan_in, fan_out)), rng.uniform(-bound, bound, fan_out)

    @classmethod
    def fit(cls, X, y, p, seed):
        rng = np.random.default_rng(seed)
        n, d = X.shape
        h = int(p["hidden"])
        W1, b1 = cls._glorot(rng, d, h)
        W2, b2 = cls._glorot(rng, h, 1)
        params = [W1, b1, W2, b2]
        vel = [np.zeros_like(q) for q in params]
        lr, mu, l2 = p["learning_rate"], p["momentum"], p["l2"]
        batch = min(int(p["batch_size"]), n)
        best, stall, epoch = math.inf, 0, 0
        for epoch in range(1, int(p["max_iter"]) + 1):
            order = rng.permutation(n)
            total = 0.0
            for s in range(0, n, batch):
                idx = order[s : s + batch]
                xb, yb = X[idx], y[idx]
                # Nesterov: gradient at the look-ahead point
                look = [q + mu * v for q, v in zip(params, vel)]
                z = xb @ look[0] + look[1]
                a = np.maximum(z, 0.0)
                out = (a @ look[2])[:, 0] + look[3][0]
                err = out - yb
                m = len(idx)
                total += 0.5 * float(err @ err) + 0.5 * l2 * (
                    float(np.sum(look[0] ** 2)) + float(np.sum(look[2] ** 2))
                ) * m / n
                g_out = err[:, None] / m
                gW2 = a.T @ g_out + l2 * look[2] / n
                gb2 = g_out.sum(axis=0)
                g_a = (g_out @ look[2].T) * (z > 0)
                gW1 = xb.T @ g_a + l2 * look[0] / n
                gb1 = g_a.sum(axis=0)
                for i, g in enumerate((gW1, gb1, gW2, gb2)):
                    vel[i] = mu * vel[i] - lr * g
                    params[i] = params[i] + vel[i]
            loss = total / n
            if not math.isfinite(loss):
                raise NoroError(f"neural regressor diverged at epoch {epoch}")
            if loss > best - p["tol"]:
                stall += 1
            else:
                stall = 0
            best = min(best, loss)
            if stall >= p["n_iter_no_change"]:
                break
        return cls(*params, n_iter=epoch)

    def _predict(self, X):
        a = np.maximum(X @ self.W1 + self.b1, 0.0)
        return (a @ self.W2)[:, 0] + self.b2[0]


class BaggedTreesModel(TrainedModel):
    kind = "bagged_trees"

    def __init__(self, forest: Forest):
        super().__init__(forest.n_features)
        self.forest = forest

    def _predict(self, X):
        return self.forest.predict(X)


class GPRModel(TrainedModel):
    """Zero-mean GP with an RBF kernel; no hyperparameter optimization."""

    kind = "gpr"

    def __init__(self, X, weights, length_scale, signal_variance):
        super().__init__(X.shape[1])
        self.X = X
        self.weights = weights
        self.length_scale = length_scale
        self.signal_variance = signal_variance

    @staticmethod
    def kernel(A, B, length_scale, signal_variance):
        d2 = cdist(A / length_scale, B / length_scale, "sqeuclidean")
        return signal_variance * np.exp(-0.5 * d2)

    @classmethod
    def fit(cls, X, y, p):
        K = cls.kernel(X, X, p["length_scale"], p["signal_variance"])
        K[np.diag_indices_from(K)] += p["jitter"]
        try:
            factor = cho_factor(K, lower=True, check_finite=False)
        except LinAlgError as exc:
            raise NoroError(
                f"Cholesky of the GP kernel failed with jitter={p['jitter']}; increase jitter"
            ) from exc
        weights = cho_solve(factor, y, check_finite=False)
        return cls(X, weights, p["length_scale"], p["signal_variance"])

    def _predict(self, X, chunk=2048):
        out = np.empty(X.shape[0])
        for s in range(0, X.shape[0], chunk):
            k = self.kernel(X[s : s + chunk], self.X, self.length_scale, self.signal_variance)
            out[s : s + chunk] = k @ self.weights
        return out


def fit(spec: RegressorSpec, X, y) -> TrainedModel:
    X, y = _as_xy(X, y)
    p = spec.params
    if spec.kind == "ridge":
        return RidgeModel.fit(X, y, p["lam"])
    if spec.kind == "knn":
        return KNNModel(X.copy(), y.copy(), p["k"])
    if spec.kind == "neural":
        return NeuralModel.fit(X, y, p, spec.seed)
    if spec.kind == "bagged_trees":
        params = ForestParams(
            n_trees=int(p["n_trees"]),
            max_depth=p["max_depth"],
            min_leaf=int(p["min_leaf"]),
            feature_subsample=X.shape[1],
            bootstrap=True,
        )
        return BaggedTreesModel(fit_random_forest(X, y, params, spec.seed))
    if spec.kind == "gpr":
        return GPRModel.fit(X, y, p)
    raise ConfigError(f"unknown model kind {spec.kind!r}")  # pragma: no cover


def predict(model: TrainedModel, X) -> np.ndarray:
    return model.predict(X)
