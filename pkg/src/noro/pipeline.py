"""End-to-end experiments: feature selection, encoder training and evaluation.

Seeding:

* the pool/test split and the encoder use ``base_seed``;
* forest ``t`` of the feature-selection average uses ``base_seed + t``;
* trial ``t`` fits downstream models with seed ``base_seed + t``;
* noise for trial ``t`` at a given SNR is drawn from
  ``SeedSequence([base_seed, t, snr_code, part])`` where ``part`` is 0 for
  the train+valid pool and 1 for the test rows and ``snr_code`` is
  ``round(1000 * snr)`` (``-1`` for no extra noise).

Trials form the outer loop; inside a trial every SNR level and evaluation
fold is run and fold errors are averaged into one error triple per trial.
Baseline and augmented models in a trial see the same noise draw.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from noro import metrics
from noro.binning import assign_bins, bin_counts, fit_binning
from noro.config import ExperimentConfig, snr_label
from noro.dataset import (
    Dataset,
    FoldSplit,
    NormalizationStats,
    load_csv,
    pool_rows,
    split_folds,
    unscale_labels,
    zscore_apply,
    zscore_fit,
    zscore_labels,
)
from noro.encoder import EncoderWeights, TrainConfig, TrainingLog, train_encoder
from noro.errors import NoroError
from noro.feature_selection import averaged_importance, select_binning_feature
from noro.noise import NO_NOISE, feature_power, inject
from noro.regressors import fit as fit_model
from noro.trees import ForestParams

logger = logging.getLogger(__name__)

VARIANTS = ("baseline", "noro")


@dataclass(frozen=True)
class PreparedData:
    """Normalized features/labels plus the fixed split."""

    dataset: Dataset
    folds: list[FoldSplit]
    pool: np.ndarray
    test: np.ndarray
    feature_stats: NormalizationStats
    X: np.ndarray
    labels: dict[str, np.ndarray]
    label_stats: dict[str, NormalizationStats]


def prepare(dataset: Dataset, seed: int = 2024, subject_disjoint: bool = False) -> PreparedData:
    """Split, then z-score everything with statistics of the train+valid pool."""
    folds = split_folds(dataset, seed, subject_disjoint=subject_disjoint)
    pool = pool_rows(folds)
    feature_stats = zscore_fit(dataset.features[pool])
    labels, label_stats = {}, {}
    for target in ("motor", "total"):
        y = dataset.target(target)
        st = zscore_fit(dataset.features[pool], y[pool])
        labels[target] = zscore_labels(y, st)
        label_stats[target] = st
    return PreparedData(
        dataset=dataset,
        folds=folds,
        pool=pool,
        test=folds[0].test_rows,
        feature_stats=feature_stats,
        X=zscore_apply(dataset.features, feature_stats),
        labels=labels,
        label_stats=label_stats,
    )


def prepare_from_config(config: ExperimentConfig) -> PreparedData:
    return prepare(load_csv(config.dataset_path), config.base_seed, config.subject_disjoint_split)


# -- feature selection -------------------------------------------------------


def select_features(prep: PreparedData, trials: int = 10, n_trees: int = 100, seed: int = 2024) -> dict:
    """MDI importances for both targets on the normalized train+valid pool."""
    X = prep.X[prep.pool]
    params = ForestParams(n_trees=n_trees)
    motor = averaged_importance(X, prep.labels["motor"][prep.pool], trials, params, seed)
    total = averaged_importance(X, prep.labels["total"][prep.pool], trials, params, seed)
    combined = (motor + total) / 2.0
    idx = select_binning_feature(motor, total)
    names = prep.dataset.feature_names
    return {
        "features": list(names),
        "motor": [float(v) for v in motor],
        "total": [float(v) for v in total],
        "combined": [float(v) for v in combined],
        "selected_index": idx,
        "selected_name": names[idx],
        "rank_motor": [names[i] for i in np.argsort(-motor, kind="stable")],
        "rank_total": [names[i] for i in np.argsort(-total, kind="stable")],
        "trials": trials,
        "n_trees": n_trees,
        "seed": seed,
    }


# -- encoder -----------------------------------------------------------------


def train_encoder_for(
    prep: PreparedData,
    feature_index: int,
    K: int = 5,
    epochs_per_fold: int = 200,
    folds: int = 10,
    seed: int = 2024,
    alpha_convention: str = "anchor",
) -> tuple[EncoderWeights, TrainingLog]:
    """Fit the binning on the pool's column ``feature_index`` and train the encoder."""
    binning = fit_binning(prep.X[prep.pool, feature_index], K, feature_index)
    cfg = TrainConfig(
        K=K,
        epochs_per_fold=epochs_per_fold,
        folds=folds,
        seed=seed,
        alpha_convention=alpha_convention,
    )
    fold_rows = [(f.train_rows, f.valid_rows) for f in prep.folds]
    return train_encoder(
        prep.X, fold_rows, binning, cfg, feature_name=prep.dataset.feature_names[feature_index]
    )


def resolve_feature_index(config: ExperimentConfig, prep: PreparedData) -> int:
    if config.feature is not None:
        try:
            return prep.dataset.feature_index(config.feature)
        except ValueError:
            raise NoroError(
                f"unknown feature {config.feature!r}; choose from {', '.join(prep.dataset.feature_names)}"
            ) from None
    report = select_features(prep, config.rf_trials, config.rf_trees, config.base_seed)
    return report["selected_index"]


def encoder_from_config(config: ExperimentConfig, prep: PreparedData) -> tuple[EncoderWeights, TrainingLog]:
    idx = resolve_feature_index(config, prep)
    return train_encoder_for(
        prep, idx, config.bins, config.epochs_per_fold, config.encoder_folds,
        config.base_seed, config.alpha_convention,
    )


# -- evaluation --------------------------------------------------------------


def _snr_code(snr: float) -> int:
    return -1 if snr == NO_NOISE else int(round(snr * 1000))


def noisy_features(prep: PreparedData, snr: float, trial: int, seed: int, power_scope: str = "matrix"):
    """(pool, test) feature blocks after noise injection for one trial."""
    X_pool, X_test = prep.X[prep.pool], prep.X[prep.test]
    if snr == NO_NOISE:
        return X_pool.copy(), X_test.copy()
    code = _snr_code(snr)
    pool_noisy = inject(X_pool, snr, [seed, trial, code, 0])
    powers = feature_power(X_pool) if power_scope == "train" else None
    test_noisy = inject(X_test, snr, [seed, trial, code, 1], powers=powers)
    return pool_noisy, test_noisy


def _mean_triple(triples: list[metrics.ErrorTriple]) -> metrics.ErrorTriple:
    return metrics.ErrorTriple(
        *(float(np.mean([t.get(m) for t in triples])) for m in metrics.METRICS)
    )


def run_trials(config: ExperimentConfig, prep: PreparedData, encoder: EncoderWeights) -> dict:
    """Per-trial fold-averaged error triples keyed by (target, model, snr, variant)."""
    if encoder.d != prep.X.shape[1]:
        raise NoroError(f"encoder expects {encoder.d} features, data has {prep.X.shape[1]}")
    pool_pos = {row: i for i, row in enumerate(prep.pool)}
    fold_pos = [
        (np.array([pool_pos[r] for r in f.train_rows]), f)
        for f in prep.folds[: config.eval_folds]
    ]
    y_pool = {t: prep.labels[t][prep.pool] for t in config.targets}
    y_test = {t: prep.labels[t][prep.test] for t in config.targets}
    if config.denormalize:
        y_test_eval = {t: unscale_labels(y_test[t], prep.label_stats[t]) for t in config.targets}
    else:
        y_test_eval = y_test

    results: dict = {}
    for trial in range(config.trials):
        for snr in config.snr_list:
            X_pool, X_test = noisy_features(prep, snr, trial, config.base_seed, config.power_scope)
            views = {
                "baseline": (X_pool, X_test),
                "noro": (encoder.augment(X_pool), encoder.augment(X_test)),
            }
            for kind in config.models:
                spec = config.regressor_spec(kind, trial)
                for target in config.targets:
                    for variant in VARIANTS:
                        Xp, Xt = views[variant]
                        fold_triples = []
                        for train_pos, fold in fold_pos:
                            try:
                                model = fit_model(spec, Xp[train_pos], y_pool[target][train_pos])
                                pred = model.predict(Xt)
                            except NoroError as exc:
                                raise NoroError(
                                    f"{exc} (fold {fold.fold_index}, model {kind}, "
                                    f"snr {snr_label(snr)}, trial {trial}, {variant})"
                                ) from exc
                            if config.denormalize:
                                pred = unscale_labels(pred, prep.label_stats[target])
                            fold_triples.append(metrics.error_triple(y_test_eval[target], pred))
                        key = (target, kind, snr, variant)
                        results.setdefault(key, []).append(_mean_triple(fold_triples))
            logger.info("trial %d snr %s done", trial, snr_label(snr))
    return results


def _summary_dict(s: metrics.MetricSummary) -> dict:
    return {"mean": s.mean, "std": s.std}


def summarize(config: ExperimentConfig, results: dict) -> tuple[list, list]:
    per_cell, relative = [], []
    for target in config.targets:
        for kind in config.models:
            for snr in config.snr_list:
                summaries = {}
                for variant in VARIANTS:
                    trials = results[(target, kind, snr, variant)]
                    s = metrics.aggregate_trials(trials)
                    summaries[variant] = s
                    per_cell.append({
                        "target": target,
                        "model": kind,
                        "snr": snr_label(snr),
                        "variant": variant,
                        "trials": s.n_trials,
                        **{m: _summary_dict(s.get(m)) for m in metrics.METRICS},
                    })
                for m in metrics.METRICS:
                    est = metrics.relative_error(summaries["baseline"].get(m), summaries["noro"].get(m))
                    entry = {
                        "target": target,
                        "model": kind,
                        "snr": snr_label(snr),
                        "metric": m,
                        "delta_hat": est.delta_hat,
                        "sigma_hat": est.sigma_hat,
                        "significant": None,
                        "p": None,
                        "test": None,
                    }
                    if config.trials >= 2:
                        a = [t.get(m) for t in results[(target, kind, snr, "baseline")]]
                        b = [t.get(m) for t in results[(target, kind, snr, "noro")]]
                        sig = metrics.significance_flag(
                            a, b, config.significance_level, paired=config.paired_test
                        )
                        entry.update(significant=sig.significant, p=sig.p, test=sig.test)
                    relative.append(entry)
    return per_cell, relative


def feature_space_views(config: ExperimentConfig, prep: PreparedData, encoder: EncoderWeights):
    """Test-set feature matrices for the cluster analysis.

    Yields ``(space, snr, matrix)`` for the clean features and each finite SNR
    (trial 0 noise), in original and augmented space. Bin labels come from the
    clean values of the binning feature so noisy points keep their bins.
    """
    labels = assign_bins(encoder.binning, prep.X[prep.test, encoder.feature_index])
    views = []
    levels = [NO_NOISE] + [s for s in config.snr_list if s != NO_NOISE]
    for snr in levels:
        _, X_test = noisy_features(prep, snr, 0, config.base_seed, config.power_scope)
        views.append(("original", snr, X_test))
        views.append(("augmented", snr, encoder.augment(X_test)))
    return labels, views


def cluster_analysis(config: ExperimentConfig, prep: PreparedData, encoder: EncoderWeights):
    labels, views = feature_space_views(config, prep, encoder)
    rows, pca_rows = [], []
    if len(np.unique(labels)) < 2:
        logger.warning("test bins collapse to a single label; skipping cluster metrics")
        return rows, pca_rows, labels
    for space, snr, X in views:
        q = metrics.cluster_quality(X, labels)
        rows.append({
            "space": space,
            "noisy": snr != NO_NOISE,
            "snr": snr_label(snr),
            "silhouette": q.silhouette,
            "ch": q.calinski_harabasz,
        })
        proj = metrics.pca_2d(X)
        for i in range(X.shape[0]):
            pca_rows.append((space, snr_label(snr), int(prep.test[i]), int(labels[i]), proj[i, 0], proj[i, 1]))
    return rows, pca_rows, labels


@dataclass
class ExperimentReport:
    doc: dict
    pca_rows: list

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=2, allow_nan=True) + "\n"

    def cells_csv(self) -> str:
        return cells_csv(self.doc)

    def relative_csv(self) -> str:
        return relative_csv(self.doc)

    def pca_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["space", "snr", "row", "bin", "pc1", "pc2"])
        for space, snr, row, b, p1, p2 in self.pca_rows:
            w.writerow([space, snr, row, b, repr(float(p1)), repr(float(p2))])
        return out.getvalue()


def cells_csv(doc: dict) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    cols = ["target", "model", "snr", "variant", "trials"]
    w.writerow(cols + [f"{m}_{s}" for m in metrics.METRICS for s in ("mean", "std")])
    for c in doc["per_cell"]:
        w.writerow([c[k] for k in cols] + [repr(c[m][s]) for m in metrics.METRICS for s in ("mean", "std")])
    return out.getvalue()


def relative_csv(doc: dict) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    cols = ["target", "model", "snr", "metric", "delta_hat", "sigma_hat", "significant", "p", "test"]
    extra = ["k"] if doc["relative"] and "k" in doc["relative"][0] else []
    w.writerow(extra + cols)
    for r in doc["relative"]:
        w.writerow([r[k] for k in extra] + ["" if r[k] is None else r[k] for k in cols])
    return out.getvalue()


def run_pipeline(
    config: ExperimentConfig,
    encoder: EncoderWeights | None = None,
    prep: PreparedData | None = None,
    with_clusters: bool = True,
) -> ExperimentReport:
    """Evaluate baseline vs augmented downstream models under the configured noise."""
    prep = prep or prepare_from_config(config)
    if encoder is None:
        encoder, _ = encoder_from_config(config, prep)
    results = run_trials(config, prep, encoder)
    per_cell, relative = summarize(config, results)
    per_trial = [
        {"target": t, "model": k, "snr": snr_label(s), "variant": v, "trial": i,
         **{m: getattr(e, m) for m in metrics.METRICS}}
        for (t, k, s, v), triples in results.items()
        for i, e in enumerate(triples)
    ]
    cluster_rows, pca_rows = [], []
    if with_clusters:
        cluster_rows, pca_rows, _ = cluster_analysis(config, prep, encoder)
    test_bins = assign_bins(encoder.binning, prep.X[prep.test, encoder.feature_index])
    doc = {
        "config_echo": config.echo(),
        "encoder": {
            "feature_index": encoder.feature_index,
            "feature_name": encoder.feature_name,
            "k": encoder.K,
            "validation_loss": encoder.validation_loss,
            "test_bin_counts": [int(c) for c in bin_counts(test_bins, encoder.K)],
        },
        "split": {
            "train": len(prep.folds[0].train_rows),
            "valid": len(prep.folds[0].valid_rows),
            "test": len(prep.test),
        },
        "units": "original" if config.denormalize else "z-score",
        "per_cell": per_cell,
        "relative": relative,
        "per_trial": per_trial,
        "cluster_quality": cluster_rows,
    }
    return ExperimentReport(doc, pca_rows)


def sweep_bins(
    config: ExperimentConfig, K_values, prep: PreparedData | None = None
) -> tuple[list[dict], dict[int, TrainingLog]]:
    """Train one encoder per ``K`` and collect relative-error rows tagged with ``k``."""
    prep = prep or prepare_from_config(config)
    feature_index = resolve_feature_index(config, prep)
    rows, logs = [], {}
    for K in K_values:
        enc, log = train_encoder_for(
            prep, feature_index, int(K), config.epochs_per_fold, config.encoder_folds,
            config.base_seed, config.alpha_convention,
        )
        logs[int(K)] = log
        report = run_pipeline(config.replace(bins=int(K)), enc, prep, with_clusters=False)
        rows.extend({"k": int(K), **r} for r in report.doc["relative"])
    return rows, logs
