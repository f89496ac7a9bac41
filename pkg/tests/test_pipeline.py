import json
import math

import numpy as np
import pytest

from noro.config import ExperimentConfig, parse_snr_list, read_config_file, snr_label
from noro.errors import ConfigError, NoroError
from noro.metrics import METRICS
from noro.noise import NO_NOISE
from noro.pipeline import (
    noisy_features,
    prepare,
    run_pipeline,
    sweep_bins,
    train_encoder_for,
)


@pytest.fixture(scope="module")
def prep(small_surrogate):
    return prepare(small_surrogate, seed=2024)


@pytest.fixture(scope="module")
def encoder(prep):
    enc, _ = train_encoder_for(prep, feature_index=14, K=5, epochs_per_fold=5, folds=3)
    return enc


def small_config(**kw):
    base = dict(snr_list=(NO_NOISE, 20.0), models=("ridge", "knn"), trials=2, eval_folds=2,
                epochs_per_fold=5, encoder_folds=3, rf_trials=1, rf_trees=10, target="motor")
    base.update(kw)
    return ExperimentConfig(**base)


class TestPrepare:
    def test_pool_normalized(self, prep):
        Xp = prep.X[prep.pool]
        np.testing.assert_allclose(Xp.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(Xp.std(axis=0), 1.0, atol=1e-10)
        for t in ("motor", "total"):
            assert prep.labels[t][prep.pool].mean() == pytest.approx(0.0, abs=1e-10)

    def test_disjoint_pool_and_test(self, prep):
        assert not set(prep.pool) & set(prep.test)
        assert len(prep.pool) + len(prep.test) == prep.dataset.n_rows


class TestNoise:
    def test_clean_views_untouched(self, prep):
        pool, test = noisy_features(prep, NO_NOISE, 0, 2024)
        np.testing.assert_array_equal(pool, prep.X[prep.pool])
        np.testing.assert_array_equal(test, prep.X[prep.test])

    def test_trials_draw_fresh_noise(self, prep):
        a = noisy_features(prep, 10.0, 0, 2024)[1]
        b = noisy_features(prep, 10.0, 1, 2024)[1]
        assert not np.array_equal(a, b)

    def test_train_power_scope(self, prep):
        a = noisy_features(prep, 10.0, 0, 2024, "matrix")[1]
        b = noisy_features(prep, 10.0, 0, 2024, "train")[1]
        assert a.shape == b.shape and not np.array_equal(a, b)


class TestRunPipeline:
    def test_report_complete(self, prep, encoder):
        cfg = small_config()
        doc = run_pipeline(cfg, encoder, prep).doc
        cells = {(c["model"], c["snr"], c["variant"]) for c in doc["per_cell"]}
        assert cells == {(m, s, v) for m in ("ridge", "knn") for s in ("none", 20)
                         for v in ("baseline", "noro")}
        for c in doc["per_cell"]:
            for m in METRICS:
                assert c[m]["mean"] > 0 and c[m]["std"] >= 0
        assert len(doc["relative"]) == 2 * 2 * 3
        for r in doc["relative"]:
            assert r["test"] == "welch-t" and 0 <= r["p"] <= 1
        assert len(doc["per_trial"]) == 2 * 2 * 2 * 2
        spaces = {(r["space"], r["snr"]) for r in doc["cluster_quality"]}
        assert spaces == {(s, n) for s in ("original", "augmented") for n in ("none", 20)}
        assert doc["split"]["test"] == len(prep.test)
        assert sum(doc["encoder"]["test_bin_counts"]) == len(prep.test)

    def test_deterministic_bytes(self, prep, encoder):
        cfg = small_config()
        a = run_pipeline(cfg, encoder, prep)
        b = run_pipeline(cfg, encoder, prep)
        assert a.to_json() == b.to_json()
        assert a.pca_csv() == b.pca_csv()

    def test_single_trial_has_no_significance(self, prep, encoder):
        doc = run_pipeline(small_config(trials=1), encoder, prep, with_clusters=False).doc
        assert all(r["significant"] is None for r in doc["relative"])
        assert doc["cluster_quality"] == []

    def test_denormalized_units(self, prep, encoder):
        z = run_pipeline(small_config(trials=1), encoder, prep, with_clusters=False).doc
        o = run_pipeline(small_config(trials=1, denormalize=True), encoder, prep, with_clusters=False).doc
        scale = prep.label_stats["motor"].label_std
        assert o["units"] == "original"
        assert o["per_cell"][0]["rmse"]["mean"] == pytest.approx(z["per_cell"][0]["rmse"]["mean"] * scale)

    def test_encoder_width_mismatch(self, prep, encoder):
        from noro.dataset import Dataset
        import dataclasses

        ds = prep.dataset
        narrow = dataclasses.replace(ds, features=ds.features[:, :15], feature_names=ds.feature_names[:15])
        with pytest.raises(NoroError, match="features"):
            run_pipeline(small_config(trials=1), encoder, prepare(narrow), with_clusters=False)

    def test_sweep_rows_tagged(self, prep):
        rows, logs = sweep_bins(small_config(trials=1, feature="DFA", snr_list=(20.0,)), [3, 4], prep)
        assert sorted(logs) == [3, 4]
        assert {r["k"] for r in rows} == {3, 4}


class TestConfig:
    def test_snr_tokens(self):
        assert parse_snr_list("none, 10,20") == (math.inf, 10.0, 20.0)
        assert snr_label(math.inf) == "none" and snr_label(10.0) == 10

    def test_bad_snr(self):
        with pytest.raises(ConfigError):
            parse_snr_list("ten")

    def test_unknown_model(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(models=("svm",))

    def test_config_file(self, tmp_path):
        p = tmp_path / "exp.ini"
        p.write_text("[experiment]\nsnr = 5, none\nmodels = ridge, bagged\ntrials = 3\n\n"
                     "[model.ridge]\nlam = 0.5\n")
        cfg = ExperimentConfig(**read_config_file(p))
        assert cfg.snr_list == (5.0, math.inf)
        assert cfg.models == ("ridge", "bagged_trees")
        assert cfg.regressor_spec("ridge", 0).params["lam"] == 0.5
        assert cfg.regressor_spec("ridge", 2).seed == cfg.base_seed + 2

    def test_config_file_unknown_key(self, tmp_path):
        p = tmp_path / "exp.ini"
        p.write_text("[experiment]\nflavour = sour\n")
        with pytest.raises(ConfigError):
            read_config_file(p)

    def test_echo_is_json(self):
        json.dumps(ExperimentConfig().echo(), allow_nan=False)
