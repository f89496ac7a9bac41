import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from noro.dataset import (
    CSV_COLUMNS,
    FEATURE_NAMES,
    NormalizationStats,
    parse_csv,
    pool_rows,
    split_folds,
    to_csv,
    zscore_apply,
    zscore_fit,
    zscore_inverse,
    zscore_labels,
)
from noro.errors import NoroError, ParseError, ShapeError
from noro.synthetic import make_surrogate

HEADER = ",".join(CSV_COLUMNS)


def _row(i, hnr="21.0"):
    feats = ["0.005", "3e-05", "0.002", "0.003", "0.007", "0.03", "0.3", "0.015",
             "0.018", "0.024", "0.045", "0.02", hnr, "0.5", "0.65", "0.2"]
    return ",".join([str(1 + i % 2), "70", "0", str(5.0 + i), str(20 + i), str(30 + i)] + feats)


class TestParseCsv:
    def test_parses_rows_in_order(self):
        text = "\n".join([HEADER] + [_row(i) for i in range(5)]) + "\n"
        ds = parse_csv(text.encode("utf-8"))
        assert ds.features.shape == (5, 16)
        assert ds.feature_names == FEATURE_NAMES
        np.testing.assert_array_equal(ds.motor, [20, 21, 22, 23, 24])
        np.testing.assert_array_equal(ds.total, [30, 31, 32, 33, 34])
        np.testing.assert_array_equal(ds.test_time, [5, 6, 7, 8, 9])
        assert ds.features[0, FEATURE_NAMES.index("HNR")] == 21.0

    def test_metadata_not_in_features(self):
        ds = parse_csv("\n".join([HEADER, _row(0)]))
        assert ds.age[0] == 70 and ds.sex[0] == 0
        assert "age" not in ds.feature_names

    def test_header_only(self):
        with pytest.raises(ParseError, match="no data rows"):
            parse_csv(HEADER + "\n")

    def test_empty_file(self):
        with pytest.raises(ParseError, match="empty"):
            parse_csv(b"")

    def test_nan_cell_names_row_and_column(self):
        rows = [_row(0), _row(1), _row(2, hnr="NaN"), _row(3)]
        with pytest.raises(ParseError) as exc:
            parse_csv("\n".join([HEADER] + rows))
        assert exc.value.row == 3
        assert exc.value.column == "HNR"
        assert "row 3" in str(exc.value) and "HNR" in str(exc.value)

    def test_non_numeric_cell(self):
        with pytest.raises(ParseError, match="row 1, column HNR"):
            parse_csv("\n".join([HEADER, _row(0, hnr="abc")]))

    def test_missing_column(self):
        header = HEADER.replace(",PPE", "")
        with pytest.raises(ParseError, match="PPE"):
            parse_csv(header + "\n" + _row(0))

    def test_roundtrip_through_csv(self):
        ds = make_surrogate(n_rows=60, n_subjects=5, seed=1)
        back = parse_csv(to_csv(ds))
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.motor, ds.motor)
        np.testing.assert_array_equal(back.subject_ids, ds.subject_ids)


class TestZscore:
    def test_population_std(self):
        st_ = zscore_fit(np.array([[1.0], [2.0], [3.0]]))
        assert st_.feature_means[0] == pytest.approx(2.0)
        assert st_.feature_stds[0] == pytest.approx(np.sqrt(2 / 3), abs=1e-12)
        assert st_.feature_stds[0] == pytest.approx(0.81650, abs=1e-5)

    def test_constant_column_flagged(self):
        st_ = zscore_fit(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]))
        assert st_.feature_means[0] == 5.0
        assert st_.feature_stds[0] == 1.0
        assert st_.degenerate.tolist() == [True, False]

    def test_two_point_column(self):
        st_ = zscore_fit(np.array([[-1.0], [1.0]]))
        assert st_.feature_means[0] == 0.0
        assert st_.feature_stds[0] == 1.0

    def test_apply_values(self):
        st_ = NormalizationStats(np.array([2.0]), np.array([0.81650]))
        out = zscore_apply(np.array([[1.0], [2.0], [3.0]]), st_)
        np.testing.assert_allclose(out[:, 0], [-1.22474, 0.0, 1.22474], atol=1e-5)

    def test_identity_stats(self, rng):
        X = rng.normal(size=(10, 3))
        out = zscore_apply(X, NormalizationStats(np.zeros(3), np.ones(3)))
        np.testing.assert_array_equal(out, X)

    def test_labels_use_label_stats(self):
        X = np.zeros((4, 1)) + np.arange(4)[:, None]
        y = np.array([1.0, 2.0, 3.0, 4.0])
        st_ = zscore_fit(X, y)
        z = zscore_labels(y, st_)
        assert z.mean() == pytest.approx(0.0, abs=1e-12)
        assert z.std() == pytest.approx(1.0, abs=1e-12)

    def test_too_few_rows(self):
        with pytest.raises(NoroError):
            zscore_fit(np.ones((1, 3)))

    def test_dimension_mismatch(self):
        st_ = zscore_fit(np.random.default_rng(0).normal(size=(5, 3)))
        with pytest.raises(ShapeError):
            zscore_apply(np.ones((5, 2)), st_)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 5)),
                  elements=st.floats(-1e4, 1e4, allow_nan=False)))
    def test_fit_data_normalizes_and_roundtrips(self, X):
        st_ = zscore_fit(X)
        Z = zscore_apply(X, st_)
        ok = ~st_.degenerate
        scale = np.maximum(1.0, np.abs(X).max())
        np.testing.assert_allclose(zscore_inverse(Z, st_), X, atol=1e-9 * scale)
        # columns with tiny but non-degenerate spread lose precision; the
        # exact-normalization claim is for well-conditioned columns
        good = ok & (st_.feature_stds > 1e-6 * scale)
        if good.any():
            np.testing.assert_allclose(Z[:, good].mean(axis=0), 0.0, atol=1e-9)
            np.testing.assert_allclose(Z[:, good].std(axis=0), 1.0, atol=1e-9)


class TestSplitFolds:
    def test_canonical_sizes(self):
        folds = split_folds(5875, seed=2024)
        assert len(folds) == 10
        for f in folds:
            assert (len(f.train_rows), len(f.valid_rows), len(f.test_rows)) == (2700, 300, 2875)
            assert not set(f.train_rows) & set(f.valid_rows)
            assert not set(f.train_rows) & set(f.test_rows)
            assert not set(f.valid_rows) & set(f.test_rows)
            covered = np.concatenate([f.train_rows, f.valid_rows, f.test_rows])
            np.testing.assert_array_equal(np.sort(covered), np.arange(5875))

    def test_validation_blocks_cover_pool_once(self):
        folds = split_folds(5875, seed=2024)
        pool = pool_rows(folds)
        assert len(pool) == 3000 == len(set(pool))
        for f in folds:
            np.testing.assert_array_equal(np.sort(np.concatenate([f.train_rows, f.valid_rows])),
                                          np.sort(pool))

    def test_deterministic(self):
        a, b = split_folds(5875, seed=2024), split_folds(5875, seed=2024)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa.train_rows, fb.train_rows)
            np.testing.assert_array_equal(fa.valid_rows, fb.valid_rows)
            np.testing.assert_array_equal(fa.test_rows, fb.test_rows)

    def test_seed_changes_partition(self):
        a, b = split_folds(5875, seed=2024), split_folds(5875, seed=2025)
        assert set(a[0].test_rows) != set(b[0].test_rows)

    def test_scaled_for_other_sizes(self):
        folds = split_folds(200, seed=1)
        pool = pool_rows(folds)
        assert len(pool) == round(200 * 3000 / 5875)
        assert len(pool) + len(folds[0].test_rows) == 200

    def test_too_small(self):
        with pytest.raises(NoroError):
            split_folds(19)

    def test_subject_disjoint(self):
        ds = make_surrogate(n_rows=600, n_subjects=20, seed=2)
        folds = split_folds(ds, seed=5, subject_disjoint=True)
        pool = pool_rows(folds)
        test = folds[0].test_rows
        assert not set(ds.subject_ids[pool]) & set(ds.subject_ids[test])
        assert len(pool) + len(test) == 600
