"""Spearman correlation tests: brute-force rank oracle, ties, matrix summaries."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialprosody.analysis import (
    CorrelationMatrix,
    correlation_matrix,
    render_summary,
    spearman,
    summarize_diagonal,
    write_matrix_csv,
)
from dialprosody.errors import DataError
from dialprosody.midlevel import N_DIMS, feature_labels


def average_ranks(x):
    """O(n^2) average ranks, independent of the library implementation."""
    x = np.asarray(x, dtype=float)
    ranks = np.empty(len(x))
    for i, v in enumerate(x):
        less = np.sum(x < v)
        equal = np.sum(x == v)
        # ranks of the tied block are less+1 .. less+equal; average them
        ranks[i] = less + (equal + 1) / 2.0
    return ranks


def brute_spearman(x, y):
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if denom == 0.0:
        return math.nan
    return float(np.sum(rx * ry) / denom)


class TestSpearman:
    def test_monotone_increasing_one(self):
        x = np.array([1.0, 5.0, 7.0, 20.0, 21.0])
        assert spearman(x, np.exp(x / 10.0)) == 1.0

    def test_monotone_decreasing_minus_one(self):
        x = np.array([1.0, 5.0, 7.0, 20.0, 21.0])
        assert spearman(x, -x ** 3) == -1.0

    def test_tied_example(self):
        rho = spearman([1.0, 2.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0])
        assert rho == pytest.approx(4.5 / math.sqrt(22.5), abs=1e-12)

    def test_self_correlation(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1, 50)
        assert spearman(x, x) == 1.0

    def test_constant_undefined(self):
        assert math.isnan(spearman([1.0, 1.0, 1.0, 1.0], [1.0, 2.0, 3.0, 4.0]))
        assert math.isnan(spearman([1.0, 2.0, 3.0, 4.0], [7.0, 7.0, 7.0, 7.0]))

    def test_errors(self):
        with pytest.raises(DataError):
            spearman([1.0, 2.0], [1.0, 2.0])  # too few
        with pytest.raises(DataError):
            spearman([1.0, 2.0, 3.0], [1.0, 2.0])  # length mismatch

    def test_brute_force_oracle_with_ties(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            n = int(rng.integers(3, 40))
            x = np.round(rng.normal(0, 2, n), 1)  # rounding plants ties
            y = np.round(rng.normal(0, 2, n), 1)
            expected = brute_spearman(x, y)
            got = spearman(x, y)
            if math.isnan(expected):
                assert math.isnan(got)
            else:
                assert got == pytest.approx(expected, abs=1e-10)

    @given(seed=st.integers(0, 10**6))
    @settings(max_examples=60, deadline=None)
    def test_symmetry_and_monotone_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 30))
        x = np.round(rng.normal(0, 1, n), 1)
        y = np.round(rng.normal(0, 1, n), 1)
        a = spearman(x, y)
        b = spearman(y, x)
        if math.isnan(a):
            assert math.isnan(b)
        else:
            assert a == pytest.approx(b, abs=1e-12)
            # rank correlation is invariant under strictly monotone maps
            c = spearman(np.exp(x), y)
            assert c == pytest.approx(a, abs=1e-12)


class TestCorrelationMatrix:
    def _random(self, n=20, seed=3):
        rng = np.random.default_rng(seed)
        X = np.round(rng.normal(0, 1, (n, N_DIMS)), 1)
        Y = np.round(rng.normal(0, 1, (n, N_DIMS)), 1)
        return X, Y

    def test_self_unit_diagonal(self):
        X, _ = self._random()
        m = correlation_matrix(X, X, "EN", "EN")
        np.testing.assert_allclose(np.diagonal(m.values), 1.0, atol=1e-12)

    def test_transpose_property(self):
        X, Y = self._random()
        m1 = correlation_matrix(X, Y, "EN", "ES")
        m2 = correlation_matrix(Y, X, "ES", "EN")
        np.testing.assert_allclose(m1.values, m2.values.T, atol=1e-12)

    def test_entrywise_oracle(self):
        X, Y = self._random(n=15, seed=9)
        m = correlation_matrix(X, Y, "EN", "ES")
        idx = [(0, 0), (0, 99), (42, 17), (99, 99), (7, 63)]
        for i, j in idx:
            assert m.values[i, j] == pytest.approx(
                brute_spearman(X[:, i], Y[:, j]), abs=1e-10
            )

    def test_constant_column_nan(self):
        X, Y = self._random(n=10, seed=1)
        X[:, 5] = 2.0
        Y[:, 8] = -1.0
        m = correlation_matrix(X, Y, "EN", "ES")
        assert np.all(np.isnan(m.values[5, :]))
        assert np.all(np.isnan(m.values[:, 8]))
        assert not math.isnan(m.values[0, 0])

    def test_values_clipped(self):
        X, Y = self._random(n=8, seed=2)
        m = correlation_matrix(X, Y, "EN", "ES")
        ok = ~np.isnan(m.values)
        assert np.all(m.values[ok] <= 1.0)
        assert np.all(m.values[ok] >= -1.0)

    def test_errors(self):
        X, Y = self._random(n=5)
        with pytest.raises(DataError):
            correlation_matrix(X[:2], Y[:2], "EN", "ES")  # too few pairs
        with pytest.raises(DataError):
            correlation_matrix(X, Y[:4], "EN", "ES")  # misaligned
        with pytest.raises(DataError):
            correlation_matrix(X[:, :99], Y[:, :99], "EN", "ES")

    def test_labels(self):
        X, Y = self._random(n=5)
        m = correlation_matrix(X, Y, "EN", "ES")
        assert m.row_labels()[0] == "EN:intensity_p0_5"
        assert m.col_labels()[94] == "ES:cpps_p30_50"
        assert len(m.row_labels()) == len(m.col_labels()) == 100


class TestDiagonalSummary:
    def test_identity_matrix(self):
        rng = np.random.default_rng(5)
        X = np.round(rng.normal(0, 1, (20, N_DIMS)), 1)
        m = correlation_matrix(X, X, "EN", "EN")
        s = summarize_diagonal(m, threshold=0.3)
        assert s.fraction_at_threshold == 1.0
        assert s.n_undefined_diagonal == 0
        assert len(s.per_feature_mean) == 10
        for name, mean in s.per_feature_mean:
            assert mean == pytest.approx(1.0, abs=1e-12)

    def test_anticorrelated_fraction_zero(self):
        rng = np.random.default_rng(6)
        X = np.round(rng.normal(0, 1, (20, N_DIMS)), 1)
        m = correlation_matrix(X, -X, "EN", "ES")
        s = summarize_diagonal(m, threshold=0.3)
        assert s.fraction_at_threshold == 0.0

    def test_undefined_diagonal_counted(self):
        rng = np.random.default_rng(8)
        X = np.round(rng.normal(0, 1, (12, N_DIMS)), 1)
        Y = X.copy()
        X[:, 3] = 0.0
        X[:, 4] = 9.0
        m = correlation_matrix(X, Y, "EN", "ES")
        s = summarize_diagonal(m)
        assert s.n_undefined_diagonal == 2

    def test_top_off_diagonal_order(self):
        values = np.zeros((N_DIMS, N_DIMS))
        values[0, 1] = 0.9
        values[2, 3] = -0.95
        values[4, 5] = 0.5
        np.fill_diagonal(values, 1.0)
        m = CorrelationMatrix(values=values, row_language="EN", col_language="ES", n=10)
        s = summarize_diagonal(m, top_k=3)
        labels = feature_labels()
        assert s.top_off_diagonal[0] == (f"EN:{labels[2]}", f"ES:{labels[3]}", -0.95)
        assert s.top_off_diagonal[1] == (f"EN:{labels[0]}", f"ES:{labels[1]}", 0.9)
        assert s.top_off_diagonal[2] == (f"EN:{labels[4]}", f"ES:{labels[5]}", 0.5)

    def test_render_mentions_key_stats(self):
        rng = np.random.default_rng(5)
        X = np.round(rng.normal(0, 1, (20, N_DIMS)), 1)
        s = summarize_diagonal(correlation_matrix(X, X, "EN", "EN"))
        text = render_summary(s)
        assert "pairs used: 20" in text
        assert "intensity" in text and "cpps" in text
        assert "top off-diagonal" in text


class TestMatrixCsv:
    def test_shape_and_labels(self, tmp_path):
        rng = np.random.default_rng(4)
        X = np.round(rng.normal(0, 1, (10, N_DIMS)), 1)
        Y = np.round(rng.normal(0, 1, (10, N_DIMS)), 1)
        m = correlation_matrix(X, Y, "EN", "ES")
        path = tmp_path / "corr.csv"
        write_matrix_csv(m, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 101
        header = lines[0].split(",")
        assert header[0] == ""  # empty corner cell
        assert header[1] == "ES:intensity_p0_5"
        assert len(header) == 101
        first = lines[1].split(",")
        assert first[0] == "EN:intensity_p0_5"
        # full-precision cells parse back exactly
        parsed = np.array(
            [[float(c) for c in line.split(",")[1:]] for line in lines[1:]]
        )
        np.testing.assert_array_equal(parsed, m.values)
