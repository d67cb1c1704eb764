import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from stablerules.core import SplitSpec
from stablerules.errors import DimensionMismatch, EmptyInput, TooFewItems, TooFewSamples
from stablerules.evaluation import (PANELS, PRODUCT, WEIGHTED, beta_errors, classification_metrics,
                                    combine_beta_errors, correlation_profile, regression_metrics,
                                    spearman_consistency)


class TestBetaErrors:
    def test_identity(self):
        e = beta_errors(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 3.0]), SplitSpec.from_sizes(2, 1))
        assert (e.beta_s_err, e.beta_v_err, e.beta_err) == (0.0, 0.0, 0.0)

    def test_arithmetic(self):
        e = beta_errors(np.array([0.0, 0.0, 0.5]), np.array([1.0, 1.0, 0.5]), SplitSpec.from_sizes(2, 1))
        assert e.beta_s_err == 1.0 and e.beta_err == 0.5

    def test_table_row(self):
        e = combine_beta_errors(3.357, 0.430)
        assert e.beta_err == pytest.approx(1.894, abs=5e-4)
        assert abs(e.beta_err - (e.beta_s_err + e.beta_v_err) / 2) < 1e-9

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            beta_errors(np.zeros(2), np.zeros(3), SplitSpec.from_sizes(2, 1))


class TestRegression:
    def test_identity(self):
        assert regression_metrics([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_arithmetic(self):
        assert regression_metrics([3.0, -4.0], [0.0, 0.0]) == pytest.approx(np.sqrt(12.5))

    def test_two_pass_oracle(self, rng):
        pred, y = rng.normal(size=100), rng.normal(size=100)
        acc = 0.0
        for a, b in zip(pred, y):
            acc += (a - b) ** 2
        assert regression_metrics(pred, y) == pytest.approx((acc / 100) ** 0.5, abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            regression_metrics([], [])


class TestClassification:
    def test_perfect(self):
        m = classification_metrics([1, -1, 1], [1, -1, 1])
        assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_confusion(self):
        y = np.array([1, 1, 1, -1] + [-1] * 6)
        pred = np.array([1, 1, -1, 1] + [-1] * 6)
        m = classification_metrics(pred, y)
        assert m.precision == pytest.approx(2 / 3)
        assert m.recall == pytest.approx(2 / 3)
        assert m.f1 == pytest.approx(2 / 3)
        assert m.accuracy == pytest.approx(0.8)

    def test_undefined_flagged(self):
        m = classification_metrics([-1, -1], [-1, -1])
        assert m.precision == 0.0 and "precision" in m.undefined and "f1" in m.undefined


class TestCorrelationProfile:
    def test_self_correlation(self, rng):
        x = rng.normal(size=50)
        prof = correlation_profile(np.column_stack([x, x]))
        assert prof.panels["linear"][0, 1] == pytest.approx(1.0)

    def test_symmetric_square(self):
        x = np.array([1.0, -1.0] * 10)
        prof = correlation_profile(np.column_stack([x, x]))
        assert prof.panels["square"][0, 1] == pytest.approx(0.0, abs=1e-12)
        assert ("square", 0, 1) in prof.flagged

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            correlation_profile(np.zeros((2, 2)))

    def test_modes_agree_for_uniform(self, rng):
        V = rng.normal(size=(40, 3))
        a = correlation_profile(V, mode=PRODUCT)
        b = correlation_profile(V, np.full(40, 0.3), mode=WEIGHTED)
        for name in PANELS:
            np.testing.assert_allclose(a.panels[name], b.panels[name], atol=1e-12)

    @given(arrays(np.float64, (12, 3), elements=st.floats(-5, 5)),
           arrays(np.float64, 12, elements=st.floats(0.01, 2)))
    def test_bounded_and_linear_symmetric(self, V, w):
        for mode in (PRODUCT, WEIGHTED):
            prof = correlation_profile(V, w, mode)
            for M in prof.panels.values():
                assert np.all(np.abs(M) <= 1.0)
            lin = prof.panels["linear"]
            np.testing.assert_allclose(lin, lin.T, atol=1e-9)

    def test_product_matches_numpy(self, rng):
        V, w = rng.normal(size=(30, 2)), rng.uniform(0.5, 1.5, 30)
        wv = V * (w * 30 / w.sum())[:, None]
        prof = correlation_profile(V, w)
        assert prof.panels["cubic"][0, 1] == pytest.approx(np.corrcoef(wv[:, 0], wv[:, 1] ** 3)[0, 1])


class TestSpearman:
    def test_identical(self):
        assert spearman_consistency([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman_consistency([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_rank_formula(self):
        a, b = np.array([1, 2, 3, 4]), np.array([1, 3, 2, 4])
        d = a - b
        expected = 1 - 6 * np.sum(d ** 2) / (4 * (16 - 1))
        assert spearman_consistency(a, b) == pytest.approx(expected) == pytest.approx(0.8)

    def test_ties_average_rank(self):
        a, b = [1, 2, 2, 3], [1, 2, 3, 4]
        ra, rb = stats.rankdata(a), stats.rankdata(b)
        assert spearman_consistency(a, b) == pytest.approx(np.corrcoef(ra, rb)[0, 1])

    @given(st.lists(st.integers(-50, 50), min_size=8, max_size=8, unique=True),
           st.lists(st.integers(-50, 50), min_size=8, max_size=8))
    def test_monotone_invariance(self, a, b):
        a, b = np.array(a, dtype=float), np.array(b, dtype=float)
        assert spearman_consistency(np.exp(a / 5), b ** 3 + b) == pytest.approx(spearman_consistency(a, b))

    def test_too_few(self):
        with pytest.raises(TooFewItems):
            spearman_consistency([1], [1])
