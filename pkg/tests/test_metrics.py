import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import exact_rank_sum_pvalue, pooled_t_pvalue, rank_sum_normal_no_ties
from stfnn.errors import ValidationError
from stfnn.metrics import improvement, rank_sum_test, rmse, significance_tests


class TestRmse:
    def test_examples(self):
        assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5), abs=1e-12)
        assert rmse([1, 2, 3], [1, 2, 3]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            rmse([1, 2], [1])
        with pytest.raises(ValidationError):
            rmse([], [])

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.floats(-10, 10))
    def test_shift_invariant(self, xs, c):
        a = np.array(xs)
        b = a[::-1].copy()
        assert rmse(a + c, b + c) == pytest.approx(rmse(a, b), abs=1e-6)


class TestImprovement:
    def test_examples(self):
        assert improvement(0.564, 0.461) == pytest.approx(18.262411, abs=1e-5)
        assert improvement(0.705, 0.709) == pytest.approx(-0.567376, abs=1e-5)
        assert improvement(1.0, 1.0) == 0.0

    def test_bad_baseline(self):
        with pytest.raises(ValidationError):
            improvement(0.0, 1.0)


def _distinct(n1, n2, seed):
    vals = np.random.default_rng(seed).permutation(np.arange(n1 + n2) * 0.37 + 0.1)
    return vals[:n1], vals[n1:]


class TestRankSum:
    @pytest.mark.parametrize("n1,n2", [(3, 4), (5, 5), (8, 8), (8, 6)])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_against_enumeration(self, n1, n2, seed):
        a, b = _distinct(n1, n2, seed)
        assert rank_sum_test(a, b, method="exact") == pytest.approx(exact_rank_sum_pvalue(a, b), abs=1e-12)

    def test_exact_rejects_ties(self):
        with pytest.raises(ValidationError):
            rank_sum_test([1, 2], [2, 3], method="exact")

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            rank_sum_test([1, 2], [3, 4], method="bogus")

    @given(st.integers(2, 30), st.integers(2, 30), st.integers(0, 10_000))
    def test_no_ties_matches_textbook(self, n1, n2, seed):
        a, b = _distinct(n1, n2, seed)
        assert rank_sum_test(a, b) == pytest.approx(rank_sum_normal_no_ties(a, b), abs=1e-12)

    def test_symmetric(self):
        a, b = _distinct(7, 9, 4)
        assert rank_sum_test(a, b) == pytest.approx(rank_sum_test(b, a), abs=1e-14)

    def test_ties_handled(self):
        p = rank_sum_test([1, 1, 2, 2], [2, 3, 3, 3])
        assert 0 < p < 1


class TestSignificance:
    @given(st.integers(0, 10_000))
    def test_t_against_pooled_formula(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.exponential(size=12), rng.exponential(size=15) + 0.2
        assert significance_tests(a, b).t_p_value == pytest.approx(pooled_t_pvalue(a, b), rel=1e-10)

    def test_identical_degenerate(self):
        r = significance_tests([0.5] * 5, [0.5] * 5)
        assert r.degenerate and r.t_p_value == 1.0 and r.wilcoxon_p_value == 1.0
        assert not r.significant()

    def test_separated_gaussians(self):
        rng = np.random.default_rng(7)
        a, b = rng.normal(0, 1, 35), rng.normal(3, 1, 35)
        r = significance_tests(np.abs(a), np.abs(b))
        assert r.t_p_value < 0.05 and r.wilcoxon_p_value < 0.05 and r.significant()

    def test_empty(self):
        with pytest.raises(ValidationError):
            significance_tests([], [1.0])

    # nearly identical samples make scipy warn about cancellation; the bounds must hold regardless
    @pytest.mark.filterwarnings("ignore:Precision loss occurred:RuntimeWarning")
    @given(st.lists(st.floats(0, 10), min_size=2, max_size=20), st.lists(st.floats(0, 10), min_size=2, max_size=20))
    def test_p_values_in_unit_interval(self, a, b):
        r = significance_tests(a, b)
        assert 0 <= r.t_p_value <= 1 and 0 <= r.wilcoxon_p_value <= 1
