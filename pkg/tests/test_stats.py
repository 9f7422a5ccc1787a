"""Signed-rank arithmetic frozen against hand computation.

Accuracy ratings {4 x6, 5 x4} vs mu=3: differences are six 1s (mid-rank 3.5)
and four 2s (mid-rank 8.5), so W+ = 6*3.5 + 4*8.5 = 55, mean 27.5, variance
10*11*21/24 - (210+60)/48 = 90.625, z = (55-27.5-0.5)/sqrt(90.625) = 2.8362,
two-sided p = 0.004566. Usefulness {5 x4, 4 x4, 3 x2}: zeros drop, n=8,
W+ = 4*2.5 + 4*6.5 = 36, variance 8*9*17/24 - 120/48 = 48.5,
z = 17.5/sqrt(48.5) = 2.5129, p = 0.011979.
"""

from __future__ import annotations

import math
import time

import pytest
from hypothesis import given, settings, strategies as st

from matec.stats import (
    AllZeroDifferences,
    EmptyQuestion,
    RatingOutOfRange,
    TestMethod,
    format_survey_table,
    summarize_survey,
    wilcoxon_one_sample,
)

ACCURACY = [4, 4, 4, 4, 4, 4, 5, 5, 5, 5]
USEFULNESS = [5, 5, 5, 5, 4, 4, 4, 4, 3, 3]


class TestWilcoxon:
    def test_accuracy_ratings_hand_oracle(self):
        result = wilcoxon_one_sample(ACCURACY, mu=3)
        assert result.n_effective == 10
        assert result.w_plus == 55.0
        assert result.z == pytest.approx(2.83622, abs=1e-4)
        assert result.p_two_sided == pytest.approx(0.0045660, abs=1e-5)
        assert 0.0040 <= result.p_two_sided <= 0.0052
        assert round(result.p_two_sided, 3) == 0.005
        assert result.method is TestMethod.NORMAL_APPROX_TIE_CORRECTED

    def test_usefulness_reconstruction_hand_oracle(self):
        result = wilcoxon_one_sample(USEFULNESS, mu=3)
        assert result.n_effective == 8  # the two neutral ratings drop
        assert result.w_plus == 36.0
        assert result.z == pytest.approx(2.51291, abs=1e-4)
        assert result.p_two_sided == pytest.approx(0.0119790, abs=1e-5)
        assert 0.0095 <= result.p_two_sided <= 0.0149
        assert round(result.p_two_sided, 2) == 0.01

    def test_all_neutral_ratings_rejected(self):
        with pytest.raises(AllZeroDifferences):
            wilcoxon_one_sample([3, 3, 3], mu=3)

    def test_symmetric_pair_is_insignificant(self):
        result = wilcoxon_one_sample([2, 4], mu=3)
        assert result.w_plus == 1.5
        assert result.p_two_sided == pytest.approx(1.0, abs=0.05)

    def test_empty_samples_rejected(self):
        with pytest.raises(Exception):
            wilcoxon_one_sample([], mu=3)

    def test_w_plus_range_invariant(self):
        result = wilcoxon_one_sample(ACCURACY, mu=3)
        n = result.n_effective
        assert 0 <= result.w_plus <= n * (n + 1) / 2


ratings_lists = st.lists(st.integers(1, 5), min_size=2, max_size=25).filter(
    lambda xs: any(x != 3 for x in xs)
)


class TestWilcoxonProperties:
    @given(ratings_lists)
    @settings(max_examples=200, deadline=None)
    def test_sign_symmetry(self, xs):
        mirrored = [6 - x for x in xs]  # reflection through mu=3
        a = wilcoxon_one_sample(xs, mu=3)
        b = wilcoxon_one_sample(mirrored, mu=3)
        assert a.p_two_sided == pytest.approx(b.p_two_sided, abs=1e-12)

    @given(ratings_lists)
    @settings(max_examples=200, deadline=None)
    def test_zero_difference_invariance(self, xs):
        a = wilcoxon_one_sample(xs, mu=3)
        b = wilcoxon_one_sample(xs + [3, 3], mu=3)
        assert a.w_plus == b.w_plus
        assert a.p_two_sided == pytest.approx(b.p_two_sided, abs=1e-12)

    @given(st.lists(st.integers(4, 5), min_size=2, max_size=25))
    @settings(max_examples=200, deadline=None)
    def test_all_positive_maximizes_w_plus(self, xs):
        result = wilcoxon_one_sample(xs, mu=3)
        n = result.n_effective
        assert result.w_plus == n * (n + 1) / 2


class TestSummarizeSurvey:
    def test_accuracy_summary(self):
        summary = summarize_survey({"accuracy": ACCURACY})["accuracy"]
        assert summary.median == 4.0
        assert summary.counts == {1: 0, 2: 0, 3: 0, 4: 6, 5: 4}
        assert sum(summary.counts.values()) == summary.n == 10
        assert summary.test.w_plus == 55.0

    def test_even_n_midpoint_median(self):
        summary = summarize_survey({"comparison": [4, 4, 4, 5, 5, 5]})["comparison"]
        assert summary.median == 4.5

    def test_rating_out_of_range(self):
        with pytest.raises(RatingOutOfRange):
            summarize_survey({"q": [4, 7]})

    def test_empty_question(self):
        with pytest.raises(EmptyQuestion):
            summarize_survey({"q": []})

    def test_table_rendering(self):
        table = format_survey_table(summarize_survey({"accuracy": ACCURACY}))
        assert "accuracy" in table
        assert "0/0/0/6/4" in table
        assert "55.0" in table


def test_reproduction_runtime_under_one_second():
    start = time.perf_counter()
    wilcoxon_one_sample(ACCURACY, mu=3)
    wilcoxon_one_sample(USEFULNESS, mu=3)
    assert time.perf_counter() - start < 1.0


def test_p_value_is_two_sided_normal_tail():
    # cross-check the tail arithmetic on the accuracy z with erfc directly
    result = wilcoxon_one_sample(ACCURACY, mu=3)
    assert result.p_two_sided == pytest.approx(math.erfc(result.z / math.sqrt(2)), abs=1e-12)
