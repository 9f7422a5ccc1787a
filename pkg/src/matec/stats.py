"""One-sample Wilcoxon signed-rank test and Likert survey summaries.

The test uses the tie-corrected normal approximation with a 0.5 continuity
correction toward the mean, matching standard statistical software behavior
when ties are present (the usual regime for 1-5 rating data). The exact
permutation distribution is out of scope.
"""
from __future__ import annotations

import math
from enum import Enum
from statistics import median
from typing import Mapping, Sequence

from .domain import DomainError, FrozenModel


class AllZeroDifferences(DomainError):
    """Every sample equals the hypothesized value; the test is undefined."""


class EmptyQuestion(DomainError):
    pass


class RatingOutOfRange(DomainError):
    pass


class TestMethod(str, Enum):
    __test__ = False  # "Test" prefix is statistical, not a pytest case
    NORMAL_APPROX_TIE_CORRECTED = "normal_approx_tie_corrected"


class TestResult(FrozenModel):
    __test__ = False

    n_effective: int
    w_plus: float
    z: float
    p_two_sided: float
    method: TestMethod = TestMethod.NORMAL_APPROX_TIE_CORRECTED


class SurveySummary(FrozenModel):
    n: int
    median: float
    counts: dict[int, int]  # rating (1..5) -> occurrences
    test: TestResult | None  # None when every rating equals the neutral value


def _midranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n with ties sharing the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1  # positions are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def wilcoxon_one_sample(samples: Sequence[float], mu: float) -> TestResult:
    """Test whether the sample median deviates from ``mu`` (two-sided).

    Differences equal to zero are dropped; absolute differences are ranked
    with midranks; the rank-sum variance carries the tie correction
    sum(t^3 - t)/48.
    """
    if not samples:
        raise DomainError("samples must be nonempty")
    diffs = [x - mu for x in samples if x != mu]
    n = len(diffs)
    if n == 0:
        raise AllZeroDifferences("all samples equal the hypothesized value")
    abs_diffs = [abs(d) for d in diffs]
    ranks = _midranks(abs_diffs)
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)

    mean = n * (n + 1) / 4
    variance = n * (n + 1) * (2 * n + 1) / 24
    tie_sizes: dict[float, int] = {}
    for d in abs_diffs:
        tie_sizes[d] = tie_sizes.get(d, 0) + 1
    variance -= sum(t**3 - t for t in tie_sizes.values()) / 48
    if variance <= 0:
        # Happens only when all |d| are tied into one group of n <= 1; n >= 1 here
        # and a single nonzero difference still has positive variance.
        raise DomainError("degenerate rank variance")

    centered = w_plus - mean
    if centered > 0:
        centered -= 0.5
    elif centered < 0:
        centered += 0.5
    z = centered / math.sqrt(variance)
    p = min(1.0, math.erfc(abs(z) / math.sqrt(2)))
    return TestResult(n_effective=n, w_plus=w_plus, z=z, p_two_sided=p)


def summarize_survey(
    responses: Mapping[str, Sequence[int]], mu: float = 3.0
) -> dict[str, SurveySummary]:
    """Per-question median, rating distribution, and signed-rank test vs ``mu``."""
    out: dict[str, SurveySummary] = {}
    for question, ratings in responses.items():
        if not ratings:
            raise EmptyQuestion(f"question {question!r} has no ratings")
        for r in ratings:
            if r not in (1, 2, 3, 4, 5):
                raise RatingOutOfRange(f"question {question!r}: rating {r} outside 1..5")
        counts = {value: 0 for value in range(1, 6)}
        for r in ratings:
            counts[r] += 1
        try:
            test: TestResult | None = wilcoxon_one_sample(list(ratings), mu)
        except AllZeroDifferences:
            test = None
        out[question] = SurveySummary(
            n=len(ratings), median=float(median(ratings)), counts=counts, test=test
        )
    return out


def format_survey_table(summaries: Mapping[str, SurveySummary]) -> str:
    """Fixed-width table for the CLI; p values at three significant figures."""
    header = f"{'question':<28} {'n':>3} {'median':>6} {'1..5 counts':>15} {'W+':>7} {'z':>7} {'p':>8}"
    lines = [header, "-" * len(header)]
    for question in sorted(summaries):
        s = summaries[question]
        dist = "/".join(str(s.counts[v]) for v in range(1, 6))
        if s.test is None:
            stats_cols = f"{'-':>7} {'-':>7} {'-':>8}"
        else:
            stats_cols = f"{s.test.w_plus:>7.1f} {s.test.z:>7.3f} {s.test.p_two_sided:>8.3g}"
        lines.append(f"{question:<28} {s.n:>3} {s.median:>6.1f} {dist:>15} {stats_cols}")
    return "\n".join(lines)
