"""Seed-level statistics: t-based confidence intervals, paired tests, effect
sizes, and family-wise correction.

Quantiles and tail probabilities come from the regularized incomplete beta
function (scipy.special), checked in tests against published critical values.
Degenerate identical pairs are reported as no-difference (p = 1, d = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy import special


def t_sf(t: float, df: int) -> float:
    """Two-sided tail probability of the t distribution via I_x(df/2, 1/2)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    x = df / (df + t * t)
    return float(special.betainc(df / 2.0, 0.5, x))


def t_quantile(prob: float, df: int) -> float:
    """Upper quantile t such that P(|T| <= t) = prob (e.g. 0.95 -> t_{0.975})."""
    if not (0.0 < prob < 1.0):
        raise ValueError("prob must be in (0, 1)")
    return float(special.stdtrit(df, 0.5 + prob / 2.0))


def mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def sample_variance(xs: Sequence[float]) -> float:
    m = mean(xs)
    return sum((x - m) ** 2 for x in xs) / (len(xs) - 1)


def ci95_halfwidth(xs: Sequence[float]) -> float:
    n = len(xs)
    if n < 2:
        raise ValueError("need at least two samples")
    return t_quantile(0.95, n - 1) * math.sqrt(sample_variance(xs) / n)


def paired_t(sample: Sequence[float], comparator: Sequence[float]) -> tuple[float, float]:
    """(t statistic, two-sided p). Zero-variance zero-mean differences count
    as no difference."""
    if len(sample) != len(comparator):
        raise ValueError("paired samples must have equal length")
    n = len(sample)
    if n < 2:
        raise ValueError("need at least two pairs")
    diffs = [a - b for a, b in zip(sample, comparator)]
    md = mean(diffs)
    var = sample_variance(diffs)
    if var == 0.0:
        if md == 0.0:
            return 0.0, 1.0
        return math.inf, 0.0
    t = md / math.sqrt(var / n)
    return t, t_sf(abs(t), n - 1)


def cohens_d(sample: Sequence[float], comparator: Sequence[float]) -> float:
    """Pooled-standard-deviation effect size."""
    n1, n2 = len(sample), len(comparator)
    if n1 < 2 or n2 < 2:
        raise ValueError("need at least two samples per group")
    diff = mean(sample) - mean(comparator)
    pooled = ((n1 - 1) * sample_variance(sample) + (n2 - 1) * sample_variance(comparator)) \
        / (n1 + n2 - 2)
    if pooled == 0.0:
        return 0.0
    return diff / math.sqrt(pooled)


def bonferroni(p: float, comparisons: int) -> float:
    if comparisons < 1:
        raise ValueError("comparisons must be >= 1")
    return min(1.0, comparisons * p)


@dataclass(frozen=True)
class StatsSummary:
    mean: float
    ci95_halfwidth: float
    cohens_d: float
    paired_t_p: float
    bonferroni_p: float
    n: int


def summarize(samples: Sequence[float], comparator: Sequence[float],
              family_size: int = 1) -> StatsSummary:
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    _, p = paired_t(samples, comparator)
    return StatsSummary(
        mean=mean(samples),
        ci95_halfwidth=ci95_halfwidth(samples),
        cohens_d=cohens_d(samples, comparator),
        paired_t_p=p,
        bonferroni_p=bonferroni(p, family_size),
        n=len(samples),
    )
