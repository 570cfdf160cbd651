"""Benchmark statistics: aggregates, paired t-test, chi-square independence
test, and the self-contained special-function kernels behind their p-values.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

_EPS = 1e-14
_MAX_ITER = 500

INTERVENTION_BINS = (0, 1, 2, 3)  # last bin is ">= 4"


def aggregate(values: Sequence[float]) -> tuple[float, float, float]:
    """(mean, median, sample std); std is 0 by convention for n = 1."""
    if not values:
        raise ValueError("empty value list")
    mean = statistics.fmean(values)
    median = statistics.median(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, median, std


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < 1e-300:
        d = 1e-300
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < 1e-300:
            d = 1e-300
        c = 1.0 + aa / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < 1e-300:
            d = 1e-300
        c = 1.0 + aa / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def students_t_sf2(t: float, df: int) -> float:
    """Two-sided p-value for a Student-t statistic."""
    if df < 1:
        raise ValueError("df must be >= 1")
    x = df / (df + t * t)
    return betainc_reg(df / 2.0, 0.5, x)


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized incomplete gamma by series (x < a + 1)."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_cf(a: float, x: float) -> float:
    """Upper regularized incomplete gamma by continued fraction (x >= a + 1)."""
    b = x + 1.0 - a
    c = 1e300
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < 1e-300:
            d = 1e-300
        c = b + an / c
        if abs(c) < 1e-300:
            c = 1e-300
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi_square_sf(x: float, df: int) -> float:
    """Survival function of the chi-square distribution."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x < 0:
        raise ValueError("x must be >= 0")
    if x == 0.0:
        return 1.0
    a = df / 2.0
    half = x / 2.0
    if half < a + 1.0:
        return max(0.0, min(1.0, 1.0 - _gamma_p_series(a, half)))
    return max(0.0, min(1.0, _gamma_q_cf(a, half)))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    degenerate: bool = False


def paired_t_test(xs: Sequence[float], ys: Sequence[float]) -> TTestResult:
    """Two-tailed paired t-test on x_i - y_i."""
    if len(xs) != len(ys):
        raise ValueError("paired samples must have equal length")
    n = len(xs)
    if n < 2:
        raise ValueError("need at least 2 pairs")
    diffs = [x - y for x, y in zip(xs, ys)]
    sd = statistics.stdev(diffs)
    if sd == 0.0:
        return TTestResult(0.0, 1.0, degenerate=True)
    t = statistics.fmean(diffs) / (sd / math.sqrt(n))
    return TTestResult(t, students_t_sf2(t, n - 1), degenerate=False)


@dataclass(frozen=True)
class ChiSquareResult:
    chi2: float
    p: float
    df: int
    degenerate: bool = False


def bin_intervention_counts(counts: Sequence[int]) -> list[int]:
    """Histogram over {0, 1, 2, 3, >=4}."""
    bins = [0] * (len(INTERVENTION_BINS) + 1)
    for c in counts:
        bins[min(c, len(INTERVENTION_BINS))] += 1
    return bins


def chi_square_test(
    counts_a: Sequence[int], counts_b: Sequence[int]
) -> ChiSquareResult:
    """Pearson independence test on binned intervention counts.

    Rows are the two solvers, columns the {0,1,2,3,>=4} bins; zero-total
    columns are dropped.  Degenerate (chi2=0, p=1) when fewer than two
    usable bins remain.
    """
    if not counts_a or not counts_b:
        raise ValueError("both count lists must be nonempty")
    row_a = bin_intervention_counts(counts_a)
    row_b = bin_intervention_counts(counts_b)
    cols = [
        (a, b) for a, b in zip(row_a, row_b) if a + b > 0
    ]
    if len(cols) < 2:
        return ChiSquareResult(0.0, 1.0, 0, degenerate=True)
    total_a = sum(a for a, _ in cols)
    total_b = sum(b for _, b in cols)
    grand = total_a + total_b
    chi2 = 0.0
    for a, b in cols:
        col_total = a + b
        exp_a = total_a * col_total / grand
        exp_b = total_b * col_total / grand
        chi2 += (a - exp_a) ** 2 / exp_a + (b - exp_b) ** 2 / exp_b
    df = len(cols) - 1
    return ChiSquareResult(chi2, chi_square_sf(chi2, df), df, degenerate=False)
