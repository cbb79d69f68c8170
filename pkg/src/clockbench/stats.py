"""Hypothesis testing and diagnostics: Wilcoxon rank-sum with exact
enumeration for small samples, significance stars, t-based mean confidence
intervals, autocorrelation, and a KS normality check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import special as _sp
from scipy import stats as _st

_ALTERNATIVES = ("two-sided", "less", "greater")
EXACT_LIMIT = 14  # exact enumeration when n + m <= this and there are no ties


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    alternative: str
    method: str
    parameters_estimated: bool = False

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError("p-value out of [0, 1]")


@dataclass(frozen=True)
class AutocorrResult:
    coefficients: tuple[float, ...]  # r_h for h = 1..max_lag
    bound: float                     # 1.96 / sqrt(n)

    def __post_init__(self):
        if any(abs(r) > 1.0 + 1e-12 for r in self.coefficients):
            raise ValueError("autocorrelation coefficient out of [-1, 1]")

    def significant_lags(self) -> list[int]:
        return [h + 1 for h, r in enumerate(self.coefficients) if abs(r) > self.bound]


def _rankdata(pooled: np.ndarray) -> np.ndarray:
    """Mid-ranks for ties."""
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(pooled.size)
    sorted_vals = pooled[order]
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_rank_sum(a, b, alternative: str = "two-sided") -> TestResult:
    """Wilcoxon-Mann-Whitney rank-sum test.

    Exact p-value by enumerating all rank assignments when n + m <= 14 and
    there are no ties; otherwise the normal approximation with mid-ranks,
    tie-corrected variance, and a +-0.5 continuity correction. "less" tests
    whether a's population is shifted left of b's. Identical samples (zero
    rank variance) return p = 1 by convention.
    """
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    ranks = _rankdata(pooled)
    w_a = float(ranks[:n].sum())
    u_a = w_a - n * (n + 1) / 2.0

    has_ties = np.unique(pooled).size < pooled.size
    if n + m <= EXACT_LIMIT and not has_ties:
        dist: dict[float, int] = {}
        for combo in combinations(range(n + m), n):
            w = sum(combo) + n  # positions are 0-based; ranks are 1-based
            dist[w] = dist.get(w, 0) + 1
        total = math.comb(n + m, n)
        if alternative == "less":
            count = sum(c for w, c in dist.items() if w <= w_a)
        elif alternative == "greater":
            count = sum(c for w, c in dist.items() if w >= w_a)
        else:
            mu = n * (n + m + 1) / 2.0
            count = sum(c for w, c in dist.items() if abs(w - mu) >= abs(w_a - mu) - 1e-12)
        return TestResult(u_a, count / total, alternative, "exact")

    # normal approximation with tie correction
    mu = n * m / 2.0
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts))
    nm = n + m
    var = n * m / 12.0 * ((nm + 1) - tie_term / (nm * (nm - 1)))
    if var <= 0.0:
        return TestResult(u_a, 1.0, alternative, "normal-approx")
    sd = math.sqrt(var)
    if alternative == "less":
        p = _st.norm.cdf((u_a - mu + 0.5) / sd)
    elif alternative == "greater":
        p = _st.norm.sf((u_a - mu - 0.5) / sd)
    else:
        z = (abs(u_a - mu) - 0.5) / sd
        p = 2.0 * _st.norm.sf(max(z, 0.0))
    return TestResult(u_a, min(float(p), 1.0), alternative, "normal-approx")


def stars(p_value: float) -> str:
    """Significance stars: p <= 0.05 '*', <= 0.01 '**', <= 0.001 '***'."""
    if not (0.0 <= p_value <= 1.0):
        raise ValueError("p-value out of [0, 1]")
    if p_value <= 0.001:
        return "***"
    if p_value <= 0.01:
        return "**"
    if p_value <= 0.05:
        return "*"
    return ""


def mean_ci(values, level: float = 0.95) -> tuple[float, float, float]:
    """t-distribution confidence interval for the mean: (mean, lo, hi)."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least 2 values for a mean CI")
    mean = float(arr.mean())
    half = float(_st.t.ppf(0.5 + level / 2.0, arr.size - 1) * np.std(arr, ddof=1) / math.sqrt(arr.size))
    return mean, mean - half, mean + half


def autocorrelation(values, max_lag: int) -> AutocorrResult:
    """Autocorrelation coefficients r_h = C_h / C_0 for h = 1..max_lag with
    the 1.96/sqrt(n) significance bound."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if n <= max_lag:
        raise ValueError("need more observations than lags")
    centered = arr - arr.mean()
    c0 = float(centered @ centered)
    if c0 == 0.0:
        raise ValueError("zero variance; autocorrelation undefined")
    coeffs = tuple(float(centered[: n - h] @ centered[h:]) / c0 for h in range(1, max_lag + 1))
    return AutocorrResult(coeffs, 1.96 / math.sqrt(n))


def ks_normality(values) -> TestResult:
    """One-sample Kolmogorov-Smirnov statistic against Normal(mean, sd) with
    both parameters estimated from the data; p-value from the asymptotic KS
    distribution. The estimated-parameter caveat is flagged on the result so
    consumers treat the p-value conservatively."""
    arr = np.sort(np.asarray(values, dtype=float))
    n = arr.size
    if n < 8:
        raise ValueError("need at least 8 values for the normality check")
    sd = float(np.std(arr, ddof=1))
    if sd == 0.0:
        raise ValueError("zero variance; normality check undefined")
    cdf = _st.norm.cdf((arr - arr.mean()) / sd)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))
    p = float(_sp.kolmogorov(d * math.sqrt(n)))
    return TestResult(d, min(max(p, 0.0), 1.0), "two-sided", "ks-asymptotic", parameters_estimated=True)
