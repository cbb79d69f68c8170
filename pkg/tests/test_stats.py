import itertools
import math

import numpy as np
import pytest

import clockbench.stats as stats_mod
from clockbench.stats import (
    AutocorrResult,
    TestResult,
    autocorrelation,
    ks_normality,
    mean_ci,
    stars,
    wilcoxon_rank_sum,
)


def brute_force_p(a, b, alternative):
    """Independent oracle: exhaustive enumeration over rank assignments."""
    a, b = list(a), list(b)
    n, m = len(a), len(b)
    pooled = sorted(a + b)
    ranks = {v: i + 1 for i, v in enumerate(pooled)}
    w_obs = sum(ranks[v] for v in a)
    mu = n * (n + m + 1) / 2
    count = total = 0
    for combo in itertools.combinations(range(1, n + m + 1), n):
        w = sum(combo)
        total += 1
        if alternative == "less":
            count += w <= w_obs
        elif alternative == "greater":
            count += w >= w_obs
        else:
            count += abs(w - mu) >= abs(w_obs - mu) - 1e-12
    return count / total


def test_wilcoxon_canonical_exact_case():
    res = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6], "less")
    assert res.method == "exact"
    assert res.p_value == pytest.approx(1 / 20, abs=1e-15)


def test_wilcoxon_identical_samples_two_sided():
    res = wilcoxon_rank_sum([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], "two-sided")
    assert res.p_value >= 0.99


def test_wilcoxon_matches_enumeration_oracle():
    rng = np.random.default_rng(13)
    for n in range(3, 6):
        for _ in range(8):
            vals = rng.choice(200, size=2 * n, replace=False).astype(float)
            a, b = vals[:n], vals[n:]
            for alt in ("less", "greater", "two-sided"):
                got = wilcoxon_rank_sum(a, b, alt)
                assert got.method == "exact"
                assert got.p_value == pytest.approx(brute_force_p(a, b, alt), abs=1e-12)


def test_wilcoxon_exact_vs_approx_agreement():
    # n = m in 4..7 without ties: |p_exact - p_approx| <= 0.02
    rng = np.random.default_rng(17)
    worst = 0.0
    for n in range(4, 8):
        for shift in (0, 1, 3, 10):
            vals = rng.choice(1000, size=2 * n, replace=False).astype(float)
            a, b = vals[:n], vals[n:] + shift
            if np.intersect1d(a, b).size:
                continue
            p_exact = wilcoxon_rank_sum(a, b, "less").p_value
            old = stats_mod.EXACT_LIMIT
            stats_mod.EXACT_LIMIT = 0
            try:
                p_approx = wilcoxon_rank_sum(a, b, "less").p_value
            finally:
                stats_mod.EXACT_LIMIT = old
            worst = max(worst, abs(p_exact - p_approx))
    assert worst <= 0.02


def test_wilcoxon_symmetry():
    rng = np.random.default_rng(23)
    for _ in range(20):
        a = rng.normal(0, 1, 9)
        b = rng.normal(0.3, 1, 11)
        assert (
            wilcoxon_rank_sum(a, b, "less").p_value
            == wilcoxon_rank_sum(b, a, "greater").p_value
        )


def test_wilcoxon_shift_monotonicity():
    rng = np.random.default_rng(29)
    a = rng.normal(0, 1, 10)
    b = rng.normal(0, 1, 10)
    last = None
    for shift in (0.0, 0.5, 1.0, 2.0, 4.0):
        p = wilcoxon_rank_sum(a, b + shift, "less").p_value
        if last is not None:
            assert p <= last + 1e-12
        last = p


def test_wilcoxon_empty_sample_rejected():
    with pytest.raises(ValueError):
        wilcoxon_rank_sum([], [1.0])


def test_stars_thresholds():
    assert stars(0.005) == "**"
    assert stars(0.05) == "*"       # inclusive boundary
    assert stars(0.01) == "**"
    assert stars(0.001) == "***"
    assert stars(0.2) == ""
    assert stars(0.0005) == "***"


def test_stars_monotone_nonincreasing():
    ps = np.linspace(0, 1, 101)
    lengths = [len(stars(p)) for p in ps]
    assert all(a >= b for a, b in zip(lengths, lengths[1:]))


def test_mean_ci_constant_sample():
    m, lo, hi = mean_ci([5.0, 5.0, 5.0, 5.0])
    assert (m, lo, hi) == (5.0, 5.0, 5.0)


def test_mean_ci_textbook_value():
    m, lo, hi = mean_ci([1.0, 2.0, 3.0])
    assert m == 2.0
    assert hi - m == pytest.approx(4.302652729911275 * (1.0 / math.sqrt(3)), rel=1e-9)
    assert hi - m == pytest.approx(2.484, abs=5e-4)


def test_mean_ci_coverage():
    rng = np.random.default_rng(31)
    hits = 0
    for _ in range(1000):
        sample = rng.normal(0, 1, 30)
        _, lo, hi = mean_ci(sample)
        hits += lo <= 0.0 <= hi
    assert 0.93 <= hits / 1000 <= 0.97


def test_mean_ci_needs_two():
    with pytest.raises(ValueError):
        mean_ci([1.0])


def test_autocorrelation_alternating():
    n = 100
    x = np.tile([1.0, -1.0], n // 2)
    res = autocorrelation(x, 1)
    assert res.coefficients[0] == pytest.approx(-(n - 1) / n)
    assert res.bound == pytest.approx(0.196)


def test_autocorrelation_iid_exceedances():
    rng = np.random.default_rng(37)
    exceed = total = 0
    for _ in range(50):
        res = autocorrelation(rng.normal(0, 1, 400), 20)
        exceed += len(res.significant_lags())
        total += 20
    assert exceed / total <= 0.10


def test_autocorrelation_validation():
    with pytest.raises(ValueError):
        autocorrelation(np.ones(10), 2)
    with pytest.raises(ValueError):
        autocorrelation(np.arange(5.0), 5)


def test_ks_normal_data_rarely_rejected():
    # estimated parameters make the asymptotic KS conservative, so the
    # rejection rate sits well below nominal
    rng = np.random.default_rng(41)
    rejections = sum(ks_normality(rng.normal(3, 2, 10_000)).p_value <= 0.05 for _ in range(100))
    assert rejections <= 10


def test_ks_uniform_rejected():
    # the asymptotic-KS p with estimated parameters is conservative; its
    # empirical power on uniform data at n=500 is ~93%
    rng = np.random.default_rng(43)
    rejections = sum(ks_normality(rng.uniform(0, 1, 500)).p_value <= 0.05 for _ in range(40))
    assert rejections >= 34
    rejections_800 = sum(ks_normality(rng.uniform(0, 1, 800)).p_value <= 0.05 for _ in range(40))
    assert rejections_800 >= 38


def test_ks_bimodal_rejected():
    rng = np.random.default_rng(47)
    comp = rng.random(1000) < 0.9
    x = np.where(comp, rng.normal(0, 1e-6, 1000), rng.normal(5e-5, 1e-6, 1000))
    res = ks_normality(x)
    assert res.p_value <= 0.05
    assert res.parameters_estimated


def test_ks_needs_eight():
    with pytest.raises(ValueError):
        ks_normality(np.arange(7.0))


def test_result_validation():
    with pytest.raises(ValueError):
        TestResult(0.0, 1.5, "less", "exact")
    with pytest.raises(ValueError):
        AutocorrResult((1.5,), 0.1)
