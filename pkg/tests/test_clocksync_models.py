import numpy as np
import pytest

from clockbench.clocksync import (
    DegenerateFitError,
    FitPoint,
    IDENTITY_MODEL,
    LinearModel,
    ModelInterval,
    denormalize_time,
    fit_xy,
    linear_fit,
    merge_lms,
    merge_model_intervals,
    normalize_time,
)


def test_fit_exact_line():
    x = np.linspace(0, 10, 50)
    y = 2e-6 * x + 1e-3
    model, interval = fit_xy(x, y)
    assert model.slope == pytest.approx(2e-6, abs=1e-15)
    assert model.intercept == pytest.approx(1e-3, abs=1e-12)
    assert interval.slope_hi - interval.slope_lo == pytest.approx(0.0, abs=1e-12)
    assert interval.intercept_hi - interval.intercept_lo == pytest.approx(0.0, abs=1e-10)


def test_fit_two_points_flat():
    model, _ = linear_fit([FitPoint(0, 1), FitPoint(1, 1)])
    assert model.slope == 0.0
    assert model.intercept == 1.0


def test_fit_degenerate_x():
    with pytest.raises(DegenerateFitError):
        linear_fit([FitPoint(1, 0), FitPoint(1, 1), FitPoint(1, 2)])


def test_fit_interval_coverage():
    # frozen-seed Monte Carlo: the 95% slope band covers the true slope in
    # at least 95% of 200 noisy regressions
    rng = np.random.default_rng(2024)
    slope, intercept = 3e-6, 5e-4
    hits = 0
    for _ in range(200):
        x = np.linspace(0, 1, 1000)
        y = slope * x + intercept + rng.normal(0, 1e-7, x.size)
        _, interval = fit_xy(x, y)
        hits += interval.slope_lo <= slope <= interval.slope_hi
    assert hits >= 190


def test_merge_identity_element():
    m = LinearModel(3e-5, 1e-4)
    for merged in (merge_lms(IDENTITY_MODEL, m), merge_lms(m, IDENTITY_MODEL)):
        assert merged.slope == pytest.approx(m.slope, abs=1e-18)
        assert merged.intercept == pytest.approx(m.intercept, abs=1e-18)


def test_merge_direct_substitution():
    merged = merge_lms(LinearModel(0.5, 1.0), LinearModel(0.5, 2.0))
    assert merged.slope == pytest.approx(0.75)
    assert merged.intercept == pytest.approx(2.0)


def _chain_models(offsets, skews):
    """Exact pairwise models m_{i+1 -> i} and direct models m_{i -> 0} for a
    chain of affine clocks C_i(t) = o_i + (1 + s_i) t."""

    def model(i, j):  # model of clock i relative to clock j, in i's local time
        si, sj = skews[i], skews[j]
        oi, oj = offsets[i], offsets[j]
        slope = (si - sj) / (1 + si)
        intercept = (oi - oj) - slope * oi
        return LinearModel(slope, intercept)

    return model


def test_merge_reproduces_direct_model():
    offsets = [0.0, 1e-3, -2e-3, 3e-3]
    skews = [0.0, 2e-5, -1e-5, 3e-5]
    model = _chain_models(offsets, skews)
    chained = merge_lms(model(1, 0), model(2, 1))
    direct = model(2, 0)
    assert chained.slope == pytest.approx(direct.slope, rel=1e-12)
    assert chained.intercept == pytest.approx(direct.intercept, rel=1e-9, abs=1e-15)
    chained3 = merge_lms(chained, model(3, 2))
    direct3 = model(3, 0)
    assert chained3.slope == pytest.approx(direct3.slope, rel=1e-12)
    assert chained3.intercept == pytest.approx(direct3.intercept, rel=1e-9, abs=1e-15)


def test_merge_associativity_on_chain():
    rng = np.random.default_rng(5)
    offsets = [0.0] + list(rng.uniform(-1e-3, 1e-3, 7))
    skews = [0.0] + list(rng.uniform(-3e-5, 3e-5, 7))
    model = _chain_models(offsets, skews)
    links = [model(i + 1, i) for i in range(7)]
    left = links[0]
    for m in links[1:]:
        left = merge_lms(left, m)
    right = links[-1]
    for m in reversed(links[:-1]):
        right = merge_lms(m, right)
    assert left.slope == pytest.approx(right.slope, rel=1e-9)
    assert left.intercept == pytest.approx(right.intercept, rel=1e-9, abs=1e-16)


def test_interval_degenerate_reduces_to_merge():
    a = LinearModel(1e-5, 2e-4)
    b = LinearModel(-2e-5, 5e-4)
    ia = ModelInterval(a.slope, a.slope, a.intercept, a.intercept)
    ib = ModelInterval(b.slope, b.slope, b.intercept, b.intercept)
    merged = merge_model_intervals(ia, ib)
    point = merge_lms(a, b)
    assert merged.slope_lo == pytest.approx(point.slope, abs=1e-18)
    assert merged.slope_hi == pytest.approx(point.slope, abs=1e-18)
    assert merged.intercept_lo == pytest.approx(point.intercept, abs=1e-18)
    assert merged.intercept_hi == pytest.approx(point.intercept, abs=1e-18)


def test_interval_zero_slope_intercepts_add():
    a = ModelInterval(0.0, 0.0, 1.0, 2.0)
    b = ModelInterval(0.0, 0.0, 3.0, 4.0)
    merged = merge_model_intervals(a, b)
    assert (merged.intercept_lo, merged.intercept_hi) == (4.0, 6.0)


def test_interval_contains_all_corner_merges():
    rng = np.random.default_rng(11)
    for _ in range(300):
        s = np.sort(rng.uniform(-1e-4, 1e-4, 4))
        i = np.sort(rng.uniform(-1e-2, 1e-2, 4))
        a = ModelInterval(s[0], s[1], i[0], i[1])
        b = ModelInterval(s[2], s[3], i[2], i[3])
        merged = merge_model_intervals(a, b)
        for ca in a.corners():
            for cb in b.corners():
                assert merged.contains(merge_lms(ca, cb), tol=1e-18)


def test_normalize_identity_and_substitution():
    assert normalize_time(IDENTITY_MODEL, 10.0) == 10.0
    assert normalize_time(LinearModel(1e-6, 0.5), 100.0) == pytest.approx(99.4999)


def test_normalize_round_trip_against_reference_clock():
    # learn from noiseless fitpoints of a skewed clock, then normalized
    # readings track the reference to <= 1e-9 * t
    skew = 2e-5
    offset = 1e-3

    def local(t):
        return offset + (1 + skew) * t

    ts = np.linspace(0, 50, 200)
    x = local(ts)
    y = x - ts  # offset versus the reference clock, as a function of local time
    model, _ = fit_xy(x, y)
    for t in (0.1, 1.0, 10.0, 100.0):
        err = abs(normalize_time(model, local(t)) - t)
        assert err <= 1e-9 * max(t, 1.0)


def test_denormalize_inverts():
    m = LinearModel(3e-5, -2e-4)
    for g in (0.0, 0.5, 7.0):
        assert normalize_time(m, denormalize_time(m, g)) == pytest.approx(g, abs=1e-12)


def test_model_validation():
    with pytest.raises(ValueError):
        LinearModel(1.5, 0.0)
    with pytest.raises(ValueError):
        LinearModel(float("nan"), 0.0)
    with pytest.raises(ValueError):
        ModelInterval(1.0, 0.0, 0.0, 0.0)
