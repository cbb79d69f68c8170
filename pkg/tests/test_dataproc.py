import numpy as np
import pytest

from clockbench.dataproc import (
    Sample,
    SchemeShapeError,
    SummaryRow,
    apply_processing_scheme,
    bin_series,
    normalize_to_min,
    ps1,
    ps4,
    ps5,
    ps8,
    quartiles,
    relative_spread,
    summarize,
    tukey_bounds,
    tukey_filter,
    tukey_filter_values,
)


# -- tukey -------------------------------------------------------------------------


def test_tukey_all_equal_unchanged():
    s = Sample((2.0,) * 10)
    assert tukey_filter(s).values == s.values


def test_tukey_textbook_example():
    # type-7 quartiles of {1,2,3,4,100}: Q1=2, Q3=4, fences [-1, 7]
    assert quartiles(np.array([1, 2, 3, 4, 100.0])) == (2.0, 4.0)
    assert tukey_bounds(np.array([1, 2, 3, 4, 100.0])) == (-1.0, 7.0)
    out = tukey_filter(Sample((1.0, 2.0, 3.0, 4.0, 100.0)))
    assert out.values == (1.0, 2.0, 3.0, 4.0)


def test_tukey_small_sample_passthrough_flag():
    out = tukey_filter(Sample((1.0, 2.0, 3.0)))
    assert out.values == (1.0, 2.0, 3.0)
    assert "tukey_passthrough" in out.flags


def test_tukey_factor_is_1p5():
    vals = np.array([10.0, 12.0, 14.0, 16.0])
    q1, q3 = quartiles(vals)
    lo, hi = tukey_bounds(vals)
    assert lo == pytest.approx(q1 - 1.5 * (q3 - q1))
    assert hi == pytest.approx(q3 + 1.5 * (q3 - q1))


def test_tukey_brute_force_equivalence():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(4, 200))
        vals = rng.lognormal(0, 1, n)
        kept, _ = tukey_filter_values(vals)
        q1, q3 = np.percentile(vals, [25, 75], method="linear")
        lo, hi = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
        oracle = vals[(vals >= lo) & (vals <= hi)]
        assert np.array_equal(kept, oracle)
        # kept is an order-preserving subset and every removed value violates bounds
        removed = vals[(vals < lo) | (vals > hi)]
        assert kept.size + removed.size == n


# -- summaries ----------------------------------------------------------------------


def test_summary_row_ordering_invariant():
    rng = np.random.default_rng(9)
    for _ in range(100):
        row = summarize(rng.lognormal(0, 0.5, int(rng.integers(2, 50))))
        assert row.min <= row.q1 <= row.median <= row.q3 <= row.max


def test_summary_row_rejects_bad_order():
    with pytest.raises(ValueError):
        SummaryRow(mean=1, median=0.5, min=1.0, max=2.0, q1=0.2, q3=1.5, std_err=0, n_raw=4, n_kept=4)


# -- processing schemes ----------------------------------------------------------------


def test_ps1_constant_sample():
    data = np.full((4, 20), 7e-6)
    out = ps1(data)
    assert out["mean"] == pytest.approx(7e-6)
    assert out["stdev"] == pytest.approx(0.0, abs=1e-18)
    assert out["n_kept"] == 10  # middle half of 20


def test_ps1_slice_endpoints_floor():
    data = np.arange(10, dtype=float).reshape(1, 10)
    out = ps1(data)
    # nrep=10: keep sorted[2:8]
    assert out["n_kept"] == 6
    assert out["mean"] == pytest.approx(np.mean(np.arange(2, 8)))


def test_ps2_fields():
    data = np.vstack([np.linspace(1, 2, 50), np.linspace(1.5, 2.5, 50)])
    out = apply_processing_scheme("ps2", data)
    assert out["min"] <= out["mean"] <= out["max"]
    assert out["ci_lo"] <= out["mean"] <= out["ci_hi"]


def test_ps3_and_ps7_rank_reductions():
    t = np.array([1.0, 2.0, 3.0])
    for scheme in ("PS3", "PS7"):
        out = apply_processing_scheme(scheme, t)
        assert (out["min"], out["max"], out["mean"]) == (1.0, 3.0, 2.0)


def test_ps4_matches_global_completion_when_starts_coincide():
    rng = np.random.default_rng(3)
    ends = 1.0 + rng.uniform(0, 1e-4, (4, 30))
    starts = np.full(30, 0.5)
    out = ps4(ends, starts)
    want = ends.max(axis=0) - 0.5
    assert np.allclose(out["times"], want)


def test_ps5_default_threshold_factor():
    rng = np.random.default_rng(4)
    starts = np.zeros((2, 500))
    ends = rng.uniform(1.0, 1.1, (2, 500))
    ends[0, 0] = 50.0  # gross outlier
    out = ps5(starts, ends)  # default a = 2
    assert out["n_kept"] < out["n_raw"]
    assert out["max"] < 3.0


def test_ps6_ops():
    data = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert apply_processing_scheme("PS6", data, op="min")["t_max"] == 4.0
    assert apply_processing_scheme("PS6", data, op="median")["t_max"] == 5.0
    with pytest.raises(ValueError):
        ps6_bad = apply_processing_scheme("PS6", data, op="sum")


def test_ps8_min_of_means():
    assert ps8([5.0, 4.0, 6.0])["t"] == 4.0


def test_scheme_shape_errors():
    with pytest.raises(SchemeShapeError):
        ps1(np.zeros(5))
    with pytest.raises(SchemeShapeError):
        apply_processing_scheme("PS3", np.zeros((2, 2)))
    with pytest.raises(ValueError):
        apply_processing_scheme("PS99", np.zeros(3))


# -- binning / normalization ------------------------------------------------------------


def test_bin_series_counts_and_tail_drop():
    out = bin_series(np.arange(430.0), 100)
    assert len(out) == 4
    assert all(b["n"] == 100 for b in out)


def test_bin_series_constant_zero_ci():
    out = bin_series(np.full(200, 3.0), 100)
    for b in out:
        assert b["stat"] == 3.0
        assert b["ci_hi"] - b["ci_lo"] == 0.0


def test_bin_series_linear_ramp():
    r = 2.5
    out = bin_series(r * np.arange(400.0), 100, stat="mean")
    means = [b["stat"] for b in out]
    diffs = np.diff(means)
    assert np.allclose(diffs, r * 100)


def test_bin_series_validation():
    with pytest.raises(ValueError):
        bin_series([1.0, 2.0], 1)
    with pytest.raises(ValueError):
        bin_series([1.0, 2.0], 2, stat="mode")


def test_normalize_to_min():
    assert np.allclose(normalize_to_min([2.0, 4.0]), [1.0, 2.0])
    assert np.allclose(normalize_to_min([3.3]), [1.0])
    with pytest.raises(ValueError):
        normalize_to_min([1.0, -2.0])


def test_relative_spread_table_reconstruction():
    # min 2.83, max 3.20 -> (max - min) / max = 11.56%
    assert relative_spread([2.83, 3.20]) == pytest.approx(0.1156, abs=2e-4)


def test_sample_validation():
    with pytest.raises(ValueError):
        Sample((1.0, -2.0))
    with pytest.raises(ValueError):
        Sample((float("inf"),))
