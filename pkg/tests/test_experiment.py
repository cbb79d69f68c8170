import math

import numpy as np
import pytest

from clockbench.benchmark import SchemeSpec
from clockbench.clocksync import SyncConfig
from clockbench.experiment import (
    ExperimentPlan,
    analyze_results,
    compare_libraries,
    derive_seed,
    reproducibility_trials,
    run_benchmark,
)
from clockbench.simcore import (
    ClockSpec,
    ClusterSpec,
    CollectiveSpec,
    DistSpec,
    NetworkSpec,
)
from clockbench.stats import mean_ci


def make_cluster(p=8, alpha=3e-6, noise_sigma=1.5e-7, perturb_scale=0.03, jitter_mean=1e-7):
    noise = DistSpec("normal", mu=0.0, sigma=noise_sigma) if noise_sigma else DistSpec("none")
    jitter = DistSpec("exponential", mean=jitter_mean) if jitter_mean else DistSpec("none")
    return ClusterSpec(
        p=p,
        clock=ClockSpec(skew_max=0.7e-5, read_noise_sigma=1e-8 if noise_sigma else 0.0),
        network=NetworkSpec(base_latency=2e-6, jitter=jitter, perturb_scale=perturb_scale),
        collectives={"bcast": CollectiveSpec(alpha=alpha, beta=5e-10, duration_noise=noise)},
    )


def make_plan(n=3, nrep=10, msizes=(64, 256, 4096), seed=42, scheme=None, **kw):
    scheme = scheme or SchemeSpec("MS1", "own-barrier", nrep=nrep)
    return ExperimentPlan(
        n_mpiruns=n, msizes=tuple(msizes), funcs=("bcast",), nrep=nrep,
        scheme=scheme, master_seed=seed, **kw,
    )


def test_observation_counting():
    res = run_benchmark(make_cluster(), make_plan(n=2, nrep=10, msizes=(1, 2, 3)))
    assert len(res.rows) == 2 * 3 * 10
    for msize in (1, 2, 3):
        assert sum(1 for r in res.rows if r.msize == msize) == 20


def test_shuffle_orders_differ_across_seeds():
    orders = set()
    for seed in range(10):
        res = run_benchmark(make_cluster(), make_plan(n=1, nrep=1, msizes=tuple(range(1, 9)), seed=seed))
        orders.add(tuple((r.func, r.msize) for r in res.rows))
    assert len(orders) > 1


def test_shuffle_preserves_multiset():
    plan = make_plan(n=2, nrep=5, msizes=(1, 2, 3, 4))
    res = run_benchmark(make_cluster(), plan)
    for run in range(2):
        got = sorted((r.func, r.msize, r.obs) for r in res.rows if r.mpirun_id == run)
        want = sorted(("bcast", m, o) for m in (1, 2, 3, 4) for o in range(5))
        assert got == want


def test_seed_derivation_distinct_and_stable():
    seen = {derive_seed(42, i, j) for i in range(50) for j in range(5)}
    assert len(seen) == 250
    assert derive_seed(42, 3, 1) == derive_seed(42, 3, 1)


def test_plan_validation():
    with pytest.raises(ValueError):
        make_plan(n=0)
    with pytest.raises(ValueError):
        ExperimentPlan(1, (64,), ("bcast",), 10, SchemeSpec("MS1", "own-barrier", nrep=20))


def test_analyze_outlier_exclusion():
    plan = make_plan(n=1, nrep=30, msizes=(64,))
    res = run_benchmark(make_cluster(), plan)
    rows = list(res.rows)
    spoiled = rows[0]
    rows[0] = type(spoiled)(
        spoiled.mpirun_id, spoiled.func, spoiled.msize, spoiled.p, spoiled.obs,
        spoiled.runtime_s * 100, True, spoiled.ground_truth_s, spoiled.scheme, spoiled.sync_method,
    )
    summary = analyze_results(rows, 1)
    row = summary[(64, 8, "bcast", 0)]
    # the injected 100x value is outside the fences and excluded
    vals = np.array([r.runtime_s for r in rows])
    q1, q3 = np.percentile(vals, [25, 75], method="linear")
    expected_kept = int(np.sum((vals >= q1 - 1.5 * (q3 - q1)) & (vals <= q3 + 1.5 * (q3 - q1))))
    assert row.n_kept == expected_kept
    assert row.n_kept <= row.n_raw - 1
    assert row.mean < spoiled.runtime_s * 50


def test_analyze_constant_data():
    plan = make_plan(n=1, nrep=10, msizes=(64,))
    res = run_benchmark(make_cluster(noise_sigma=0.0, jitter_mean=0.0, perturb_scale=0.0), plan)
    summary = analyze_results(res.rows, 1)
    row = summary[(64, 8, "bcast", 0)]
    assert row.mean == pytest.approx(row.median, rel=1e-12)


def test_analyze_row_count():
    plan = make_plan(n=3, nrep=5, msizes=(1, 2))
    res = run_benchmark(make_cluster(), plan)
    summary = analyze_results(res.rows, 3)
    assert len(summary) == 2 * 1 * 3  # |msizes| * |funcs| * n_mpiruns


def test_analyze_empty_group():
    summary = analyze_results([], 1)
    assert summary == {}


def test_mpirun_factor_pairwise_differences():
    # with perturbation on, per-mpirun means separate beyond within-run CIs
    plan = make_plan(n=12, nrep=300, msizes=(64,))
    res = run_benchmark(make_cluster(alpha=1e-5, noise_sigma=2e-7, perturb_scale=0.04), plan)
    means, cis = [], []
    for run in range(12):
        vals = np.array([r.runtime_s for r in res.rows if r.mpirun_id == run])
        m, lo, hi = mean_ci(vals)
        means.append(m)
        cis.append((lo, hi))
    differing = total = 0
    for i in range(12):
        for j in range(i + 1, 12):
            total += 1
            differing += cis[i][1] < cis[j][0] or cis[j][1] < cis[i][0]
    assert differing / total >= 0.8


def test_mpirun_factor_off_means_identical():
    plan = make_plan(n=4, nrep=20, msizes=(64,), perturb=False)
    res = run_benchmark(make_cluster(noise_sigma=0.0, jitter_mean=0.0, perturb_scale=0.0), plan)
    means = {
        run: np.mean([r.runtime_s for r in res.rows if r.mpirun_id == run]) for run in range(4)
    }
    vals = list(means.values())
    assert all(v == vals[0] for v in vals)


def test_compare_null_has_no_stars():
    plan = make_plan(n=6, nrep=20, msizes=(64, 256))
    res = run_benchmark(make_cluster(), plan)
    table = compare_libraries(res, res, "two-sided")
    assert [r.stars for r in table.rows] == ["", ""]
    assert all(r.p_value > 0.99 for r in table.rows)


def test_compare_detects_10pct_inflation():
    cluster_a = make_cluster(alpha=3e-6)
    cluster_b = make_cluster(alpha=3.3e-6)
    plan_a = make_plan(n=15, nrep=50, msizes=(64, 1024), seed=1)
    plan_b = make_plan(n=15, nrep=50, msizes=(64, 1024), seed=2)
    res_a = run_benchmark(cluster_a, plan_a)
    res_b = run_benchmark(cluster_b.realize(2), plan_b)
    table = compare_libraries(res_a, res_b, "less")
    assert all(r.stars for r in table.rows)


def test_compare_small_inflation_may_be_insignificant():
    cluster_a = make_cluster(alpha=3e-6)
    cluster_b = make_cluster(alpha=3e-6 * 1.005)
    plan_a = make_plan(n=8, nrep=30, msizes=(64,), seed=5)
    plan_b = make_plan(n=8, nrep=30, msizes=(64,), seed=6)
    table = compare_libraries(run_benchmark(cluster_a, plan_a), run_benchmark(cluster_b, plan_b), "less")
    assert table.rows[0].p_value > 0.001  # far from a *** verdict


def test_compare_mismatched_plans_rejected():
    res_a = run_benchmark(make_cluster(), make_plan(n=2, nrep=5, msizes=(64,)))
    res_b = run_benchmark(make_cluster(), make_plan(n=2, nrep=5, msizes=(128,)))
    with pytest.raises(ValueError):
        compare_libraries(res_a, res_b)


def test_null_comparison_false_positive_band():
    # 40 independent null comparisons at alpha = 0.05
    fp = 0
    for k in range(40):
        plan_a = make_plan(n=10, nrep=20, msizes=(64,), seed=1000 + 2 * k)
        plan_b = make_plan(n=10, nrep=20, msizes=(64,), seed=1001 + 2 * k)
        table = compare_libraries(
            run_benchmark(make_cluster(), plan_a), run_benchmark(make_cluster(), plan_b), "two-sided"
        )
        fp += bool(table.rows[0].stars)
    assert fp <= 6  # binomial band around 5% of 40


def test_reproducibility_noise_free_spreads_zero():
    cluster = make_cluster(noise_sigma=0.0, jitter_mean=0.0, perturb_scale=0.0)
    plan = make_plan(n=2, nrep=10, msizes=(64, 4096), perturb=False)
    rows = reproducibility_trials(cluster, plan, ntrial=3)
    # trials execute at different absolute simulated times, so equality holds
    # to the last floating-point ulp of the clock arithmetic
    for r in rows:
        assert r.spread <= 1e-12
        assert all(abs(v - 1.0) <= 1e-12 for v in r.normalized)


def test_reproducibility_ours_beats_single_run_baseline():
    cluster = make_cluster()
    plan = make_plan(n=6, nrep=40, msizes=(64, 65536))
    rows = reproducibility_trials(cluster, plan, ntrial=6)
    by = {(r.method, r.msize): r for r in rows}
    assert by[("ours", 64)].spread < by[("baseline", 64)].spread


def test_run_benchmark_jobs_deterministic():
    plan = make_plan(n=3, nrep=10, msizes=(64,))
    seq = run_benchmark(make_cluster(), plan, jobs=1)
    par = run_benchmark(make_cluster(), plan, jobs=2)
    assert [(r.mpirun_id, r.obs, r.runtime_s) for r in seq.rows] == [
        (r.mpirun_id, r.obs, r.runtime_s) for r in par.rows
    ]
