"""Experimental design and analysis: multi-mpirun randomized benchmark runs,
per-group reduction, library comparison with Wilcoxon verdicts, and
reproducibility trials.

Each mpirun becomes a freshly seeded SimInstance; seeds are derived from the
master seed with a splitmix64-style mix over (mpirun index, trial index), so
runs and trials are independent without any seed bookkeeping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .benchmark import EmptySampleError, SchemeSpec, SchemeResult, WindowSync, run_scheme
from .clocksync import SyncConfig, run_sync
from .dataproc import SummaryRow, summarize, tukey_filter_values
from .simcore.instance import ClusterSpec, SimInstance
from .stats import stars, wilcoxon_rank_sum

_MASK = (1 << 64) - 1


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive_seed(master_seed: int, *indices: int) -> int:
    """Splittable 64-bit seed derivation from (master, idx...)."""
    z = master_seed & _MASK
    for i in indices:
        z = _mix64(z ^ ((int(i) + 1) * 0x9E3779B97F4A7C15 & _MASK))
    return z


@dataclass(frozen=True)
class ExperimentPlan:
    n_mpiruns: int
    msizes: tuple[int, ...]
    funcs: tuple[str, ...]
    nrep: int
    scheme: SchemeSpec
    master_seed: int = 1
    perturb: bool = True
    sync: SyncConfig = SyncConfig()
    pilot_reps: int = 5  # executions behind the 5x-median auto window rule

    def __post_init__(self):
        if self.n_mpiruns < 1:
            raise ValueError("n_mpiruns must be >= 1")
        if not self.msizes or not self.funcs:
            raise ValueError("plan needs at least one message size and function")
        if self.nrep != self.scheme.nrep:
            raise ValueError("plan nrep must match scheme nrep")


@dataclass(frozen=True)
class RawObs:
    mpirun_id: int
    func: str
    msize: int
    p: int
    obs: int
    runtime_s: float
    valid: bool
    ground_truth_s: float
    scheme: str
    sync_method: str


@dataclass
class BenchmarkResult:
    plan: ExperimentPlan
    p: int
    rows: list[RawObs] = field(default_factory=list)
    resolved_windows: dict = field(default_factory=dict)  # (func, msize) -> seconds
    failures: list[str] = field(default_factory=list)


def _sync_label(spec: SchemeSpec) -> str:
    return spec.window_method if spec.sync == "window" else spec.sync


def _auto_window(inst: SimInstance, func: str, msize: int, reps: int) -> float:
    """Auto window rule: 5x the median of a short pilot of aligned runs."""
    durations = []
    for _ in range(reps):
        inst.align()
        rec = inst.collective_execute(func, msize, label="pilot")
        durations.append(rec.duration)
    return 5.0 * float(np.median(durations))


def _execute_one_run(
    cluster: ClusterSpec, plan: ExperimentPlan, run_idx: int, trial_idx: int = 0
) -> tuple[list[RawObs], dict, list[str]]:
    seed = derive_seed(plan.master_seed, run_idx, trial_idx)
    inst = SimInstance(cluster, seed, perturb=plan.perturb)
    spec = plan.scheme
    rows: list[RawObs] = []
    failures: list[str] = []
    windows: dict = {}

    outcome = None
    if spec.sync == "window":
        outcome = run_sync(inst, spec.window_method, cfg=plan.sync)

    experiments = [(msize, func) for msize in plan.msizes for func in plan.funcs]
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((seed, 4)))
    shuffle_rng.shuffle(experiments)

    for msize, func in experiments:
        try:
            window = None
            if outcome is not None:
                if spec.win_size in (None, "auto"):
                    win = _auto_window(inst, func, msize, plan.pilot_reps)
                else:
                    win = float(spec.win_size)
                windows[(func, msize)] = win
                window = WindowSync(outcome, win)
                window.initialize(inst)
            res = run_scheme(inst, spec, func, msize, window=window)
            label = _sync_label(spec)
            for i, (t, ok, gt) in enumerate(_iter_obs(res)):
                rows.append(
                    RawObs(run_idx, func, msize, inst.p, i, t, ok, gt, spec.scheme, label)
                )
        except EmptySampleError as err:
            failures.append(f"run {run_idx} {func} msize={msize}: {err}")
    return rows, windows, failures


def _iter_obs(res: SchemeResult):
    gts = res.ground_truths
    # MS2/MS3 produce one value per rank; their rows carry the mean ground truth
    per_obs = gts.size == len(res.times)
    mean_gt = float(np.mean(gts)) if gts.size else float("nan")
    for i, (t, ok) in enumerate(zip(res.times, res.valid)):
        yield float(t), bool(ok), (float(gts[i]) if per_obs else mean_gt)


def pmap(fn, tasks: list, jobs: int = 1) -> list:
    """Order-preserving map, optionally over a process pool. Results are
    aggregated by task index, so the output is identical for any job count."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _run_task(args) -> tuple[list[RawObs], dict, list[str]]:
    return _execute_one_run(*args)


def run_benchmark(
    cluster: ClusterSpec, plan: ExperimentPlan, trial_idx: int = 0, jobs: int = 1
) -> BenchmarkResult:
    """Execute the full experiment: n_mpiruns freshly seeded instances, the
    (msize x func) list shuffled per instance, every observation tagged with
    its mpirun id. Per-run measurement failures are recorded, not fatal."""
    cluster = cluster.realize(plan.master_seed)
    result = BenchmarkResult(plan=plan, p=cluster.p)
    tasks = [(cluster, plan, run_idx, trial_idx) for run_idx in range(plan.n_mpiruns)]
    for rows, windows, failures in pmap(_run_task, tasks, jobs):
        result.rows.extend(rows)
        result.resolved_windows.update(windows)
        result.failures.extend(failures)
    return result


# -- analysis --------------------------------------------------------------------------


def analyze_results(rows: list[RawObs], n_mpiruns: int) -> dict[tuple, SummaryRow]:
    """Group by (msize, p, func, mpirun), Tukey-filter each group's valid
    run-times, and summarize. Empty groups yield rows with n_kept = 0."""
    groups: dict[tuple, list[RawObs]] = {}
    for r in rows:
        groups.setdefault((r.msize, r.p, r.func, r.mpirun_id), []).append(r)
    out: dict[tuple, SummaryRow] = {}
    for key, obs in sorted(groups.items()):
        vals = np.array([o.runtime_s for o in obs if o.valid])
        kept, _ = tukey_filter_values(vals) if vals.size else (vals, False)
        out[key] = summarize(kept, n_raw=len(obs))
    return out


@dataclass(frozen=True)
class ComparisonRow:
    func: str
    msize: int
    medians_a: tuple[float, ...]
    medians_b: tuple[float, ...]
    p_value: float
    stars: str
    alternative: str


@dataclass
class ComparisonTable:
    alternative: str
    rows: list[ComparisonRow] = field(default_factory=list)

    def starred(self) -> list[ComparisonRow]:
        return [r for r in self.rows if r.stars]


def _medians_by_key(summary: dict[tuple, SummaryRow]) -> dict[tuple, list[float]]:
    med: dict[tuple, list[float]] = {}
    for (msize, _p, func, _run), row in sorted(summary.items()):
        if row.n_kept > 0 and math.isfinite(row.median):
            med.setdefault((func, msize), []).append(row.median)
    return med


def compare_libraries(
    res_a: BenchmarkResult, res_b: BenchmarkResult, alternative: str = "two-sided"
) -> ComparisonTable:
    """Per (func, msize): Wilcoxon test on the two distributions of per-mpirun
    medians, annotated with significance stars at the 0.05 level."""
    pa, pb = res_a.plan, res_b.plan
    if (pa.msizes, pa.funcs, pa.n_mpiruns, pa.nrep) != (pb.msizes, pb.funcs, pb.n_mpiruns, pb.nrep):
        raise ValueError("result sets were produced by different plans; comparison undefined")
    med_a = _medians_by_key(analyze_results(res_a.rows, pa.n_mpiruns))
    med_b = _medians_by_key(analyze_results(res_b.rows, pb.n_mpiruns))
    table = ComparisonTable(alternative)
    for func in pa.funcs:
        for msize in pa.msizes:
            key = (func, msize)
            da, db = med_a.get(key, []), med_b.get(key, [])
            if not da or not db:
                continue
            res = wilcoxon_rank_sum(da, db, alternative)
            table.rows.append(
                ComparisonRow(func, msize, tuple(da), tuple(db), res.p_value, stars(res.p_value), alternative)
            )
    return table


# -- reproducibility --------------------------------------------------------------------


@dataclass(frozen=True)
class ReproRow:
    msize: int
    method: str            # "ours" or "baseline"
    trial_values: tuple[float, ...]
    normalized: tuple[float, ...]
    spread: float          # (max - min) / max over trials


def _our_trial_value(cluster: ClusterSpec, plan: ExperimentPlan, trial: int) -> dict[int, float]:
    res = run_benchmark(cluster, plan, trial_idx=trial)
    med = _medians_by_key(analyze_results(res.rows, plan.n_mpiruns))
    out = {}
    for msize in plan.msizes:
        vals = med.get((plan.funcs[0], msize), [])
        if vals:
            out[msize] = float(np.mean(vals))
    return out


def _baseline_trial_value(cluster: ClusterSpec, plan: ExperimentPlan, trial: int) -> dict[int, float]:
    """Single-mpirun baseline: one instance, one consecutive-call timing per
    message size (MS2), the across-rank mean reported."""
    seed = derive_seed(plan.master_seed, 777, trial)
    inst = SimInstance(cluster, seed, perturb=plan.perturb)
    spec = SchemeSpec("MS2", "own-barrier", nrep=plan.nrep)
    out = {}
    for msize in plan.msizes:
        res = run_scheme(inst, spec, plan.funcs[0], msize)
        out[msize] = float(np.mean(res.times))
    return out


def _our_trial_task(args) -> dict[int, float]:
    return _our_trial_value(*args)


def _baseline_trial_task(args) -> dict[int, float]:
    return _baseline_trial_value(*args)


def reproducibility_trials(
    cluster: ClusterSpec, plan: ExperimentPlan, ntrial: int, include_baseline: bool = True, jobs: int = 1
) -> list[ReproRow]:
    """Run the full method ntrial times with distinct seed families; per
    message size collapse each trial to the mean of its per-mpirun medians,
    normalize across trials by the minimum, report the relative spread.
    Optionally do the same for a single-mpirun consecutive-call baseline."""
    if ntrial < 2:
        raise ValueError("ntrial must be >= 2")
    cluster = cluster.realize(plan.master_seed)
    ours = pmap(_our_trial_task, [(cluster, plan, t) for t in range(ntrial)], jobs)
    rows: list[ReproRow] = []
    sources = [("ours", ours)]
    if include_baseline:
        baseline = pmap(_baseline_trial_task, [(cluster, plan, t) for t in range(ntrial)], jobs)
        sources.append(("baseline", baseline))
    for method, trials in sources:
        for msize in plan.msizes:
            vals = np.array([t[msize] for t in trials if msize in t])
            if vals.size < 2:
                continue
            norm = vals / vals.min()
            spread = float((vals.max() - vals.min()) / vals.max())
            rows.append(ReproRow(msize, method, tuple(map(float, vals)), tuple(map(float, norm)), spread))
    return rows
