"""Operator surface: config-driven experiment execution and reports.

Subcommands: sync-eval, bench, compare, repro. Each writes delimited data
files plus rendered figures into --out; tables go to stdout, diagnostics to
stderr. Exit codes: 0 success, 2 configuration error, 3 empty-sample
analysis failure. CLOCKBENCH_SEED overrides the config seed (the --seed flag
wins over both).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import figures, reports
from .benchmark import SchemeSpec, WindowSync, run_scheme
from .clocksync import SyncConfig, measure_global_offsets, run_sync
from .config import ConfigError, RunConfig, load_config
from .dataproc import bin_series
from .experiment import (
    ExperimentPlan,
    _medians_by_key,
    analyze_results,
    compare_libraries,
    derive_seed,
    pmap,
    reproducibility_trials,
    run_benchmark,
)
from .simcore.instance import SimInstance

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EMPTY = 3


def _err(msg: str) -> None:
    print(f"clockbench: {msg}", file=sys.stderr)


def _env_seed() -> int | None:
    raw = os.environ.get("CLOCKBENCH_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"CLOCKBENCH_SEED must be an integer, got {raw!r}") from None


def _load(path, seed_flag) -> RunConfig:
    override = seed_flag if seed_flag is not None else _env_seed()
    return load_config(path, seed_override=override)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- sync-eval ---------------------------------------------------------------------


def _sync_eval_task(args):
    cluster, method, nf, ne, base, seed_idx, seed, ev = args
    cfg = SyncConfig(
        n_fitpts=nf,
        n_exchanges=ne,
        n_pingpongs=base.n_pingpongs,
        win_size=base.win_size,
        warmup_rounds=base.warmup_rounds,
    )
    inst = SimInstance(cluster, seed, perturb=True)
    outcome = run_sync(inst, method, cfg=cfg)
    offsets = measure_global_offsets(
        inst, outcome, cfg, nsteps=ev.epochs, interval=ev.epoch_interval, nrounds=ev.nrounds
    )
    return [
        (method, cluster.p, seed_idx, epoch, rank, off, outcome.duration, nf, ne)
        for epoch, rank, off in offsets
    ]


def _window_sweep_task(args):
    cluster, base, sweep, seed_idx, seed = args
    inst = SimInstance(cluster, seed, perturb=True)
    outcome = run_sync(inst, "hca", cfg=base)
    rows = []
    spec = SchemeSpec("MS4", "window", nrep=sweep.nrep, window_method="hca", win_size=None)
    for win_us in sweep.win_sizes_us:
        window = WindowSync(outcome, win_us * 1e-6)
        window.initialize(inst)
        res = run_scheme(inst, spec, sweep.func, sweep.msize, window=window)
        invalid = float(np.mean(~res.valid))
        med = float(np.median(res.times[res.valid])) if res.valid.any() else float("nan")
        rows.append(("hca", win_us, seed_idx, invalid, med))
    return rows


def cmd_sync_eval(args) -> int:
    cfg = _load(args.config, args.seed)
    if cfg.sync_eval is None:
        raise ConfigError("config has no 'sync_eval' section")
    ev = cfg.sync_eval
    out = _outdir(args)
    cluster = cfg.cluster.realize(cfg.seed)
    base = cfg.plan.sync

    tasks = []
    for m_idx, method in enumerate(ev.methods):
        grid = ev.grid if method in ("jk", "hca", "hca2") else ev.grid[:1]
        for g_idx, (nf, ne) in enumerate(grid):
            for s_idx in range(ev.seeds):
                seed = derive_seed(cfg.seed, 5, s_idx)
                tasks.append((cluster, method, nf, ne, base, s_idx, seed, ev))
    sync_rows = [row for chunk in pmap(_sync_eval_task, tasks, args.jobs) for row in chunk]
    reports.write_sync_eval_csv(out / "sync_eval.csv", sync_rows)

    # Pareto: median |offset| at the epoch closest to pareto_epoch vs duration
    epoch_idx = sorted({round(row[3] / ev.epoch_interval) for row in sync_rows})
    target_idx = min(epoch_idx, key=lambda i: abs(i * ev.epoch_interval - ev.pareto_epoch)) if epoch_idx else 0
    per_cfg: dict[tuple, dict[str, list]] = {}
    for method, p, _seed, epoch, _rank, off, dur, nf, ne in sync_rows:
        if round(epoch / ev.epoch_interval) == target_idx:
            d = per_cfg.setdefault((method, nf, ne, p), {"off": [], "dur": []})
            d["off"].append(abs(off))
            d["dur"].append(dur)
    pareto_rows = [
        (method, nf, ne, p, float(np.median(d["off"])), float(np.median(d["dur"])))
        for (method, nf, ne, p), d in sorted(per_cfg.items())
    ]
    reports.write_pareto_csv(out / "pareto.csv", pareto_rows)

    sweep_rows = []
    if ev.window_sweep is not None:
        stasks = [
            (cluster, base, ev.window_sweep, s_idx, derive_seed(cfg.seed, 6, s_idx))
            for s_idx in range(ev.seeds)
        ]
        sweep_rows = [row for chunk in pmap(_window_sweep_task, stasks, args.jobs) for row in chunk]
        reports.write_window_sweep_csv(out / "window_sweep.csv", sweep_rows)

    if not args.no_figures:
        figures.fig_drift_over_time(sync_rows, out / "drift_over_time.png")
        figures.fig_offset_after_sync(sync_rows, out / "offset_after_sync.png")
        figures.fig_pareto(pareto_rows, out / "pareto.png")
        if sweep_rows:
            figures.fig_window_sweep(sweep_rows, out / "window_sweep.png")

    print(f"{'method':>10} {'n_fitpts':>9} {'n_exch':>7} {'offset@{:g}s [us]'.format(ev.pareto_epoch):>18} {'sync [s]':>10}")
    for method, nf, ne, _p, off, dur in pareto_rows:
        print(f"{method:>10} {nf:>9} {ne:>7} {off * 1e6:>18.3f} {dur:>10.4f}")
    return EXIT_OK


# -- bench -------------------------------------------------------------------------


def _bench_outputs(out: Path, cfg: RunConfig, result, no_figures: bool) -> int:
    plan = cfg.plan
    summary = analyze_results(result.rows, plan.n_mpiruns)
    reports.write_raw_csv(out / "raw.csv", result.rows)
    reports.write_summary_csv(out / "summary.csv", summary, plan.scheme.scheme)
    effective = {
        "p": result.p,
        "seed": plan.master_seed,
        "scheme": plan.scheme.scheme,
        "sync": plan.scheme.sync,
        "window_rule": "5x pilot median duration" if plan.scheme.win_size in (None, "auto") else "fixed",
        "resolved_windows_s": {f"{f}/{m}": w for (f, m), w in sorted(result.resolved_windows.items())},
    }
    (out / "effective_config.json").write_text(json.dumps(effective, indent=2, sort_keys=True) + "\n")

    if plan.scheme.scheme in ("MS1", "MS4"):
        bin_rows = []
        for func in plan.funcs:
            for msize in plan.msizes:
                series = [
                    r.runtime_s for r in result.rows
                    if r.func == func and r.msize == msize and r.mpirun_id == 0 and r.valid
                ]
                if len(series) >= 2 * cfg.drift_bin_size:
                    for b in bin_series(series, cfg.drift_bin_size, "mean"):
                        bin_rows.append((func, msize, 0, b["bin"], b["stat"], b["ci_lo"], b["ci_hi"]))
        if bin_rows:
            reports.write_drift_bins_csv(out / "drift_bins.csv", bin_rows)
            if not no_figures:
                figures.fig_drift_bins(bin_rows, out / "drift_bins.png")

    if not no_figures:
        figures.fig_runtimes(summary, out / "runtimes.png")

    for failure in result.failures:
        _err(f"measurement failure: {failure}")
    med = _medians_by_key(summary)
    print(f"{'func':>12} {'msize':>9} {'median-of-medians [us]':>23} {'runs':>5}")
    missing = []
    for func in plan.funcs:
        for msize in plan.msizes:
            vals = med.get((func, msize))
            if not vals:
                missing.append((func, msize))
                continue
            print(f"{func:>12} {msize:>9} {float(np.median(vals)) * 1e6:>23.3f} {len(vals):>5}")
    if missing:
        for func, msize in missing:
            _err(f"no valid measurements for {func} msize={msize}")
        return EXIT_EMPTY
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args.config, args.seed)
    out = _outdir(args)
    result = run_benchmark(cfg.cluster, cfg.plan, jobs=args.jobs)
    return _bench_outputs(out, cfg, result, args.no_figures)


# -- compare -----------------------------------------------------------------------


def cmd_compare(args) -> int:
    cfg_a = _load(args.config_a, args.seed)
    cfg_b = _load(args.config_b, args.seed)
    pa, pb = cfg_a.plan, cfg_b.plan
    if (pa.msizes, pa.funcs, pa.n_mpiruns, pa.nrep) != (pb.msizes, pb.funcs, pb.n_mpiruns, pb.nrep):
        raise ConfigError("compare requires both configs to share msizes, funcs, n_mpiruns, and nrep")
    out = _outdir(args)
    res_a = run_benchmark(cfg_a.cluster, pa, jobs=args.jobs)
    res_b = run_benchmark(cfg_b.cluster, pb, jobs=args.jobs)
    for failure in res_a.failures + res_b.failures:
        _err(f"measurement failure: {failure}")
    table = compare_libraries(res_a, res_b, args.alternative)
    if len(table.rows) < len(pa.funcs) * len(pa.msizes):
        _err("some (func, msize) cells have no valid medians on one side")
        return EXIT_EMPTY
    reports.write_comparison_csv(out / "comparison.csv", table)
    reports.write_comparison_medians_csv(out / "comparison_medians.csv", table)
    if not args.no_figures:
        figures.fig_comparison(table, out / "comparison.png")

    print(f"{'func':>12} {'msize':>9} {'median A [us]':>14} {'median B [us]':>14} {'p-value':>12} {'':>4}")
    import statistics

    for r in table.rows:
        print(
            f"{r.func:>12} {r.msize:>9} {statistics.median(r.medians_a) * 1e6:>14.3f} "
            f"{statistics.median(r.medians_b) * 1e6:>14.3f} {r.p_value:>12.5f} {r.stars:>4}"
        )
    return EXIT_OK


# -- repro -------------------------------------------------------------------------


def cmd_repro(args) -> int:
    cfg = _load(args.config, args.seed)
    out = _outdir(args)
    rows = reproducibility_trials(cfg.cluster, cfg.plan, cfg.ntrial, jobs=args.jobs)
    if not rows:
        _err("reproducibility trials produced no data")
        return EXIT_EMPTY
    reports.write_repro_csv(out / "repro.csv", rows)
    if not args.no_figures:
        figures.fig_reproducibility(rows, out / "reproducibility.png")
    print(f"{'msize':>9} {'method':>9} {'spread [%]':>11}")
    for r in sorted(rows, key=lambda r: (r.msize, r.method)):
        print(f"{r.msize:>9} {r.method:>9} {r.spread * 100:>11.3f}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def _add_common(sub, config_flag=True):
    if config_flag:
        sub.add_argument("--config", required=True, help="YAML run configuration")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--jobs", type=int, default=1, help="parallel simulation workers")
    sub.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clockbench", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("sync-eval", help="evaluate clock-synchronization methods")
    _add_common(s)
    s.set_defaults(fn=cmd_sync_eval)

    s = subs.add_parser("bench", help="run the benchmark experiment")
    _add_common(s)
    s.set_defaults(fn=cmd_bench)

    s = subs.add_parser("compare", help="compare two configurations with a Wilcoxon test")
    s.add_argument("--config-a", required=True, help="YAML config of library A")
    s.add_argument("--config-b", required=True, help="YAML config of library B")
    s.add_argument(
        "--alternative", choices=("two-sided", "less", "greater"), default="two-sided",
        help="alternative hypothesis (less: A is faster)",
    )
    _add_common(s, config_flag=False)
    s.set_defaults(fn=cmd_compare)

    s = subs.add_parser("repro", help="reproducibility trials against a single-run baseline")
    _add_common(s)
    s.set_defaults(fn=cmd_repro)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        _err(f"configuration error: {err}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
