"""Delimited-text outputs. Every writer emits a documented header and writes
atomically (temp file + rename), so output files appear once, complete.

Float columns use repr() for exact round-tripping; booleans are 0/1; empty
cells denote missing values.
"""
from __future__ import annotations

import math
import os
from typing import Iterable

from .dataproc import SummaryRow
from .experiment import BenchmarkResult, ComparisonTable, RawObs, ReproRow

RAW_COLUMNS = ("mpirun_id", "func", "msize", "p", "obs", "runtime_s", "valid",
               "ground_truth_s", "scheme", "sync_method")
SUMMARY_COLUMNS = ("func", "msize", "p", "mpirun_id", "scheme", "mean_s", "median_s",
                   "min_s", "max_s", "stderr_s", "n_raw", "n_kept")
SYNC_EVAL_COLUMNS = ("method", "p", "seed", "epoch_s", "rank", "offset_s",
                     "sync_duration_s", "n_fitpts", "n_exchanges")
PARETO_COLUMNS = ("method", "n_fitpts", "n_exchanges", "p", "median_abs_offset_s",
                  "median_sync_duration_s")
COMPARISON_COLUMNS = ("func", "msize", "n_a", "n_b", "median_of_medians_a_s",
                      "median_of_medians_b_s", "p_value", "stars", "alternative")
COMPARISON_MEDIANS_COLUMNS = ("func", "msize", "library", "mpirun_id", "median_s")
WINDOW_SWEEP_COLUMNS = ("method", "win_size_us", "seed", "invalid_frac", "median_runtime_s")
REPRO_COLUMNS = ("msize", "method", "trial", "value_s", "normalized", "spread")
DRIFT_BINS_COLUMNS = ("func", "msize", "mpirun_id", "bin", "stat", "ci_lo", "ci_hi")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path, columns: tuple[str, ...], rows: Iterable[tuple]) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def write_raw_csv(path, rows: list[RawObs]) -> None:
    write_csv(
        path,
        RAW_COLUMNS,
        (
            (r.mpirun_id, r.func, r.msize, r.p, r.obs, r.runtime_s, r.valid,
             r.ground_truth_s, r.scheme, r.sync_method)
            for r in rows
        ),
    )


def write_summary_csv(path, summary: dict[tuple, SummaryRow], scheme: str) -> None:
    def rows():
        for (msize, p, func, mpirun_id), s in sorted(summary.items()):
            yield (func, msize, p, mpirun_id, scheme, s.mean, s.median, s.min, s.max,
                   s.std_err, s.n_raw, s.n_kept)

    write_csv(path, SUMMARY_COLUMNS, rows())


def write_sync_eval_csv(path, rows: list[tuple]) -> None:
    write_csv(path, SYNC_EVAL_COLUMNS, rows)


def write_pareto_csv(path, rows: list[tuple]) -> None:
    write_csv(path, PARETO_COLUMNS, rows)


def write_comparison_csv(path, table: ComparisonTable) -> None:
    import statistics

    def rows():
        for r in table.rows:
            yield (r.func, r.msize, len(r.medians_a), len(r.medians_b),
                   statistics.median(r.medians_a), statistics.median(r.medians_b),
                   r.p_value, r.stars, r.alternative)

    write_csv(path, COMPARISON_COLUMNS, rows())


def write_comparison_medians_csv(path, table: ComparisonTable) -> None:
    def rows():
        for r in table.rows:
            for i, v in enumerate(r.medians_a):
                yield (r.func, r.msize, "A", i, v)
            for i, v in enumerate(r.medians_b):
                yield (r.func, r.msize, "B", i, v)

    write_csv(path, COMPARISON_MEDIANS_COLUMNS, rows())


def write_window_sweep_csv(path, rows: list[tuple]) -> None:
    write_csv(path, WINDOW_SWEEP_COLUMNS, rows)


def write_repro_csv(path, rows: list[ReproRow]) -> None:
    def flat():
        for r in rows:
            for trial, (value, norm) in enumerate(zip(r.trial_values, r.normalized)):
                yield (r.msize, r.method, trial, value, norm, r.spread)

    write_csv(path, REPRO_COLUMNS, flat())


def write_drift_bins_csv(path, rows: list[tuple]) -> None:
    write_csv(path, DRIFT_BINS_COLUMNS, rows)
