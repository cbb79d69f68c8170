"""Figure rendering for the report commands: each figure is drawn from the
already-written delimited data and saved as PNG next to it."""
from __future__ import annotations

import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METHOD_COLORS = {
    "skampi": "tab:blue",
    "netgauge": "tab:orange",
    "jk": "tab:green",
    "hca": "tab:red",
    "hca2": "tab:purple",
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_drift_over_time(sync_rows, path) -> None:
    """Median absolute clock offset versus time since sync, per method."""
    by_method = defaultdict(lambda: defaultdict(list))
    for method, _p, _seed, epoch, _rank, offset, _dur, _nf, _ne in sync_rows:
        by_method[method][round(epoch, 6)].append(abs(offset))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, per_epoch in sorted(by_method.items()):
        epochs = sorted(per_epoch)
        med = [np.median(per_epoch[e]) * 1e6 for e in epochs]
        ax.plot(epochs, med, marker="o", label=method, color=_METHOD_COLORS.get(method))
    ax.set_yscale("log")
    ax.set_xlabel("time since synchronization [s]")
    ax.set_ylabel("median |clock offset| [µs]")
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def fig_offset_after_sync(sync_rows, path) -> None:
    """Distribution of per-rank offsets right after synchronization."""
    by_method = defaultdict(list)
    for method, _p, _seed, epoch, _rank, offset, _dur, _nf, _ne in sync_rows:
        if epoch == 0.0:
            by_method[method].append(abs(offset) * 1e6)
    if not by_method:
        return
    methods = sorted(by_method)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.boxplot([by_method[m] for m in methods], tick_labels=methods)
    ax.set_yscale("log")
    ax.set_ylabel("|clock offset| directly after sync [µs]")
    ax.grid(alpha=0.3)
    _save(fig, path)


def fig_pareto(pareto_rows, path) -> None:
    """Offset-vs-duration trade-off of the synchronization methods."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for method, nf, ne, _p, offset, duration in pareto_rows:
        ax.scatter(duration, offset * 1e6, color=_METHOD_COLORS.get(method), label=method)
        if nf:
            ax.annotate(f"({nf},{ne})", (duration, offset * 1e6), fontsize=7,
                        textcoords="offset points", xytext=(4, 3))
    handles, labels = ax.get_legend_handles_labels()
    seen = dict(zip(labels, handles))
    ax.legend(seen.values(), seen.keys())
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("synchronization duration [s]")
    ax.set_ylabel("median |clock offset| [µs]")
    ax.grid(alpha=0.3)
    _save(fig, path)


def fig_window_sweep(sweep_rows, path) -> None:
    """Invalid-measurement fraction versus window size."""
    per_win = defaultdict(list)
    for _method, win_us, _seed, frac, _median in sweep_rows:
        per_win[win_us].append(frac * 100.0)
    wins = sorted(per_win)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(
        wins,
        [np.mean(per_win[w]) for w in wins],
        yerr=[np.std(per_win[w]) for w in wins],
        marker="o",
    )
    ax.set_xscale("log")
    ax.set_xlabel("window size [µs]")
    ax.set_ylabel("invalid measurements [%]")
    ax.grid(alpha=0.3)
    _save(fig, path)


def fig_runtimes(summary, path) -> None:
    """Mean of per-mpirun medians versus message size, with min/max whiskers."""
    per_key = defaultdict(list)
    for (msize, _p, func, _run), row in sorted(summary.items()):
        if row.n_kept > 0 and math.isfinite(row.median):
            per_key[(func, msize)].append(row.median)
    funcs = sorted({k[0] for k in per_key})
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for func in funcs:
        msizes = sorted(m for f, m in per_key if f == func)
        med = np.array([np.mean(per_key[(func, m)]) for m in msizes])
        lo = np.array([np.min(per_key[(func, m)]) for m in msizes])
        hi = np.array([np.max(per_key[(func, m)]) for m in msizes])
        ax.errorbar(msizes, med * 1e6, yerr=[(med - lo) * 1e6, (hi - med) * 1e6],
                    marker="o", capsize=3, label=func)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("message size [Bytes]")
    ax.set_ylabel("run-time [µs]")
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def fig_comparison(table, path) -> None:
    """Per-msize distributions of per-mpirun medians for A and B with stars."""
    if not table.rows:
        return
    funcs = sorted({r.func for r in table.rows})
    fig, axes = plt.subplots(len(funcs), 1, figsize=(8, 4.0 * len(funcs)), squeeze=False)
    for ax, func in zip(axes[:, 0], funcs):
        rows = [r for r in table.rows if r.func == func]
        positions = np.arange(len(rows))
        box_a = ax.boxplot([np.array(r.medians_a) * 1e6 for r in rows],
                           positions=positions - 0.18, widths=0.3, patch_artist=True)
        box_b = ax.boxplot([np.array(r.medians_b) * 1e6 for r in rows],
                           positions=positions + 0.18, widths=0.3, patch_artist=True)
        for patch in box_a["boxes"]:
            patch.set_facecolor("tab:blue")
        for patch in box_b["boxes"]:
            patch.set_facecolor("tab:orange")
        for pos, r in zip(positions, rows):
            if r.stars:
                top = max(max(r.medians_a), max(r.medians_b)) * 1e6
                ax.text(pos, top * 1.05, r.stars, ha="center", fontsize=10)
        ax.set_xticks(positions)
        ax.set_xticklabels([str(r.msize) for r in rows])
        ax.set_yscale("log")
        ax.set_xlabel("message size [Bytes]")
        ax.set_ylabel(f"{func} median run-time [µs]")
        ax.legend([box_a["boxes"][0], box_b["boxes"][0]], ["A", "B"])
        ax.grid(alpha=0.3)
    _save(fig, path)


def fig_reproducibility(repro_rows, path) -> None:
    """Normalized per-trial run-times per message size, ours versus baseline."""
    methods = sorted({r.method for r in repro_rows})
    fig, axes = plt.subplots(1, len(methods), figsize=(6 * len(methods), 4.5), squeeze=False)
    for ax, method in zip(axes[0], methods):
        rows = sorted((r for r in repro_rows if r.method == method), key=lambda r: r.msize)
        for i, r in enumerate(rows):
            ax.scatter([i] * len(r.normalized), r.normalized, s=12, alpha=0.7, color="tab:blue")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels([str(r.msize) for r in rows], rotation=45)
        ax.set_xlabel("message size [Bytes]")
        ax.set_ylabel("normalized run-time")
        ax.set_title(method)
        ax.grid(alpha=0.3)
    _save(fig, path)


def fig_drift_bins(bin_rows, path) -> None:
    """Binned run-time means with CIs over the course of one mpirun."""
    per_key = defaultdict(list)
    for func, msize, run, b, stat, lo, hi in bin_rows:
        per_key[(func, msize, run)].append((b, stat, lo, hi))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for (func, msize, run), pts in sorted(per_key.items()):
        pts.sort()
        bins = [p[0] for p in pts]
        stat = np.array([p[1] for p in pts]) * 1e6
        lo = np.array([p[2] for p in pts]) * 1e6
        hi = np.array([p[3] for p in pts]) * 1e6
        ax.errorbar(bins, stat, yerr=[stat - lo, hi - stat], marker=".",
                    label=f"{func}/{msize} run {run}")
    ax.set_xlabel("bin index")
    ax.set_ylabel("binned run-time [µs]")
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    _save(fig, path)
