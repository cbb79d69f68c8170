"""Data reduction: Tukey filtering, the eight historical processing schemes,
binning, and normalization.

Quartiles use linear interpolation between order statistics at positions
1 + (n-1)q (the common "type 7" rule); this choice matters for the exact
kept-set of the Tukey filter and is pinned by tests. The median of an
even-length sample is the mean of the two middle order statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st


@dataclass(frozen=True)
class Sample:
    values: tuple[float, ...]
    meta: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.size and (not np.isfinite(arr).all() or (arr <= 0).any()):
            raise ValueError("sample values must be finite and positive")

    @property
    def n(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class SummaryRow:
    mean: float
    median: float
    min: float
    max: float
    q1: float
    q3: float
    std_err: float
    n_raw: int
    n_kept: int

    def __post_init__(self):
        vals = (self.min, self.q1, self.median, self.q3, self.max)
        if all(math.isfinite(v) for v in vals):
            if not (self.min <= self.q1 <= self.median <= self.q3 <= self.max):
                raise ValueError("summary quantiles out of order")


def quartiles(values: np.ndarray) -> tuple[float, float]:
    """Q1 and Q3 by linear interpolation at positions 1 + (n-1)q."""
    return tuple(np.percentile(np.asarray(values, dtype=float), [25, 75], method="linear"))


def tukey_bounds(values: np.ndarray) -> tuple[float, float]:
    q1, q3 = quartiles(values)
    iqr = q3 - q1
    return q1 - 1.5 * iqr, q3 + 1.5 * iqr


def tukey_filter_values(values: np.ndarray) -> tuple[np.ndarray, bool]:
    """Single-pass Tukey fence on a plain array.

    Returns (kept values in order, warned); samples of fewer than 4 values
    pass through with warned=True.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 4:
        return values.copy(), True
    lo, hi = tukey_bounds(values)
    return values[(values >= lo) & (values <= hi)], False


def tukey_filter(sample: Sample) -> Sample:
    """Remove values outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR]; one pass."""
    kept, warned = tukey_filter_values(sample.array())
    flags = sample.flags + ("tukey_passthrough",) if warned else sample.flags
    return Sample(tuple(float(v) for v in kept), dict(sample.meta), flags)


def summarize(values: np.ndarray, n_raw: int | None = None) -> SummaryRow:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        nan = float("nan")
        return SummaryRow(nan, nan, nan, nan, nan, nan, nan, n_raw or 0, 0)
    q1, q3 = quartiles(values)
    std_err = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SummaryRow(
        mean=float(values.mean()),
        median=float(np.median(values)),
        min=float(values.min()),
        max=float(values.max()),
        q1=float(q1),
        q3=float(q3),
        std_err=std_err,
        n_raw=n_raw if n_raw is not None else n,
        n_kept=n,
    )


# -- the eight historical processing schemes ----------------------------------------
#
# Input topologies:
#   per-obs local durations:   array (p, nrep)   [PS1, PS2, PS6]
#   per-rank scalar averages:  array (p,)        [PS3, PS7]
#   normalized global stamps:  starts/ends (p, nrep) in the common clock [PS4, PS5]
#   per-repetition means:      array (k,)        [PS8]


class SchemeShapeError(ValueError):
    pass


def _as_matrix(data, scheme: str) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise SchemeShapeError(f"{scheme} expects per-obs per-rank data of shape (p, nrep)")
    return arr


def _as_ranks(data, scheme: str) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 1:
        raise SchemeShapeError(f"{scheme} expects one scalar per rank, shape (p,)")
    return arr


def ps1(local_durations) -> dict:
    """Quartile-trimmed mean/stdev of per-obs max-reduced durations."""
    lt = _as_matrix(local_durations, "PS1")
    lmax = np.sort(lt.max(axis=0))
    nrep = lmax.size
    trimmed = lmax[nrep // 4 : nrep - nrep // 4]
    return {
        "mean": float(trimmed.mean()),
        "stdev": float(np.std(trimmed, ddof=1)) if trimmed.size > 1 else 0.0,
        "n_raw": int(nrep),
        "n_kept": int(trimmed.size),
    }


def ps2(local_durations, level: float = 0.95) -> dict:
    """Mean with CI, plus min/max, of per-obs max-reduced durations."""
    lt = _as_matrix(local_durations, "PS2")
    lmax = lt.max(axis=0)
    n = lmax.size
    mean = float(lmax.mean())
    if n > 1:
        half = float(_st.t.ppf(0.5 + level / 2, n - 1) * np.std(lmax, ddof=1) / math.sqrt(n))
    else:
        half = 0.0
    return {"mean": mean, "ci_lo": mean - half, "ci_hi": mean + half,
            "min": float(lmax.min()), "max": float(lmax.max())}


def ps3(rank_averages) -> dict:
    """Min/max/mean across per-rank average latencies."""
    t = _as_ranks(rank_averages, "PS3")
    return {"mean": float(t.mean()), "min": float(t.min()), "max": float(t.max())}


def ps4(global_ends, root_global_starts, level: float = 0.95) -> dict:
    """Max-reduce normalized end times, subtract the root's start per obs."""
    ge = _as_matrix(global_ends, "PS4")
    starts = np.asarray(root_global_starts, dtype=float)
    if starts.ndim != 1 or starts.size != ge.shape[1]:
        raise SchemeShapeError("PS4 expects root start stamps, one per observation")
    exec_times = ge.max(axis=0) - starts
    n = exec_times.size
    mean = float(exec_times.mean())
    half = float(_st.t.ppf(0.5 + level / 2, n - 1) * np.std(exec_times, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return {"mean": mean, "ci_lo": mean - half, "ci_hi": mean + half, "times": exec_times}


def ps5(global_starts, global_ends, a: float = 2.0) -> dict:
    """Gather all p*nrep normalized durations; drop those above t_99 * a."""
    gs = _as_matrix(global_starts, "PS5")
    ge = _as_matrix(global_ends, "PS5")
    if gs.shape != ge.shape:
        raise SchemeShapeError("PS5 expects matching (p, nrep) start and end stamps")
    flat = (ge - gs).ravel()
    t99 = float(np.percentile(flat, 99, method="linear"))
    kept = flat[flat <= t99 * a]
    return {"min": float(kept.min()), "max": float(kept.max()), "mean": float(kept.mean()),
            "n_raw": int(flat.size), "n_kept": int(kept.size)}


def ps6(local_durations, op: str = "min") -> dict:
    """Per-rank OP over its own durations, then max across ranks."""
    if op not in {"min", "max", "mean", "median"}:
        raise ValueError("PS6 op must be one of min, max, mean, median")
    lt = _as_matrix(local_durations, "PS6")
    per_rank = {"min": lt.min, "max": lt.max, "mean": lt.mean}.get(op)
    reduced = np.median(lt, axis=1) if op == "median" else per_rank(axis=1)
    return {"t_max": float(reduced.max()), "per_rank": reduced}


def ps7(rank_averages) -> dict:
    """Min/max/mean across the per-rank mean run-times."""
    t = _as_ranks(rank_averages, "PS7")
    return {"min": float(t.min()), "max": float(t.max()), "mean": float(t.mean())}


def ps8(repetition_means) -> dict:
    """Minimum over k repetitions of the measurement scheme."""
    t = np.asarray(repetition_means, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise SchemeShapeError("PS8 expects a nonempty vector of per-repetition means")
    return {"t": float(t.min()), "k": int(t.size)}


_SCHEMES = {"PS1": ps1, "PS2": ps2, "PS3": ps3, "PS4": ps4, "PS5": ps5, "PS6": ps6, "PS7": ps7, "PS8": ps8}


def apply_processing_scheme(scheme: str, *data, **kw) -> dict:
    """Dispatch to one of PS1..PS8 (shape requirements documented above)."""
    try:
        fn = _SCHEMES[scheme.upper()]
    except KeyError:
        raise ValueError(f"unknown processing scheme {scheme!r}; expected PS1..PS8") from None
    return fn(*data, **kw)


# -- binning and normalization --------------------------------------------------------


def bin_series(series, bin_size: int, stat: str = "mean", level: float = 0.95) -> list[dict]:
    """Contiguous non-overlapping bins with a per-bin statistic and CI; the
    trailing partial bin is dropped."""
    if bin_size < 2:
        raise ValueError("bin_size must be >= 2")
    if stat not in {"mean", "median"}:
        raise ValueError("stat must be 'mean' or 'median'")
    arr = np.asarray(series, dtype=float)
    nbins = arr.size // bin_size
    out = []
    tq = float(_st.t.ppf(0.5 + level / 2, bin_size - 1))
    for b in range(nbins):
        chunk = arr[b * bin_size : (b + 1) * bin_size]
        sd = float(np.std(chunk, ddof=1))
        if stat == "mean":
            center = float(chunk.mean())
            half = tq * sd / math.sqrt(bin_size)
        else:
            center = float(np.median(chunk))
            # asymptotic normal-theory band for the sample median
            half = 1.96 * 1.2533 * sd / math.sqrt(bin_size)
        out.append({"bin": b, "stat": center, "ci_lo": center - half, "ci_hi": center + half, "n": bin_size})
    return out


def normalize_to_min(values) -> np.ndarray:
    """Divide by the minimum; the minimum maps to 1.0."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot normalize an empty set")
    if (arr <= 0).any():
        raise ValueError("values must be positive")
    return arr / arr.min()


def relative_spread(values) -> float:
    """(max - min) / max, the 'diff' column convention of run-time tables."""
    arr = np.asarray(values, dtype=float)
    return float((arr.max() - arr.min()) / arr.max())
