"""Measurement machinery: barriers, window-based start/stop synchronization,
the four measurement schemes, and the adaptive benchmark loops.

Completion-time definitions:
  - barrier path: max over ranks of the per-rank local duration;
  - window path: timestamps normalized to the global clock, completion is
    max finishing time minus min starting time across ranks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clocksync import GlobalClockView, SyncOutcome
from .simcore.instance import SimInstance

STARTED_LATE = "STARTED_LATE"
TOOK_TOO_LONG = "TOOK_TOO_LONG"

_SYNC_KINDS = {"own-barrier", "library-barrier", "window"}
_SCHEMES = {"MS1", "MS2", "MS3", "MS4"}


class EmptySampleError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchemeSpec:
    scheme: str
    sync: str
    nrep: int
    window_method: str | None = None
    win_size: float | str | None = None     # seconds or "auto"
    ms3_barrier: bool = True
    pipelining: float = 0.0                 # MS2 back-to-back duration discount

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {sorted(_SCHEMES)}")
        if self.sync not in _SYNC_KINDS:
            raise ValueError(f"sync must be one of {sorted(_SYNC_KINDS)}")
        if self.scheme == "MS4" and self.sync != "window":
            raise ValueError("MS4 requires a window sync")
        if self.scheme != "MS4" and self.sync == "window":
            raise ValueError(f"{self.scheme} requires a barrier sync")
        if self.nrep < 1:
            raise ValueError("nrep must be >= 1")
        if not (0.0 <= self.pipelining < 1.0):
            raise ValueError("pipelining discount must be in [0, 1)")


@dataclass
class Measurement:
    obs: int
    local_start: np.ndarray
    local_end: np.ndarray
    true_start: np.ndarray
    true_end: np.ndarray
    flags: frozenset
    ground_truth: float
    global_start: np.ndarray | None = None
    global_end: np.ndarray | None = None
    max_clock_error: float | None = None

    @property
    def valid(self) -> bool:
        return not self.flags

    def completion_local(self) -> float:
        return float(np.max(self.local_end - self.local_start))

    def completion_global(self) -> float:
        if self.global_start is None:
            raise ValueError("global completion needs window-scheme stamps")
        return float(np.max(self.global_end) - np.min(self.global_start))

    def completion(self) -> float:
        return self.completion_local() if self.global_start is None else self.completion_global()

    def start_skew(self) -> float:
        return float(np.max(self.true_start) - np.min(self.true_start))


def completion_from_global(global_starts, global_ends) -> float:
    """Max finishing minus min starting time in a common clock."""
    return float(np.max(global_ends) - np.min(global_starts))


# -- barriers -----------------------------------------------------------------------


def dissemination_barrier(inst: SimInstance, participants=None) -> np.ndarray:
    """Benchmark-owned dissemination barrier: ceil(log2 k) message rounds,
    round r sends to the participant (index + 2^r) mod k. Returns per-rank
    exit true-times (and advances the instance)."""
    ranks = list(range(inst.p)) if participants is None else list(participants)
    k = len(ranks)
    if k < 2:
        raise ValueError("a barrier needs at least 2 participants")
    rounds = max(1, math.ceil(math.log2(k)))
    now = {r: float(inst.now[r]) for r in ranks}
    for step in range(rounds):
        offset = 2 ** step
        arrivals = {}
        for i, r in enumerate(ranks):
            dst = ranks[(i + offset) % k]
            arrivals[dst] = now[r] + inst.sample_latency(r, dst)
        for r in ranks:
            now[r] = max(now[r], arrivals[r])
    for r in ranks:
        inst.now[r] = now[r]
    return np.array([now[r] for r in ranks])


def library_barrier(inst: SimInstance) -> np.ndarray:
    """The library's MPI_Barrier model: completion cost plus per-rank exit
    skew from the configured distribution. Returns per-rank exit times."""
    rec = inst.collective_execute("barrier", 0, label="library_barrier")
    return rec.exits.copy()


# -- window machinery ----------------------------------------------------------------


@dataclass
class WindowSync:
    """Window-based process synchronization over a completed clock sync."""

    outcome: SyncOutcome
    win_size: float
    start_global: float = 0.0

    def initialize(self, inst: SimInstance) -> None:
        """Root picks the first window start one window into the future and
        broadcasts it (modelled as a control-plane sync)."""
        from .clocksync.algorithms import _control_sync

        _control_sync(inst)
        root = self.outcome.root
        reading = inst.clocks[root].read(inst.now[root])
        self.start_global = self.outcome.views[root].to_global(reading) + self.win_size
        _control_sync(inst)

    def window_target(self, obs: int) -> float:
        return self.start_global + obs * self.win_size

    def start(self, inst: SimInstance, rank: int, obs: int) -> tuple[set, float]:
        """Busy-wait until the window start; flags STARTED_LATE if the local
        clock is already past it. Returns (flags, local window target)."""
        view = self.outcome.views[rank]
        target_local = view.to_local(self.window_target(obs))
        flags = set()
        reading = inst.clocks[rank].read(inst.now[rank])
        if reading > target_local:
            flags.add(STARTED_LATE)
        else:
            inst.busy_wait_until_local(rank, target_local)
        return flags, target_local

    def stop(self, inst: SimInstance, rank: int, end_reading: float, target_local: float) -> set:
        if end_reading - target_local > self.win_size:
            return {TOOK_TOO_LONG}
        return set()


def window_start_stop(inst: SimInstance, sync: WindowSync, rank: int, obs: int, run_local) -> tuple[set, float, float]:
    """One windowed measurement on one rank: wait for the window, run the
    (local-time) operation via run_local(), apply the overrun check.

    Returns (flags, local_start, local_end)."""
    flags, target_local = sync.start(inst, rank, obs)
    l_start = inst.clocks[rank].read(inst.now[rank])
    l_end = run_local()
    flags |= sync.stop(inst, rank, l_end, target_local)
    return flags, l_start, l_end


# -- timing procedure ----------------------------------------------------------------


def _measure_once(
    inst: SimInstance,
    func: str,
    msize: int,
    obs: int,
    window: WindowSync | None,
    barrier: str | None,
    duration_scale: float = 1.0,
) -> Measurement:
    p = inst.p
    flags: set = set()
    targets_local = np.zeros(p)
    if window is not None:
        for r in range(p):
            f, targets_local[r] = window.start(inst, r, obs)
            flags |= f
    elif barrier == "own-barrier":
        dissemination_barrier(inst)
    elif barrier == "library-barrier":
        library_barrier(inst)

    local_start = np.array([inst.clocks[r].read(inst.now[r]) for r in range(p)])
    true_start = inst.now.copy()
    rec = inst.collective_execute(func, msize, label="measured", duration_scale=duration_scale)
    true_end = inst.now.copy()
    local_end = np.array([inst.clocks[r].read(inst.now[r]) for r in range(p)])

    global_start = global_end = None
    max_err = None
    if window is not None:
        views = window.outcome.views
        root = window.outcome.root
        global_start = np.array([views[r].to_global(local_start[r]) for r in range(p)])
        global_end = np.array([views[r].to_global(local_end[r]) for r in range(p)])
        for r in range(p):
            f = window.stop(inst, r, local_end[r], targets_local[r])
            flags |= f
        root_clock = inst.clocks[root]
        ideal_start = np.array(
            [views[root].to_global(float(root_clock.noiseless_at(t))) for t in true_start]
        )
        ideal_end = np.array(
            [views[root].to_global(float(root_clock.noiseless_at(t))) for t in true_end]
        )
        max_err = float(
            max(np.max(np.abs(global_start - ideal_start)), np.max(np.abs(global_end - ideal_end)))
        )
    return Measurement(
        obs=obs,
        local_start=local_start,
        local_end=local_end,
        true_start=true_start,
        true_end=true_end,
        flags=frozenset(flags),
        ground_truth=rec.ground_truth,
        global_start=global_start,
        global_end=global_end,
        max_clock_error=max_err,
    )


def time_mpi_function(
    inst: SimInstance,
    func: str,
    msize: int,
    nrep: int,
    sync,
    require_valid: bool = True,
) -> list[Measurement]:
    """The timing procedure: for each observation synchronize processes
    (barrier or window), stamp, execute the collective, stamp.

    `sync` is either "own-barrier", "library-barrier", or a WindowSync.
    With a window sync and zero valid observations an EmptySampleError is
    raised (suppress with require_valid=False)."""
    window = sync if isinstance(sync, WindowSync) else None
    barrier = sync if isinstance(sync, str) else None
    if barrier is not None and barrier not in ("own-barrier", "library-barrier"):
        raise ValueError(f"unknown sync {sync!r}")
    out = [_measure_once(inst, func, msize, obs, window, barrier) for obs in range(nrep)]
    if window is not None and require_valid and not any(m.valid for m in out):
        raise EmptySampleError(
            f"no valid window measurements for {func} msize={msize} (win_size={window.win_size})"
        )
    return out


@dataclass
class SchemeResult:
    scheme: str
    times: np.ndarray                     # MS1/MS4: per-obs; MS2/MS3: per-rank means
    valid: np.ndarray                     # parallel mask (all True for MS1-MS3)
    ground_truths: np.ndarray
    measurements: list[Measurement] | None = None

    def valid_times(self) -> np.ndarray:
        vals = self.times[self.valid]
        if vals.size == 0:
            raise EmptySampleError("no valid measurements in scheme result")
        return vals


def run_scheme(
    inst: SimInstance,
    spec: SchemeSpec,
    func: str,
    msize: int,
    window: WindowSync | None = None,
) -> SchemeResult:
    """Execute one measurement scheme for one (func, msize) test."""
    p = inst.p
    if spec.scheme == "MS4":
        if window is None:
            raise ValueError("MS4 needs a WindowSync")
        ms = time_mpi_function(inst, func, msize, spec.nrep, window, require_valid=False)
        times = np.array([m.completion_global() for m in ms])
        valid = np.array([m.valid for m in ms])
        gts = np.array([m.ground_truth for m in ms])
        return SchemeResult("MS4", times, valid, gts, ms)

    if spec.scheme == "MS1":
        ms = time_mpi_function(inst, func, msize, spec.nrep, spec.sync)
        times = np.array([m.completion_local() for m in ms])
        gts = np.array([m.ground_truth for m in ms])
        return SchemeResult("MS1", times, np.ones(spec.nrep, bool), gts, ms)

    # MS2 / MS3: one timed region around nrep consecutive calls
    if spec.sync == "own-barrier":
        dissemination_barrier(inst)
    else:
        library_barrier(inst)
    s_time = np.array([inst.clocks[r].read(inst.now[r]) for r in range(p)])
    gts = np.empty(spec.nrep)
    for obs in range(spec.nrep):
        scale = 1.0 - spec.pipelining if (spec.scheme == "MS2" and obs > 0) else 1.0
        rec = inst.collective_execute(func, msize, label="measured", duration_scale=scale)
        gts[obs] = rec.ground_truth
        if spec.scheme == "MS3" and spec.ms3_barrier:
            if spec.sync == "own-barrier":
                dissemination_barrier(inst)
            else:
                library_barrier(inst)
    e_time = np.array([inst.clocks[r].read(inst.now[r]) for r in range(p)])
    per_rank = (e_time - s_time) / spec.nrep
    return SchemeResult(spec.scheme, per_rank, np.ones(p, bool), gts, None)


# -- adaptive loops -------------------------------------------------------------------


def skampi_adaptive_bench(
    inst: SimInstance,
    window: WindowSync,
    func: str,
    msize: int,
    max_rep: int,
    min_rep: int,
    max_std_err: float,
    nrep_init: int = 8,
) -> dict:
    """Error-driven measurement loop: grow the window when at least a quarter
    of a batch is invalid, halve nrep (floor 4) after a long error streak,
    stop once min_rep valid samples exist with a small enough standard error.
    """
    if min_rep < 4:
        raise ValueError("min_rep must be >= 4")
    nrep = max(nrep_init, 4)
    window.win_size = 0.0
    valid_times: list[float] = []
    batches = 0
    while True:
        window.initialize(inst)
        batch = time_mpi_function(inst, func, msize, nrep, window, require_valid=False)
        batches += 1
        total_time = float(
            window.outcome.views[window.outcome.root].to_global(
                inst.clocks[window.outcome.root].read(inst.now[window.outcome.root])
            )
            - window.start_global
        )
        errors = np.array([0 if m.valid else 1 for m in batch])
        valid_times.extend(m.completion_global() for m in batch if m.valid)
        n_errors = int(errors.sum())
        if n_errors >= nrep / 4:
            window.win_size = max(2.0 * window.win_size, total_time / (nrep + 1) * 1.5)
        streak = _max_streak(errors)
        if streak > nrep / 2:
            nrep = max(nrep // 2, 4)
        std_error = (
            float(np.std(valid_times, ddof=1) / math.sqrt(len(valid_times)))
            if len(valid_times) > 1
            else math.inf
        )
        if len(valid_times) >= max_rep or (len(valid_times) >= min_rep and std_error <= max_std_err):
            return {
                "times": np.array(valid_times),
                "nrep": nrep,
                "win_size": window.win_size,
                "std_error": std_error,
                "batches": batches,
            }
        if batches > 200:
            raise RuntimeError("adaptive loop failed to converge")


def _max_streak(errors: np.ndarray) -> int:
    best = run = 0
    for e in errors:
        run = run + 1 if e else 0
        best = max(best, run)
    return best


def nbcbench_adaptive_bench(
    inst: SimInstance,
    window: WindowSync,
    func: str,
    msize: int,
    nrep: int,
    warmup_rounds: int = 4,
    max_retries: int = 100,
) -> dict:
    """Pilot-estimate then measure: halve nrep once if the projected cost
    exceeds 10 simulated seconds; retry a message size with the window grown
    by 1.5 while over a quarter of measurements are invalid or fewer than 4
    are valid."""
    if nrep < 4:
        raise ValueError("nrep must be >= 4")
    for _ in range(warmup_rounds):
        inst.collective_execute(func, msize, label="warmup")
    pilot_n = max(1, nrep // 10)
    pilot = np.empty(pilot_n)
    for i in range(pilot_n):
        s = np.array([inst.clocks[r].read(inst.now[r]) for r in range(inst.p)])
        inst.collective_execute(func, msize, label="pilot")
        e = np.array([inst.clocks[r].read(inst.now[r]) for r in range(inst.p)])
        pilot[i] = np.max(e - s)
    estimated_runtime = float(pilot.min())
    halved = False
    if estimated_runtime * 5 * nrep > 10.0:
        nrep = max(nrep // 2, 4)
        halved = True

    retries = 0
    while True:
        window.initialize(inst)
        batch = time_mpi_function(inst, func, msize, nrep, window, require_valid=False)
        valid = [m for m in batch if m.valid]
        n_errors = nrep - len(valid)
        if n_errors > 0.25 * nrep or len(valid) < 4:
            window.win_size *= 1.5
            retries += 1
            if retries > max_retries:
                raise RuntimeError("window growth failed to produce valid measurements")
            continue
        return {
            "times": np.array([m.completion_global() for m in valid]),
            "nrep": nrep,
            "halved": halved,
            "win_size": window.win_size,
            "retries": retries,
            "estimated_runtime": estimated_runtime,
        }
