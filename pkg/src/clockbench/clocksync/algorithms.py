"""The four distributed clock-synchronization algorithms on a SimInstance.

All pairwise phases are sequential message exchanges, so they are simulated
in closed form: arrival chains are cumulative sums of sampled one-way
latencies, and clock stamps are vectorized reads at those arrival times. A
receive never completes before max(receiver busy-until, send + latency), the
same rule the event engine applies, and per-pair/per-clock RNG streams make
the outcome independent of the order concurrent pairs are processed in.

Control-plane collectives (barrier, bcast, scatter, gather of a few doubles)
only influence phase durations, not estimates; they are modelled as a
deterministic log2(p)-round cost.

Conventions. A pairwise exchange estimates the offset of the *other* process
relative to the caller (other minus me) on both sides of the published
ping-pong: this is the combination under which the offset-relay of the
sequential method and the intercept adjustment of the hierarchical method
recover exact offsets on exact clocks, which the recovery tests pin down.
Drift models map a rank's (adjusted) local time to its offset from the
reference, so normalization subtracts the modelled offset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dataproc import tukey_filter_values
from ..simcore.instance import SimInstance
from .models import (
    IDENTITY_MODEL,
    LinearModel,
    ModelInterval,
    denormalize_time,
    fit_xy,
    merge_lms,
    merge_model_intervals,
    normalize_time,
)

VALID_METHODS = ("skampi", "netgauge", "jk", "hca", "hca2")


class SyncMethodError(ValueError):
    def __init__(self, name):
        super().__init__(f"unknown synchronization method {name!r}; valid methods: {', '.join(VALID_METHODS)}")


@dataclass(frozen=True)
class SyncConfig:
    n_fitpts: int = 1000
    n_exchanges: int = 100
    n_pingpongs: int = 100
    hierarchical_intercepts: bool = False
    win_size: float = 1e-3
    warmup_rounds: int = 10

    def __post_init__(self):
        for name in ("n_fitpts", "n_exchanges", "n_pingpongs"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if self.win_size <= 0.0:
            raise ValueError("win_size must be > 0")
        if self.warmup_rounds < 0:
            raise ValueError("warmup_rounds must be >= 0")


@dataclass(frozen=True)
class GlobalClockView:
    """Per-rank mapping between raw local clock readings and the logical
    global (reference) clock established by a synchronization method."""

    rank: int
    model: LinearModel = IDENTITY_MODEL
    origin: float = 0.0  # local reading subtracted before the model applies

    def to_global(self, local: float) -> float:
        return normalize_time(self.model, local - self.origin)

    def to_local(self, global_time: float) -> float:
        return denormalize_time(self.model, global_time) + self.origin


@dataclass
class SyncOutcome:
    method: str
    views: list[GlobalClockView]
    duration: float
    offsets: np.ndarray | None = None          # measured offset of each rank vs root
    models: list[LinearModel] | None = None
    intervals: list[ModelInterval] | None = None
    fit_models: list[LinearModel] | None = None  # regression models before intercept adjustment
    rtts: np.ndarray | None = None
    root: int = 0


# -- message-chain primitives ----------------------------------------------------


def _pingpong_times(inst: SimInstance, initiator: int, responder: int, n: int):
    """Advance an n-exchange initiator->responder->initiator chain.

    Returns (S, A, R): initiator send times, responder arrival/stamp times,
    and reply arrival times back at the initiator. Advances both ranks' time.
    """
    rng = inst.network.channel_rng(initiator, responder)
    fwd = inst.network.sample_many(initiator, responder, n, rng)
    bwd = inst.network.sample_many(responder, initiator, n, rng)
    start = inst.now[initiator]
    arrivals = np.empty(n)
    arrivals[0] = max(inst.now[responder], start + fwd[0])
    if n > 1:
        arrivals[1:] = arrivals[0] + np.cumsum(bwd[:-1] + fwd[1:])
    replies = arrivals + bwd
    sends = np.empty(n)
    sends[0] = start
    sends[1:] = replies[:-1]
    inst.now[responder] = arrivals[-1]
    inst.now[initiator] = replies[-1]
    return sends, arrivals, replies


def _warmup(inst: SimInstance, a: int, b: int, rounds: int) -> None:
    if rounds > 0:
        _pingpong_times(inst, a, b, rounds)


def _control_sync(inst: SimInstance, ranks=None) -> None:
    """Barrier/bcast-style control step: all ranks meet, then pay a
    deterministic log2(p)-round latency cost."""
    ranks = range(inst.p) if ranks is None else ranks
    t = max(inst.now[r] for r in ranks)
    rounds = max(1, math.ceil(math.log2(inst.p))) if inst.p > 1 else 1
    t += rounds * inst.cluster.network.base_latency * inst.latency_factor
    for r in ranks:
        inst.now[r] = t


# -- SKaMPI ------------------------------------------------------------------------


def skampi_pingpong(inst: SimInstance, p1: int, p2: int, n: int = 100) -> float:
    """Offset of p2's clock relative to p1's from an n-exchange ping-pong."""
    diff_at_p1, _ = _skampi_session(inst, p1, p2, n)
    return diff_at_p1


def _skampi_session(inst: SimInstance, p1: int, p2: int, n: int) -> tuple[float, float]:
    """One ping-pong phase; returns (estimate at p1 of C2-C1, estimate at p2
    of C1-C2). The leader tightens [t_last - s_now, t_last - s_last]; the
    follower pairs each incoming stamp with its surrounding local stamps."""
    if p1 == p2:
        raise ValueError("ping-pong requires two distinct ranks")
    if n < 1:
        raise ValueError("need at least one exchange")
    sends, arrivals, replies = _pingpong_times(inst, p1, p2, n)
    leader_times = np.ravel(np.column_stack([sends, replies]))
    leader_vals = inst.clocks[p1].read_sequence(leader_times)
    s_last = leader_vals[0::2]
    s_now = leader_vals[1::2]
    t_last = inst.clocks[p2].read_sequence(arrivals)

    td_min = np.max(t_last - s_now)
    td_max = np.min(t_last - s_last)
    diff_at_p1 = 0.5 * (td_min + td_max)

    lower = np.max(s_last - t_last)
    if n > 1:
        upper = np.min(s_last[1:] - t_last[:-1])
        diff_at_p2 = 0.5 * (lower + upper)
    else:
        diff_at_p2 = lower
    return float(diff_at_p1), float(diff_at_p2)


def skampi_sync(inst: SimInstance, root: int = 0, cfg: SyncConfig = SyncConfig()) -> SyncOutcome:
    """Sequential per-rank ping-pong with the root, offsets broadcast and
    combined additively; O(p) rounds."""
    if inst.p < 2:
        raise ValueError("need at least 2 ranks")
    start = inst.now.copy()
    measured = np.zeros(inst.p)   # at root: offset of rank i relative to root
    own = np.zeros(inst.p)        # at rank i: offset of root relative to i
    for i in range(inst.p):
        if i == root:
            continue
        _control_sync(inst)
        d_root, d_i = _skampi_session(inst, root, i, cfg.n_pingpongs)
        measured[i] = d_root
        own[i] = d_i
    _control_sync(inst)  # broadcast of the root's offset list
    duration = float(np.max(inst.now - start))
    views = [
        GlobalClockView(r, LinearModel(0.0, 0.0 if r == root else -own[r]))
        for r in range(inst.p)
    ]
    return SyncOutcome("skampi", views, duration, offsets=measured, root=root)


# -- Netgauge ----------------------------------------------------------------------


def _netgauge_compute_offset(inst: SimInstance, client: int, server: int, cfg: SyncConfig) -> float:
    """Min-RTT ping-pong loop: keep exchanging while the RTT is at or below
    the minimum of the last n_pingpongs RTTs (ring buffer); stop once the
    buffer is full and the current RTT exceeds its minimum, or after
    10 * n_pingpongs exchanges. Returns s_time + rtt/2 - tremote of the
    final exchange: the client-minus-server offset."""
    window = cfg.n_pingpongs
    max_iter = 10 * window
    sends, arrivals, replies = _pingpong_times(inst, client, server, max_iter)
    client_times = np.ravel(np.column_stack([sends, replies]))
    client_vals = inst.clocks[client].preview_sequence(client_times)
    server_vals = inst.clocks[server].preview_sequence(arrivals)
    s_time = client_vals[0::2]
    e_time = client_vals[1::2]
    rtt = e_time - s_time

    history: list[float] = []
    k = max_iter - 1
    for i in range(max_iter):
        if len(history) >= window and rtt[i] > min(history[-window:]):
            k = i
            break
        history.append(rtt[i])

    inst.clocks[client].commit(float(replies[k]), float(e_time[k]))
    inst.clocks[server].commit(float(arrivals[k]), float(server_vals[k]))
    inst.now[client] = replies[k]
    inst.now[server] = arrivals[k]
    diff = s_time[k] + rtt[k] / 2.0 - server_vals[k]
    return float(diff)


def netgauge_sync(inst: SimInstance, root: int = 0, cfg: SyncConfig = SyncConfig()) -> SyncOutcome:
    """Tree-structured offset relay in ceil(log2 p) rounds plus one remainder
    round; pairwise offsets combined additively down the tree."""
    if inst.p < 2:
        raise ValueError("need at least 2 ranks")
    if root != 0:
        raise ValueError("the hierarchical schedule assumes root 0")
    p = inst.p
    start = inst.now.copy()
    maxpower = 2 ** int(math.floor(math.log2(p)))
    # carried[r][q] = measured offset of r's clock relative to q's (r minus q),
    # for the ranks q in r's subtree
    carried: list[dict[int, float]] = [dict() for _ in range(p)]

    rounds = int(math.log2(maxpower))
    for k in range(1, rounds + 1):
        half = 2 ** (k - 1)
        for client in range(0, maxpower, 2 ** k):
            server = client + half
            if server >= maxpower:
                continue
            diff = _netgauge_compute_offset(inst, client, server, cfg)
            carried[client][server] = diff
            # server forwards the offsets of its subtree (one control message)
            arrival = inst.now[server] + inst.network.sample(server, client)
            inst.now[client] = max(inst.now[client], arrival)
            for q, sub in sorted(carried[server].items()):
                carried[client][q] = diff + sub

    my_offset = np.zeros(p)  # root clock minus rank clock
    for q, diff in carried[0].items():
        my_offset[q] = diff
    _control_sync(inst, list(range(maxpower)))  # scatter within the power-of-two group

    if maxpower != p:
        for client in range(0, p - maxpower):
            server = client + maxpower
            diff = _netgauge_compute_offset(inst, client, server, cfg)
            my_offset[server] = diff + my_offset[client]
            arrival = inst.now[client] + inst.network.sample(client, server)
            inst.now[server] = max(inst.now[server], arrival)
    _control_sync(inst)

    duration = float(np.max(inst.now - start))
    # view intercept is the rank's own offset versus the root (rank minus root)
    views = [GlobalClockView(r, LinearModel(0.0, -my_offset[r])) for r in range(p)]
    offsets = -my_offset  # rank clock minus root clock
    offsets[root] = 0.0
    return SyncOutcome("netgauge", views, duration, offsets=offsets, root=root)


# -- RTT estimation (shared by JK and HCA) ------------------------------------------


def compute_rtt(inst: SimInstance, p1: int, p2: int, cfg: SyncConfig = SyncConfig()) -> float:
    """Mean round-trip time between p1 and p2, measured at p2 after warmup
    rounds; the sample is Tukey-filtered before averaging."""
    if p1 == p2:
        raise ValueError("RTT requires two distinct ranks")
    _warmup(inst, p2, p1, cfg.warmup_rounds)
    sends, arrivals, replies = _pingpong_times(inst, p2, p1, cfg.n_pingpongs)
    times = np.ravel(np.column_stack([sends, replies]))
    vals = inst.clocks[p2].read_sequence(times)
    inst.clocks[p1].read_sequence(arrivals)  # server stamps its replies
    rtts = vals[1::2] - vals[0::2]
    kept, _ = tukey_filter_values(rtts)
    if kept.size < 2:
        raise RuntimeError("fewer than 2 RTT samples survived outlier filtering")
    return float(np.mean(kept))


# -- drift-model learning (shared by JK and HCA) ------------------------------------


def _fit_stamps(diffs: np.ndarray, xs: np.ndarray, n_fitpts: int, n_exchanges: int):
    """Reduce raw exchange stamps to fitpoints: per group of n_exchanges,
    keep the lower-median offset and that very sample's local timestamp."""
    d = diffs.reshape(n_fitpts, n_exchanges)
    x = xs.reshape(n_fitpts, n_exchanges)
    order = np.argsort(d, axis=1, kind="stable")
    med = order[:, (n_exchanges - 1) // 2]
    rows = np.arange(n_fitpts)
    return x[rows, med], d[rows, med]


def _learn_model(
    inst: SimInstance,
    ref: int,
    client: int,
    cfg: SyncConfig,
    rtt: float,
    origin_ref: float = 0.0,
    origin_client: float = 0.0,
):
    """One contiguous fit phase between a reference and a client: the client
    records n_fitpts medians of n_exchanges RTT/2-corrected offset readings
    and fits offset-versus-local-time by least squares."""
    n = cfg.n_fitpts * cfg.n_exchanges
    _, arrivals, replies = _pingpong_times(inst, client, ref, n)
    tremote = inst.clocks[ref].read_sequence(arrivals) - origin_ref
    local = inst.clocks[client].read_sequence(replies) - origin_client
    diffs = local - tremote - rtt / 2.0
    xfit, yfit = _fit_stamps(diffs, local, cfg.n_fitpts, cfg.n_exchanges)
    return fit_xy(xfit, yfit)


def learn_drift_model(
    inst: SimInstance,
    ref: int,
    client: int,
    cfg: SyncConfig = SyncConfig(),
    origin_ref: float = 0.0,
    origin_client: float = 0.0,
):
    """Directly fit the client's drift model against a reference rank (RTT
    estimation plus one contiguous fit phase). Useful as an oracle for the
    hierarchical merge path."""
    rtt = compute_rtt(inst, ref, client, cfg)
    return _learn_model(inst, ref, client, cfg, rtt, origin_ref=origin_ref, origin_client=origin_client)


# -- JK ------------------------------------------------------------------------------


def jk_sync(inst: SimInstance, root: int = 0, cfg: SyncConfig = SyncConfig()) -> SyncOutcome:
    """Serial drift-model learning against the root (O(p) exchanges): each
    non-root rank's fitpoints interleave across ranks, then least squares."""
    if inst.p < 2:
        raise ValueError("need at least 2 ranks")
    p = inst.p
    start = inst.now.copy()
    others = [r for r in range(p) if r != root]

    rtts = np.zeros(p)
    for r in others:
        rtts[r] = compute_rtt(inst, root, r, cfg)
    _control_sync(inst)  # scatter of the RTT list

    # fitpoint-major interleave: rank r's idx-th block of n_exchanges
    # ping-pongs happens after every other rank's (idx-1)-th block
    remote_times: dict[int, list[np.ndarray]] = {r: [] for r in others}
    local_times: dict[int, list[np.ndarray]] = {r: [] for r in others}
    for _ in range(cfg.n_fitpts):
        for r in others:
            _, arrivals, replies = _pingpong_times(inst, r, root, cfg.n_exchanges)
            remote_times[r].append(arrivals)
            local_times[r].append(replies)

    models: list[LinearModel] = [IDENTITY_MODEL] * p
    intervals: list[ModelInterval] = [ModelInterval(0, 0, 0, 0)] * p
    root_stamp_order = np.argsort(
        np.concatenate([np.concatenate(remote_times[r]) for r in others]), kind="stable"
    )
    all_remote = np.concatenate([np.concatenate(remote_times[r]) for r in others])
    root_vals = np.empty_like(all_remote)
    root_vals[root_stamp_order] = inst.clocks[root].read_sequence(all_remote[root_stamp_order])
    pos = 0
    for r in others:
        n = cfg.n_fitpts * cfg.n_exchanges
        tremote = root_vals[pos : pos + n]
        pos += n
        local = inst.clocks[r].read_sequence(np.concatenate(local_times[r]))
        diffs = local - tremote - rtts[r] / 2.0
        xfit, yfit = _fit_stamps(diffs, local, cfg.n_fitpts, cfg.n_exchanges)
        models[r], intervals[r] = fit_xy(xfit, yfit)
    _control_sync(inst)

    duration = float(np.max(inst.now - start))
    views = [GlobalClockView(r, models[r]) for r in range(p)]
    return SyncOutcome("jk", views, duration, models=models, intervals=intervals, rtts=rtts, root=root)


# -- HCA -----------------------------------------------------------------------------


def _client_offset_to(
    inst: SimInstance, client: int, ref: int, cfg: SyncConfig, origins: np.ndarray
) -> tuple[float, float]:
    """Ping-pong measurement, kept at the client, of the client's own offset
    relative to ref in the adjusted (origin-subtracted) frame both sides use
    during model learning, plus the adjusted client timestamp right after."""
    d_client_side, _ = _skampi_session(inst, client, ref, cfg.n_pingpongs)
    offset = -d_client_side - (origins[client] - origins[ref])
    stamp = inst.clocks[client].read(inst.now[client]) - origins[client]
    return offset, stamp


def _set_intercept(model: LinearModel, offset: float, stamp_adjusted: float) -> LinearModel:
    """Replace a fitted intercept using a directly measured offset at a known
    (adjusted) local time: intercept = slope * (-t) + offset."""
    return LinearModel(model.slope, model.slope * (-stamp_adjusted) + offset)


def hca_sync(inst: SimInstance, root: int = 0, cfg: SyncConfig = SyncConfig()) -> SyncOutcome:
    """Hierarchical drift-model learning in ceil(log2 p) rounds plus one
    remainder round, models chained by merge_lms. Intercepts come either
    from a final O(p) per-rank ping-pong pass (default) or hierarchically
    during the rounds (cfg.hierarchical_intercepts)."""
    if inst.p < 2:
        raise ValueError("need at least 2 ranks")
    if root != 0:
        raise ValueError("the hierarchical schedule assumes root 0")
    p = inst.p
    start = inst.now.copy()
    origins = np.array([inst.clocks[r].read(inst.now[r]) for r in range(p)])
    maxpower = 2 ** int(math.floor(math.log2(p)))

    # carried[r][q] = (model, interval) of q's clock relative to r's
    carried: list[dict[int, tuple[LinearModel, ModelInterval]]] = [dict() for _ in range(p)]

    def learn_pair(ref: int, client: int) -> tuple[LinearModel, ModelInterval]:
        rtt = compute_rtt(inst, ref, client, cfg)
        model, interval = _learn_model(
            inst, ref, client, cfg, rtt, origin_ref=origins[ref], origin_client=origins[client]
        )
        if cfg.hierarchical_intercepts:
            offset, stamp = _client_offset_to(inst, client, ref, cfg, origins)
            model = _set_intercept(model, offset, stamp)
        return model, interval

    rounds = int(math.log2(maxpower))
    for k in range(1, rounds + 1):
        half = 2 ** (k - 1)
        for ref in range(0, maxpower, 2 ** k):
            client = ref + half
            if client >= maxpower:
                continue
            pair = learn_pair(ref, client)
            arrival = inst.now[client] + inst.network.sample(client, ref)
            inst.now[ref] = max(inst.now[ref], arrival)
            carried[ref][client] = pair
            for q, sub in sorted(carried[client].items()):
                carried[ref][q] = (
                    merge_lms(pair[0], sub[0]),
                    merge_model_intervals(pair[1], sub[1]),
                )

    if maxpower != p:
        for ref in range(0, p - maxpower):
            client = ref + maxpower
            pair = learn_pair(ref, client)
            arrival = inst.now[client] + inst.network.sample(client, root if ref == root else ref)
            inst.now[root] = max(inst.now[root], arrival)  # gather at the root
            if ref == root:
                carried[root][client] = pair
            else:
                base = carried[root][ref]
                carried[root][client] = (
                    merge_lms(base[0], pair[0]),
                    merge_model_intervals(base[1], pair[1]),
                )
    _control_sync(inst)  # scatter of the final models

    models: list[LinearModel] = [IDENTITY_MODEL] * p
    intervals: list[ModelInterval] = [ModelInterval(0, 0, 0, 0)] * p
    for q, (m, iv) in carried[root].items():
        models[q], intervals[q] = m, iv
    fit_models = list(models)

    if not cfg.hierarchical_intercepts:
        for r in range(p):
            if r == root:
                continue
            offset, stamp = _client_offset_to(inst, r, root, cfg, origins)
            models[r] = _set_intercept(models[r], offset, stamp)
    _control_sync(inst)

    duration = float(np.max(inst.now - start))
    views = [GlobalClockView(r, models[r], origin=float(origins[r])) for r in range(p)]
    method = "hca2" if cfg.hierarchical_intercepts else "hca"
    return SyncOutcome(
        method, views, duration, models=models, intervals=intervals, fit_models=fit_models, root=root
    )


# -- method registry and offset measurement ------------------------------------------


def run_sync(inst: SimInstance, method: str, root: int = 0, cfg: SyncConfig = SyncConfig()) -> SyncOutcome:
    name = method.lower()
    if name not in VALID_METHODS:
        raise SyncMethodError(method)
    if name == "skampi":
        return skampi_sync(inst, root, cfg)
    if name == "netgauge":
        return netgauge_sync(inst, root, cfg)
    if name == "jk":
        return jk_sync(inst, root, cfg)
    want_hier = name == "hca2"
    if cfg.hierarchical_intercepts != want_hier:
        cfg = SyncConfig(
            n_fitpts=cfg.n_fitpts,
            n_exchanges=cfg.n_exchanges,
            n_pingpongs=cfg.n_pingpongs,
            hierarchical_intercepts=want_hier,
            win_size=cfg.win_size,
            warmup_rounds=cfg.warmup_rounds,
        )
    return hca_sync(inst, root, cfg)


def true_global_clock_error(inst: SimInstance, outcome: SyncOutcome, at_true_time: float) -> np.ndarray:
    """Simulator-only ground truth: per-rank error of the logical global
    clock at a given true time, |view_r(C_r(t)) - view_root(C_root(t))|,
    from noise-free clock readings. Consumes no randomness."""
    root = outcome.root
    ref = outcome.views[root].to_global(float(inst.clocks[root].noiseless_at(at_true_time)))
    errs = np.zeros(inst.p)
    for r in range(inst.p):
        mine = outcome.views[r].to_global(float(inst.clocks[r].noiseless_at(at_true_time)))
        errs[r] = abs(mine - ref)
    return errs


def measure_global_offsets(
    inst: SimInstance,
    outcome: SyncOutcome,
    cfg: SyncConfig = SyncConfig(),
    nsteps: int = 20,
    interval: float = 1.0,
    nrounds: int = 10,
) -> list[tuple[float, int, float]]:
    """Clock-offset-over-time probe: at each epoch the root ping-pongs every
    rank nrounds times and keeps, per rank, the offset estimate of smallest
    magnitude (global time at the rank minus global time at the root).

    Returns (epoch_seconds, rank, offset_seconds) tuples.
    """
    root = outcome.root
    others = [r for r in range(inst.p) if r != root]
    rtts = {r: compute_rtt(inst, root, r, cfg) for r in others}
    root_view = outcome.views[root]
    rows = []
    epoch_origin = inst.now[root]
    for _ in range(nsteps):
        epoch = float(inst.now[root] - epoch_origin)
        for r in others:
            _, arrivals, replies = _pingpong_times(inst, root, r, nrounds)
            remote_global = np.array(
                [outcome.views[r].to_global(v) for v in inst.clocks[r].read_sequence(arrivals)]
            )
            root_global = np.array(
                [root_view.to_global(v) for v in inst.clocks[root].read_sequence(replies)]
            )
            diffs = remote_global - (root_global - rtts[r] / 2.0)
            best = diffs[np.argmin(np.abs(diffs))]
            rows.append((epoch, r, float(best)))
        inst.now[root] += interval
    return rows
