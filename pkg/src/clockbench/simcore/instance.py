"""One simulated mpirun: p drifting clocks on a latency-sampled network.

A SimInstance is fully determined by (cluster spec, seed): all RNG streams are
derived from the seed with fixed stream ids, so identical configurations give
bit-identical traces. Creating a fresh instance re-samples the per-process
clock offsets and a small latency perturbation, which is how distinct calls to
mpirun become an experimental factor; both knobs can be switched off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .clock import LocalClock
from .collective import CollectiveModel, CollectiveRecord, CollectiveSpec
from .dists import DistSpec
from .network import NetworkModel, NetworkSpec

# stream-id namespaces for SeedSequence derivation
_NS_CLOCK = 0
_NS_PAIR = 1
_NS_COLLECTIVE = 2
_NS_INSTANCE = 3
_NS_CLUSTER = 99


@dataclass(frozen=True)
class ClockSpec:
    skews: tuple[float, ...] | None = None  # per-rank; resolved by ClusterSpec.realize
    skew_max: float = 0.7e-5                # draw U(-max, max) per rank when skews is None
    offset_spread: float = 1.0              # per-instance offset0 ~ U(-spread, spread)
    read_noise_sigma: float = 1e-8
    granularity: float = 1e-9


@dataclass(frozen=True)
class ClusterSpec:
    p: int
    clock: ClockSpec = ClockSpec()
    network: NetworkSpec = NetworkSpec()
    collectives: dict = field(default_factory=dict)  # name -> CollectiveSpec
    barrier: CollectiveSpec | None = None            # library MPI_Barrier model

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.clock.skews is not None and len(self.clock.skews) != self.p:
            raise ValueError("per-rank skew list must have length p")

    def realize(self, seed: int) -> "ClusterSpec":
        """Resolve drawn hardware parameters (per-rank skews) once, so that
        every mpirun instance of an experiment sees the same machines."""
        if self.clock.skews is not None:
            return self
        rng = np.random.default_rng(np.random.SeedSequence((seed, _NS_CLUSTER)))
        skews = tuple(float(s) for s in rng.uniform(-self.clock.skew_max, self.clock.skew_max, self.p))
        return replace(self, clock=replace(self.clock, skews=skews))


class SimInstance:
    def __init__(self, cluster: ClusterSpec, seed: int, perturb: bool = True):
        if cluster.clock.skews is None:
            cluster = cluster.realize(seed)
        self.cluster = cluster
        self.seed = int(seed)
        self.p = cluster.p
        self.perturb = perturb

        inst_rng = np.random.default_rng(np.random.SeedSequence((self.seed, _NS_INSTANCE)))
        if perturb:
            offsets = inst_rng.uniform(-cluster.clock.offset_spread, cluster.clock.offset_spread, self.p)
            s = cluster.network.perturb_scale
            self.latency_factor = float(inst_rng.uniform(1.0 - s, 1.0 + s)) if s > 0 else 1.0
        else:
            offsets = np.zeros(self.p)
            self.latency_factor = 1.0

        self.clocks = [
            LocalClock(
                offset0=float(offsets[r]),
                skew=cluster.clock.skews[r],
                read_noise_sigma=cluster.clock.read_noise_sigma,
                granularity=cluster.clock.granularity,
                rng=np.random.default_rng(np.random.SeedSequence((self.seed, _NS_CLOCK, r))),
            )
            for r in range(self.p)
        ]
        self.network = NetworkModel(cluster.network, seed_root=(self.seed, _NS_PAIR), factor=self.latency_factor)
        self.collectives = {
            name: CollectiveModel(
                spec, np.random.default_rng(np.random.SeedSequence((self.seed, _NS_COLLECTIVE, i)))
            )
            for i, (name, spec) in enumerate(sorted(cluster.collectives.items()))
        }
        barrier_spec = cluster.barrier if cluster.barrier is not None else CollectiveSpec(alpha=0.0)
        self.barrier_model = CollectiveModel(
            barrier_spec, np.random.default_rng(np.random.SeedSequence((self.seed, _NS_COLLECTIVE, 10_000)))
        )
        self.now = np.zeros(self.p)
        self.collective_log: list[CollectiveRecord] = []

    # -- primitive operations -------------------------------------------------

    def clock_read(self, rank: int, t: float | None = None) -> float:
        """Read rank's clock; defaults to the rank's current true time."""
        if t is None:
            t = self.now[rank]
        if t < 0.0:
            raise ValueError("cannot read clock at negative true time")
        return self.clocks[rank].read(t)

    def sample_latency(self, src: int, dst: int) -> float:
        return self.network.sample(src, dst)

    def collective_execute(
        self,
        name: str,
        msize: int,
        entries: np.ndarray | None = None,
        duration_scale: float = 1.0,
        label: str | None = None,
    ) -> CollectiveRecord:
        """Run one blocking collective; advances all ranks to their exits."""
        model = self.barrier_model if name == "barrier" else self.collectives[name]
        if entries is None:
            entries = self.now.copy()
        rec = model.execute(
            np.asarray(entries, dtype=float),
            msize,
            latency_factor=self.latency_factor,
            duration_scale=duration_scale,
            label=label if label is not None else name,
        )
        self.now = rec.exits.copy()
        self.collective_log.append(rec)
        return rec

    def advance(self, rank: int, dt: float) -> None:
        if dt < 0:
            raise ValueError("cannot advance by negative time")
        self.now[rank] += dt

    def busy_wait_until_local(self, rank: int, target_local: float, max_polls: int = 1_000_000) -> None:
        """Busy-wait by polling the clock until it reads >= target_local.

        Polls are modelled at one tick quantum apart; the wake-up time is the
        noise-free inversion snapped to that poll grid. Waits longer than
        max_polls ticks jump straight to the inversion point so that event
        counts stay bounded.
        """
        clock = self.clocks[rank]
        t_star = clock.invert(target_local)
        now = self.now[rank]
        if t_star <= now:
            return
        step = clock.granularity
        polls = (t_star - now) / step
        if polls <= max_polls:
            t_star = now + math.ceil(polls) * step
        self.now[rank] = t_star

    def align(self, ranks=None) -> float:
        """Bring ranks to a common true time (rendezvous point); returns it."""
        if ranks is None:
            self.now[:] = self.now.max()
            return float(self.now[0])
        t = max(self.now[r] for r in ranks)
        for r in ranks:
            self.now[r] = t
        return t
