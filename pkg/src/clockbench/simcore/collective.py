"""Synthetic blocking collectives with known ground truth.

Completion of one execution with entry true-times e_1..e_p:

    C = max(e_i) + (alpha * latency_factor + beta * msize * rounds(p) + noise) * scale

Every rank exits at C plus a nonnegative per-rank exit-skew draw; the recorded
ground truth is max(exit) - min(entry). Negative duration-noise draws are
rejected by resampling and the resample count is kept with the record.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dists import DistSpec


def _rounds(rule, p: int) -> int:
    if isinstance(rule, int):
        return max(1, rule)
    if rule in (None, "log2p"):
        return max(1, math.ceil(math.log2(p))) if p > 1 else 1
    if rule == "one":
        return 1
    raise ValueError(f"unknown rounds rule {rule!r}")


@dataclass(frozen=True)
class CollectiveSpec:
    alpha: float = 5e-6
    beta: float = 0.0
    rounds: object = "log2p"  # "log2p" | "one" | int
    duration_noise: DistSpec = DistSpec("none")
    exit_skew: DistSpec = DistSpec("none")
    alpha_scales_with_latency: bool = True

    def __post_init__(self):
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("alpha and beta must be >= 0")
        _rounds(self.rounds, 2)


@dataclass
class CollectiveRecord:
    label: str
    msize: int
    entries: np.ndarray
    exits: np.ndarray
    duration: float            # alpha/beta/noise part, before exit skew
    ground_truth: float        # max(exit) - min(entry)
    resamples: int = 0


class CollectiveModel:
    def __init__(self, spec: CollectiveSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng

    def execute(
        self,
        entries: np.ndarray,
        msize: int,
        latency_factor: float = 1.0,
        duration_scale: float = 1.0,
        label: str = "",
    ) -> CollectiveRecord:
        entries = np.asarray(entries, dtype=float)
        p = entries.size
        spec = self.spec
        alpha = spec.alpha * (latency_factor if spec.alpha_scales_with_latency else 1.0)
        base = alpha + spec.beta * msize * _rounds(spec.rounds, p)
        noise, res_noise = spec.duration_noise.sample_nonnegative(self.rng, 1)
        duration = (base + float(noise[0])) * duration_scale
        completion = float(entries.max()) + duration
        skews, res_skew = spec.exit_skew.sample_exit_skew(self.rng, p)
        exits = completion + skews
        return CollectiveRecord(
            label=label,
            msize=msize,
            entries=entries,
            exits=exits,
            duration=duration,
            ground_truth=float(exits.max() - entries.min()),
            resamples=res_noise + res_skew,
        )
