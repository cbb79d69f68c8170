"""Point-to-point latency model.

One-way latency for a message src -> dst is

    (base + dir * asymmetry) * instance_factor + jitter_draw,

with dir = +1 when src < dst ("forward") and -1 otherwise, jitter >= 0 drawn
from the configured spec, and instance_factor a per-mpirun perturbation knob.
Each unordered rank pair has its own RNG stream, so concurrent sessions on
disjoint pairs draw identical sequences regardless of scheduling order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dists import DistSpec


@dataclass(frozen=True)
class NetworkSpec:
    base_latency: float = 2e-6
    asymmetry: float = 0.0
    jitter: DistSpec = DistSpec("none")
    perturb_scale: float = 0.03  # instance factor drawn from U(1-s, 1+s)

    def __post_init__(self):
        if self.base_latency - abs(self.asymmetry) <= 0.0:
            raise ValueError("base_latency - |asymmetry| must stay positive")
        if not (0.0 <= self.perturb_scale < 1.0):
            raise ValueError("perturb_scale must be in [0, 1)")


class NetworkModel:
    def __init__(self, spec: NetworkSpec, seed_root: tuple, factor: float = 1.0):
        self.spec = spec
        self.factor = factor
        self._seed_root = seed_root
        self._channels: dict[tuple[int, int], np.random.Generator] = {}

    def channel_rng(self, a: int, b: int) -> np.random.Generator:
        key = (min(a, b), max(a, b))
        rng = self._channels.get(key)
        if rng is None:
            rng = np.random.default_rng(np.random.SeedSequence(self._seed_root + key))
            self._channels[key] = rng
        return rng

    def base_one_way(self, src: int, dst: int) -> float:
        if src == dst:
            raise ValueError(f"latency requested for src == dst == {src}")
        direction = 1.0 if src < dst else -1.0
        return (self.spec.base_latency + direction * self.spec.asymmetry) * self.factor

    def sample_many(self, src: int, dst: int, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        base = self.base_one_way(src, dst)
        if self.spec.jitter.is_zero:
            return np.full(n, base)
        if rng is None:
            rng = self.channel_rng(src, dst)
        jit = self.spec.jitter.sample(rng, n)
        if np.any(jit < 0.0):
            raise ValueError("latency jitter distribution produced negative draws")
        return base + jit

    def sample(self, src: int, dst: int, rng: np.random.Generator | None = None) -> float:
        return float(self.sample_many(src, dst, 1, rng)[0])
