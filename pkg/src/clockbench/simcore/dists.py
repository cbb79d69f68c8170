"""Distribution specifications used by the simulator knobs.

A spec is a small declarative object (kind + parameters) so that it can be
written in a config file, validated once, and sampled reproducibly from a
caller-supplied RNG.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_KINDS = {
    "none",
    "deterministic",
    "normal",
    "exponential",
    "lognormal",
    "mixture",
    "rank_linear",
}


@dataclass(frozen=True)
class DistSpec:
    """Declarative distribution: one of

    - none:                always 0
    - deterministic:       always `value`
    - normal:              Normal(mu, sigma)
    - exponential:         Exponential with mean `mean`
    - lognormal:           Lognormal(mu, sigma) of the underlying normal
    - mixture:             weighted mix of component DistSpecs
    - rank_linear:         per-rank ramp 0..`max_delay` plus Normal(0, sigma)
                           jitter (exit-skew use only)
    """

    kind: str = "none"
    value: float = 0.0
    mu: float = 0.0
    sigma: float = 0.0
    mean: float = 0.0
    max_delay: float = 0.0
    weights: tuple[float, ...] = ()
    components: tuple["DistSpec", ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}; expected one of {sorted(_KINDS)}")
        if self.kind == "mixture":
            if len(self.weights) != len(self.components) or not self.components:
                raise ValueError("mixture needs matching, nonempty weights and components")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValueError("mixture weights must sum to 1")

    @property
    def is_zero(self) -> bool:
        return self.kind == "none" or (self.kind == "deterministic" and self.value == 0.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n values. Always consumes the same number of RNG variates for
        a given (kind, n) so that draw sequences stay reproducible."""
        if self.kind == "none":
            return np.zeros(n)
        if self.kind == "deterministic":
            return np.full(n, self.value)
        if self.kind == "normal":
            return rng.normal(self.mu, self.sigma, n)
        if self.kind == "exponential":
            if self.mean == 0.0:
                return np.zeros(n)
            return rng.exponential(self.mean, n)
        if self.kind == "lognormal":
            return rng.lognormal(self.mu, self.sigma, n)
        if self.kind == "mixture":
            idx = rng.choice(len(self.components), size=n, p=np.asarray(self.weights))
            draws = np.stack([c.sample(rng, n) for c in self.components])
            return draws[idx, np.arange(n)]
        raise ValueError(f"{self.kind} cannot be sampled without rank context")

    def sample_one(self, rng: np.random.Generator) -> float:
        return float(self.sample(rng, 1)[0])

    def sample_nonnegative(self, rng: np.random.Generator, n: int, max_resample: int = 1000) -> tuple[np.ndarray, int]:
        """Draw n values >= 0, rejecting negative draws by resampling.

        Returns (values, number of resampled draws).
        """
        vals = self.sample(rng, n)
        resamples = 0
        bad = vals < 0.0
        while bad.any():
            k = int(bad.sum())
            resamples += k
            if resamples > max_resample * max(n, 1):
                raise RuntimeError("distribution produced persistently negative draws")
            vals[bad] = self.sample(rng, k)
            bad = vals < 0.0
        return vals, resamples

    def sample_exit_skew(self, rng: np.random.Generator, p: int) -> tuple[np.ndarray, int]:
        """Per-rank nonnegative exit delays (rank_linear gets the ramp)."""
        if self.kind == "rank_linear":
            ramp = np.zeros(p) if p == 1 else self.max_delay * np.arange(p) / (p - 1)
            if self.sigma > 0.0:
                noise, res = DistSpec("normal", sigma=self.sigma).sample_nonnegative(rng, p)
                return ramp + noise, res
            return ramp, 0
        return self.sample_nonnegative(rng, p)


def dist_from_config(obj) -> DistSpec:
    """Parse a config fragment (mapping, number, or None) into a DistSpec."""
    if obj is None:
        return DistSpec("none")
    if isinstance(obj, (int, float)):
        return DistSpec("deterministic", value=float(obj))
    if not isinstance(obj, dict):
        raise ValueError(f"cannot parse distribution from {obj!r}")
    kw = dict(obj)
    kind = kw.pop("kind", None)
    if kind is None:
        raise ValueError(f"distribution mapping needs a 'kind' key: {obj!r}")
    if kind == "mixture":
        comps = tuple(dist_from_config(c) for c in kw.pop("components", []))
        weights = tuple(float(w) for w in kw.pop("weights", []))
        return DistSpec("mixture", weights=weights, components=comps, **kw)
    return DistSpec(kind, **{k: float(v) for k, v in kw.items()})
