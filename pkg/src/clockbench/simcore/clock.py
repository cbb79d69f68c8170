"""Drifting, jittery, quantized per-process clocks.

A clock maps simulation ("true") time t to a local reading

    quantize(offset0 + (1 + skew) * t + eps),   eps ~ N(0, sigma^2) clipped to +-4 sigma,

where quantize floors to the tick quantum. Readings are clamped to be
non-decreasing, so repeated reads never go backwards even with read noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Fudge (in tick units) added before flooring so that values a hair below an
# exact tick boundary, due to binary representation of the quantum, land on it.
_TICK_EPS = 1e-4


def quantize(x, granularity: float):
    """Floor x (scalar or array) to a multiple of granularity."""
    return np.floor(x / granularity + _TICK_EPS) * granularity


@dataclass
class LocalClock:
    offset0: float = 0.0
    skew: float = 0.0
    read_noise_sigma: float = 0.0
    granularity: float = 1e-9
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    last_reading: float = -math.inf
    last_t: float = -math.inf

    def __post_init__(self):
        if abs(self.skew) >= 1e-3:
            raise ValueError(f"|skew| must be < 1e-3, got {self.skew}")
        if self.read_noise_sigma < 0.0:
            raise ValueError("read_noise_sigma must be >= 0")
        if self.granularity <= 0.0:
            raise ValueError("granularity must be > 0")

    # -- scalar interface ----------------------------------------------------

    def read(self, t: float) -> float:
        """Read the clock at true time t (commits monotonicity state)."""
        return float(self.read_sequence(np.asarray([t]))[0])

    def read_sequence(self, times: np.ndarray) -> np.ndarray:
        """Read the clock at a non-decreasing array of true times."""
        values = self.preview_sequence(times)
        self.commit(float(times[-1]), float(values[-1]))
        return values

    def preview_sequence(self, times: np.ndarray) -> np.ndarray:
        """Compute readings without committing monotonicity state.

        The RNG is still consumed (one normal variate per reading), so draw
        counts stay deterministic whether or not a preview is committed.
        """
        times = np.asarray(times, dtype=float)
        if times.size == 0:
            return times.copy()
        if float(times[0]) < 0.0:
            raise ValueError("clock read at negative true time")
        if float(times[0]) < self.last_t - 1e-12:
            raise ValueError("clock read at true time earlier than a previous read")
        if np.any(np.diff(times) < -1e-15):
            raise ValueError("clock read times must be non-decreasing")
        raw = self.offset0 + (1.0 + self.skew) * times
        eps = self.rng.normal(0.0, self.read_noise_sigma, times.size)
        if self.read_noise_sigma > 0.0:
            bound = 4.0 * self.read_noise_sigma
            np.clip(eps, -bound, bound, out=eps)
            raw = raw + eps
        vals = quantize(raw, self.granularity)
        np.maximum.accumulate(vals, out=vals)
        if self.last_reading > -math.inf:
            np.maximum(vals, self.last_reading, out=vals)
        return vals

    def commit(self, t: float, reading: float) -> None:
        self.last_t = max(self.last_t, t)
        self.last_reading = max(self.last_reading, reading)

    # -- inversion (busy-wait support) ---------------------------------------

    def noiseless_at(self, t) -> np.ndarray:
        return quantize(self.offset0 + (1.0 + self.skew) * np.asarray(t, dtype=float), self.granularity)

    def invert(self, target_local: float) -> float:
        """Smallest true time whose noise-free reading is >= target_local."""
        t = (target_local - self.offset0) / (1.0 + self.skew)
        t = max(t, 0.0)
        # quantization may floor the reading just below the target
        step = self.granularity / (1.0 + self.skew)
        for _ in range(4):
            if self.noiseless_at(t) >= target_local - 1e-18:
                return t
            t += step
        return t
