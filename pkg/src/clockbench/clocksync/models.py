"""Linear clock-drift models: fitting, merging, and interval propagation.

A model (slope, intercept) maps a process's local time x to its estimated
offset from the reference clock, offset(x) = slope * x + intercept, so the
local-to-reference normalization is x - offset(x).

Merging: if lm1 relates process b to reference a, and lm2 relates process c
to b, the chained model of c relative to a is

    slope     = s1 + s2 - s1 * s2
    intercept = i1 + i2 - i2 * s1

(i.e. the second model's intercept is corrected by the first slope). The
interval form propagates 95% confidence bounds through the same expression
with min/max over the bound products, so the merged interval contains every
corner combination of the inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class LinearModel:
    slope: float
    intercept: float

    def __post_init__(self):
        if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
            raise ValueError("linear model must be finite")
        if abs(self.slope) >= 1.0:
            raise ValueError("|slope| must be < 1 for merging to be well-conditioned")


IDENTITY_MODEL = LinearModel(0.0, 0.0)


@dataclass(frozen=True)
class ModelInterval:
    slope_lo: float
    slope_hi: float
    intercept_lo: float
    intercept_hi: float

    def __post_init__(self):
        if self.slope_lo > self.slope_hi or self.intercept_lo > self.intercept_hi:
            raise ValueError("interval bounds must satisfy lo <= hi")

    def contains(self, lm: LinearModel, tol: float = 0.0) -> bool:
        return (
            self.slope_lo - tol <= lm.slope <= self.slope_hi + tol
            and self.intercept_lo - tol <= lm.intercept <= self.intercept_hi + tol
        )

    def corners(self) -> list[LinearModel]:
        return [
            LinearModel(s, i)
            for s in (self.slope_lo, self.slope_hi)
            for i in (self.intercept_lo, self.intercept_hi)
        ]


@dataclass(frozen=True)
class FitPoint:
    x: float  # local-time coordinate
    y: float  # measured clock offset

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("fit points must be finite")


def fit_xy(x: np.ndarray, y: np.ndarray, level: float = 0.95) -> tuple[LinearModel, ModelInterval]:
    """Ordinary least squares of y on x with confidence bands on both
    coefficients from the standard regression error formulas."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2:
        raise DegenerateFitError("need at least 2 points")
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx <= 0.0 or not np.isfinite(sxx):
        raise DegenerateFitError("all x values are equal; cannot fit a slope")
    slope = float(dx @ (y - ym)) / sxx
    intercept = ym - slope * xm
    if n > 2:
        resid = y - (slope * x + intercept)
        s2 = float(resid @ resid) / (n - 2)
        tq = float(_st.t.ppf(0.5 + level / 2.0, n - 2))
        se_slope = math.sqrt(s2 / sxx)
        se_intercept = math.sqrt(s2 * (1.0 / n + xm * xm / sxx))
    else:
        tq = 0.0
        se_slope = se_intercept = 0.0
    interval = ModelInterval(
        slope - tq * se_slope,
        slope + tq * se_slope,
        intercept - tq * se_intercept,
        intercept + tq * se_intercept,
    )
    return LinearModel(slope, intercept), interval


def linear_fit(points, level: float = 0.95) -> tuple[LinearModel, ModelInterval]:
    """OLS fit of a list of FitPoints (or (x, y) pairs)."""
    pts = [(p.x, p.y) if isinstance(p, FitPoint) else (float(p[0]), float(p[1])) for p in points]
    if len(pts) < 2:
        raise DegenerateFitError("need at least 2 points")
    arr = np.asarray(pts)
    return fit_xy(arr[:, 0], arr[:, 1], level=level)


def merge_lms(lm1: LinearModel, lm2: LinearModel) -> LinearModel:
    """Chain lm2 (farther from the reference) onto lm1 (closer)."""
    intercept = lm1.intercept + lm2.intercept - lm2.intercept * lm1.slope
    slope = lm1.slope + lm2.slope - lm1.slope * lm2.slope
    return LinearModel(slope, intercept)


def merge_model_intervals(a: ModelInterval, b: ModelInterval) -> ModelInterval:
    """Interval form of merge_lms: bound products are taken with min/max so
    the result contains the merge of every corner pair of a and b."""
    s_products = [
        sa * sb
        for sa in (a.slope_lo, a.slope_hi)
        for sb in (b.slope_lo, b.slope_hi)
    ]
    # intercept expression is i_a + i_b - i_b * s_a
    i_products = [
        ib * sa
        for ib in (b.intercept_lo, b.intercept_hi)
        for sa in (a.slope_lo, a.slope_hi)
    ]
    return ModelInterval(
        a.slope_lo + b.slope_lo - max(s_products),
        a.slope_hi + b.slope_hi - min(s_products),
        a.intercept_lo + b.intercept_lo - max(i_products),
        a.intercept_hi + b.intercept_hi - min(i_products),
    )


def normalize_time(lm: LinearModel, t_local: float):
    """Map a local timestamp to the reference clock: t - (t * slope + intercept)."""
    return t_local - (t_local * lm.slope + lm.intercept)


def denormalize_time(lm: LinearModel, t_ref: float) -> float:
    """Inverse of normalize_time: the local timestamp whose normalization is t_ref."""
    return (t_ref + lm.intercept) / (1.0 - lm.slope)
