"""Nonparametric survival estimation and model scoring.

All estimators accept left-truncated, right-censored observations over
integer day grids: a subject is at risk at event time t when
``entry < t <= exit``.  Ties between events and censorings on the same day
follow the usual convention that events happen first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

Z95 = 1.959963984540054


class BrierError(Exception):
    pass


@dataclass(frozen=True)
class SurvivalObservation:
    entry_day: int
    exit_day: int
    event: bool

    def __post_init__(self):
        if not self.entry_day < self.exit_day:
            raise ValueError(f"entry_day must precede exit_day ({self.entry_day} >= {self.exit_day})")
        if self.entry_day < 0:
            raise ValueError("entry_day must be non-negative")


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function: value(t) = values[last i: times[i] <= t]."""

    times: np.ndarray
    values: np.ndarray
    baseline: float  # value before the first step

    def evaluate(self, t) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.r_[self.baseline, self.values]
        return padded[idx]

    def evaluate_left(self, t) -> np.ndarray:
        """Left limit: value just before t."""
        idx = np.searchsorted(self.times, t, side="left")
        padded = np.r_[self.baseline, self.values]
        return padded[idx]

    def __call__(self, t):
        return self.evaluate(t)


@dataclass(frozen=True)
class SurvivalCurve:
    """Step survival estimate over days, optionally with a 95% band."""

    times: np.ndarray
    survival: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def evaluate(self, t) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.r_[1.0, self.survival]
        return padded[idx]

    def __call__(self, t):
        return self.evaluate(t)


def _risk_table(obs: Sequence[SurvivalObservation]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct event times with event counts and LTRC at-risk counts."""
    entry = np.array([o.entry_day for o in obs], dtype=np.int64)
    exit_ = np.array([o.exit_day for o in obs], dtype=np.int64)
    event = np.array([o.event for o in obs], dtype=bool)
    times = np.unique(exit_[event])
    d = np.zeros(times.size, dtype=np.int64)
    n = np.zeros(times.size, dtype=np.int64)
    for i, t in enumerate(times):
        d[i] = int(np.sum(event & (exit_ == t)))
        n[i] = int(np.sum((entry < t) & (t <= exit_)))
    return times, d, n


def kaplan_meier(obs: Sequence[SurvivalObservation], conf_band: bool = True) -> SurvivalCurve:
    """Product-limit estimator with a log-transformed Greenwood 95% band."""
    if not obs:
        raise ValueError("need at least one observation")
    times, d, n = _risk_table(obs)
    if times.size == 0:
        return SurvivalCurve(
            times=np.empty(0, dtype=np.int64),
            survival=np.empty(0),
            lower=np.empty(0) if conf_band else None,
            upper=np.empty(0) if conf_band else None,
        )
    surv = np.cumprod((n - d) / n)
    lower = upper = None
    if conf_band:
        with np.errstate(divide="ignore", invalid="ignore"):
            incr = np.where(n > d, d / (n * (n - d)), np.inf)
            se_log = np.sqrt(np.cumsum(incr))
            lower = np.where(surv > 0, surv * np.exp(-Z95 * se_log), 0.0)
            upper = np.where(surv > 0, np.minimum(surv * np.exp(Z95 * se_log), 1.0), 0.0)
        lower = np.nan_to_num(lower, nan=0.0)
    return SurvivalCurve(times=times, survival=surv, lower=lower, upper=upper)


def nelson_aalen(obs: Sequence[SurvivalObservation]) -> StepFunction:
    """Cumulative hazard H(t) = sum d_i / n_i over event times up to t."""
    if not obs:
        raise ValueError("need at least one observation")
    times, d, n = _risk_table(obs)
    return StepFunction(times=times, values=np.cumsum(d / n), baseline=0.0)


def median_survival(curve: SurvivalCurve) -> Optional[int]:
    """Smallest t with S(t) <= 0.5, or None when the curve never reaches it."""
    below = np.flatnonzero(curve.survival <= 0.5)
    if below.size == 0:
        return None
    return int(curve.times[below[0]])


def censoring_survival(obs: Sequence[SurvivalObservation]) -> StepFunction:
    """KM of the censoring distribution (events and censorings swapped).

    With events-before-censorings tie handling, the risk set for a censoring
    at t keeps subjects whose event also falls at t.
    """
    entry = np.array([o.entry_day for o in obs], dtype=np.int64)
    exit_ = np.array([o.exit_day for o in obs], dtype=np.int64)
    event = np.array([o.event for o in obs], dtype=bool)
    times = np.unique(exit_[~event])
    g = np.ones(times.size)
    s = 1.0
    for i, t in enumerate(times):
        c = int(np.sum(~event & (exit_ == t)))
        n = int(np.sum((entry < t) & (t <= exit_) & ~(event & (exit_ == t))))
        if n > 0:
            s *= 1.0 - c / n
        g[i] = s
    return StepFunction(times=times, values=g, baseline=1.0)


def brier_score(
    predicted: Sequence[SurvivalCurve],
    obs: Sequence[SurvivalObservation],
    t: Union[int, float],
    censor_curve: Optional[StepFunction] = None,
) -> float:
    """IPCW-weighted Brier score at time t (Graf estimator).

    Subjects with an observed event by t contribute S_hat(t)^2 weighted by
    1/G(exit-); subjects still under observation past t contribute
    (1 - S_hat(t))^2 weighted by 1/G(t); subjects censored by t contribute 0.
    """
    if len(predicted) != len(obs):
        raise ValueError("one prediction per observation required")
    if censor_curve is None:
        censor_curve = censoring_survival(obs)
    g_at_t = float(censor_curve.evaluate(t))
    total = 0.0
    for curve, o in zip(predicted, obs):
        s_hat = float(curve.evaluate(t))
        if o.event and o.exit_day <= t:
            g = float(censor_curve.evaluate_left(o.exit_day))
            if g <= 0:
                raise BrierError(f"censoring survival vanishes before t={o.exit_day}")
            total += (s_hat ** 2) / g
        elif o.exit_day > t:
            if g_at_t <= 0:
                raise BrierError(f"censoring survival vanishes at t={t}")
            total += ((1.0 - s_hat) ** 2) / g_at_t
        # censored with exit <= t: contributes 0
    return total / len(obs)


def integrated_brier_score(bs_values: Sequence[float], grid: Sequence[float]) -> float:
    """Trapezoidal time-average of BS(t) over the grid."""
    grid = np.asarray(grid, dtype=float)
    bs_values = np.asarray(bs_values, dtype=float)
    if grid.size != bs_values.size or grid.size < 2:
        raise ValueError("grid and BS values must align with length >= 2")
    span = grid[-1] - grid[0]
    if span <= 0:
        raise ValueError("grid must be strictly increasing")
    return float(np.trapezoid(bs_values, grid) / span)


def default_ibs_grid(obs: Sequence[SurvivalObservation], percentile: float = 95.0) -> np.ndarray:
    """Distinct exit days up to the given percentile of observed exits.

    The tail is excluded because the censoring KM degenerates there.
    """
    exits = np.array([o.exit_day for o in obs], dtype=np.int64)
    t_max = np.percentile(exits, percentile)
    grid = np.unique(exits[exits <= t_max]).astype(float)
    if grid.size < 2:
        grid = np.unique(exits).astype(float)[:2]
    if grid[0] > 0:
        grid = np.r_[0.0, grid]
    return grid


def evaluate_ibs(
    predicted: Sequence[SurvivalCurve],
    obs: Sequence[SurvivalObservation],
    grid: Optional[Sequence[float]] = None,
) -> float:
    """IBS of per-subject predictions over the default (or given) grid."""
    if grid is None:
        grid = default_ibs_grid(obs)
    censor_curve = censoring_survival(obs)
    bs = [brier_score(predicted, obs, t, censor_curve) for t in grid]
    return integrated_brier_score(bs, grid)
