"""Empirical CDFs over engagement metrics and the probability indicator.

The indicator of a metric value is the empirical probability of observing
that value or less, relative to a reference set chosen per mode:

* ``endo`` - the user's own strictly-prior observations;
* ``exo``  - the full history of the user's group;
* ``snp``  - the group's values on exactly one day.

For the days-between-logins metric, reference samples are completed gaps
(login to next login); the current open-ended gap is only ever the query.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Optional, Sequence

import numpy as np

from .panel import CohortPanel

GAP_METRIC = "days_between_logins"
DEFAULT_GAP_CUTOFF = 200.0
MODES = ("endo", "exo", "snp")


class InsufficientHistoryError(Exception):
    """The requested mode has an empty reference set."""

    def __init__(self, mode: str, detail: str = ""):
        self.mode = mode
        super().__init__(f"insufficient history for mode {mode!r}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF: F(x) = #{samples <= x} / N."""

    values: np.ndarray  # sorted, ascending
    cutoff: Optional[float] = None
    provenance: str = ""

    @property
    def n(self) -> int:
        return len(self.values)

    def evaluate(self, x) -> np.ndarray:
        return np.searchsorted(self.values, x, side="right") / self.n

    def __call__(self, x):
        return self.evaluate(x)

    def steps(self):
        """(value, F(value)) pairs at the distinct sample points, for export."""
        uniq = np.unique(self.values)
        return uniq, self.evaluate(uniq)


def build_ecdf(samples: Sequence[float], cutoff: Optional[float] = None, provenance: str = "") -> Ecdf:
    """Build an ECDF, discarding samples above the cutoff when one is set."""
    arr = np.asarray(samples, dtype=float)
    if cutoff is not None:
        arr = arr[arr <= cutoff]
    if arr.size == 0:
        raise InsufficientHistoryError(provenance or "ecdf", "no samples remain after cutoff")
    return Ecdf(values=np.sort(arr), cutoff=cutoff, provenance=provenance)


@dataclass(frozen=True)
class EcdfIndicator:
    user_id: str
    day: date
    metric_id: str
    mode: str
    value: float


def _group_users(panel: CohortPanel, user_id: str) -> list:
    group = panel.groups.get(user_id)
    return [u for u in panel.users if panel.groups.get(u) == group]


def _gap_samples_endo(panel: CohortPanel, user_id: str, day_off: int) -> np.ndarray:
    """Completed gaps of the user whose closing login lies strictly before day."""
    offs = panel.login_offsets(user_id)
    offs = offs[offs < day_off]
    return np.diff(offs)


def _gap_samples_user_upto(panel: CohortPanel, user_id: str, day: date) -> np.ndarray:
    """Completed gaps of a user closing on or before a calendar day."""
    offs = panel.login_offsets(user_id)
    try:
        limit = panel.day_index(user_id, day)
    except Exception:
        limit = -1 if day < panel.first_login_day(user_id) else panel.observation_days(user_id)
    offs = offs[offs <= limit]
    return np.diff(offs)


def reference_samples(
    panel: CohortPanel,
    user_id: str,
    day: date,
    metric_id: str,
    mode: str,
    cutoff: Optional[float] = DEFAULT_GAP_CUTOFF,
) -> np.ndarray:
    """The raw reference sample for one (user, day, metric, mode) indicator."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    is_gap = metric_id == GAP_METRIC
    if mode == "endo":
        day_off = panel.day_index(user_id, day)
        if is_gap:
            return _gap_samples_endo(panel, user_id, day_off)
        return panel.user_values(user_id, metric_id)[:day_off]
    if mode == "exo":
        parts = []
        for u in _group_users(panel, user_id):
            if is_gap:
                parts.append(_gap_samples_user_upto(panel, u, day))
            else:
                try:
                    limit = panel.day_index(u, day)
                    parts.append(panel.user_values(u, metric_id)[: limit + 1])
                except Exception:
                    if day >= panel.first_login_day(u):
                        parts.append(panel.user_values(u, metric_id))
        samples = np.concatenate(parts) if parts else np.empty(0)
        if is_gap and cutoff is not None:
            samples = samples[samples <= cutoff]
        return samples
    # snapshot: the group's value of the metric on exactly that day
    snap_metric = "days_since_last_login" if is_gap else metric_id
    vals = []
    for u in _group_users(panel, user_id):
        try:
            idx = panel.day_index(u, day)
        except Exception:
            continue
        vals.append(panel.user_values(u, snap_metric)[idx])
    samples = np.asarray(vals, dtype=float)
    if is_gap and cutoff is not None:
        samples = samples[samples <= cutoff]
    return samples


def query_value(panel: CohortPanel, user_id: str, day: date, metric_id: str) -> float:
    if metric_id == GAP_METRIC:
        return float(panel.value(user_id, day, "days_since_last_login"))
    return float(panel.value(user_id, day, metric_id))


def indicator(
    panel: CohortPanel,
    user_id: str,
    day: date,
    metric_id: str = GAP_METRIC,
    mode: str = "endo",
    cutoff: Optional[float] = DEFAULT_GAP_CUTOFF,
) -> EcdfIndicator:
    """Evaluate the ECDF indicator for one user, day and metric."""
    samples = reference_samples(panel, user_id, day, metric_id, mode, cutoff)
    if len(samples) == 0:
        raise InsufficientHistoryError(mode, f"user={user_id} day={day} metric={metric_id}")
    ecdf = Ecdf(values=np.sort(np.asarray(samples, dtype=float)), cutoff=cutoff, provenance=mode)
    value = float(ecdf.evaluate(query_value(panel, user_id, day, metric_id)))
    return EcdfIndicator(user_id=user_id, day=day, metric_id=metric_id, mode=mode, value=value)


def equivalent_churn_definition(ecdf: Ecdf, q: float = 0.9) -> int:
    """Smallest integer gap z with F(z) >= q (a per-reference churn horizon)."""
    if not (0 < q < 1):
        raise ValueError("q must lie in (0, 1)")
    # need at least ceil(q * N) samples <= z
    need = int(np.ceil(q * ecdf.n - 1e-12))
    need = max(need, 1)
    zstar = ecdf.values[need - 1]
    return int(np.ceil(zstar - 1e-12))


def churn_risk_flag(indicator_value: float, direction: str = "high_is_bad", q: float = 0.9) -> bool:
    """Threshold an indicator into a churn-risk flag (strict inequality)."""
    if not (0 < q < 1):
        raise ValueError("q must lie in (0, 1)")
    if direction == "high_is_bad":
        return indicator_value > q
    if direction == "low_is_bad":
        return indicator_value < 1.0 - q
    raise ValueError(f"unknown direction {direction!r}")
