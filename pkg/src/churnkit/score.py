"""Harmonic-mean engagement scores over min-max-scaled metric components.

The daily score combines several engagement metrics, each scaled to [0, 1]
against a reference set (the user's own past, the group's history, or a
one-day snapshot), via the harmonic mean.  A single zero component pins the
score at zero, so it always vanishes on days without activity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import List, Optional, Sequence

import numpy as np

from .ecdf import reference_samples
from .panel import CohortPanel

DEFAULT_COMPONENTS = [
    "weekly_loyalty_index",
    "video_view_count",
    "video_watch_time_s",
    "action_count",
    "progression",
    "elearning_connection_time_s",
]


@dataclass(frozen=True)
class ScoreSpec:
    components: Sequence[str] = field(default_factory=lambda: tuple(DEFAULT_COMPONENTS))
    scaling_mode: str = "endo"

    def __post_init__(self):
        if not self.components:
            raise ValueError("components must be non-empty")
        if len(set(self.components)) != len(self.components):
            raise ValueError("duplicate component metric ids")
        if self.scaling_mode not in ("endo", "exo", "snp"):
            raise ValueError(f"unknown scaling mode {self.scaling_mode!r}")


@dataclass(frozen=True)
class EngagementScore:
    user_id: str
    day: date
    value: float
    component_scaled_values: tuple


def minmax_scale(value: float, reference: Sequence[float]) -> float:
    """(value - min) / (max - min) against the reference, clamped to [0, 1].

    Degenerate references (max == min) map the value to 1.0 when it reaches
    the constant level and is positive, else 0.0.
    """
    ref = np.asarray(reference, dtype=float)
    if ref.size == 0:
        raise ValueError("reference must be non-empty")
    lo = float(ref.min())
    hi = float(ref.max())
    if hi == lo:
        return 1.0 if (value >= lo and value > 0) else 0.0
    return float(np.clip((value - lo) / (hi - lo), 0.0, 1.0))


def harmonic_score(scaled: Sequence[float]) -> float:
    """n / sum(1/z_j); exactly 0 whenever any component is 0."""
    if len(scaled) == 0:
        raise ValueError("empty component list")
    arr = np.asarray(scaled, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("scaled components must lie in [0, 1]")
    if np.any(arr == 0.0):
        return 0.0
    with np.errstate(over="ignore"):  # subnormal components overflow to s=0
        return float(len(arr) / np.sum(1.0 / arr))


def score_series(
    panel: CohortPanel,
    spec: ScoreSpec,
    user_id: str,
    day_range: Optional[Sequence[date]] = None,
) -> List[EngagementScore]:
    """Daily engagement scores for one user over a range of days."""
    for metric in spec.components:
        if metric not in panel.frame.columns:
            raise ValueError(f"unknown metric id {metric!r}")
    if day_range is None:
        first = panel.first_login_day(user_id)
        day_range = [first + timedelta(days=i) for i in range(panel.observation_days(user_id) + 1)]
    out = []
    for day in day_range:
        idx = panel.day_index(user_id, day)
        scaled = []
        for metric in spec.components:
            value = float(panel.user_values(user_id, metric)[idx])
            ref = reference_samples(panel, user_id, day, metric, spec.scaling_mode, cutoff=None)
            if len(ref) == 0:
                # no history yet: treat like a degenerate reference at zero
                scaled.append(1.0 if value > 0 else 0.0)
            else:
                scaled.append(minmax_scale(value, ref))
        out.append(
            EngagementScore(
                user_id=user_id, day=day, value=harmonic_score(scaled), component_scaled_values=tuple(scaled)
            )
        )
    return out
