"""Returning-churners-and-missed-metrics churn definitions.

A user is deemed churned once a login gap (or the terminal gap to the panel
end) exceeds the inactivity horizon k.  Sweeping k over a grid yields the
fraction of flagged users who later returned and the fraction of each metric
accrued after the first flag day; the chosen churn definition is the
smallest k keeping both below their thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Dict, List, Optional, Sequence

import numpy as np

from .panel import CohortPanel

DEFAULT_MISSED_METRICS = ["connection_time_s", "action_count", "progression"]
DEFAULT_K_GRID = list(range(1, 121))


class NoChurnDefinitionError(Exception):
    """No k on the grid satisfies the thresholds."""

    def __init__(self, best_returning: float, best_missed: Dict[str, float]):
        self.best_returning = best_returning
        self.best_missed = best_missed
        super().__init__(
            f"no horizon satisfies the thresholds; best achievable "
            f"returning={best_returning:.4f} missed={best_missed}"
        )


@dataclass(frozen=True)
class ChurnEpisode:
    user_id: str
    flag_offset: int  # day offset (since first login) when churn is flagged
    gap_start_offset: int  # last login before the gap
    returned: bool


@dataclass(frozen=True)
class ChurnDefinition:
    k_days: int
    method: str  # rcmm | ecdf_exo | ecdf_snp | ecdf_endo
    returning_max: Optional[float] = None
    missed_max: Optional[float] = None
    quantile: Optional[float] = None
    group: Optional[str] = None
    as_of: Optional[date] = None

    def __post_init__(self):
        if self.k_days < 1:
            raise ValueError("k_days must be >= 1")
        if self.method == "rcmm":
            if self.returning_max is None or self.missed_max is None:
                raise ValueError("rcmm definitions require both thresholds")
        elif self.quantile is None:
            raise ValueError("ecdf definitions require a quantile")


@dataclass
class RcmmCurve:
    k_grid: np.ndarray
    returning_fraction: np.ndarray
    missed_fraction: Dict[str, np.ndarray]
    group: Optional[str] = None

    def validate_monotone(self, atol: float = 1e-12) -> bool:
        ok = bool(np.all(np.diff(self.returning_fraction) <= atol))
        for arr in self.missed_fraction.values():
            ok = ok and bool(np.all(np.diff(arr) <= atol))
        return ok


def churn_flags(panel: CohortPanel, k: int, user_id: Optional[str] = None) -> Dict[str, List[ChurnEpisode]]:
    """Per-user churn episodes at horizon k.

    A gap between consecutive login days (or from the last login to the
    panel end) triggers an episode when it is strictly greater than k days;
    the episode is flagged k days after the gap's starting login.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    users = [user_id] if user_id is not None else panel.users
    out: Dict[str, List[ChurnEpisode]] = {}
    for uid in users:
        offs = panel.login_offsets(uid)
        horizon = panel.observation_days(uid)
        episodes = []
        for prev, nxt in zip(offs[:-1], offs[1:]):
            if nxt - prev > k:
                episodes.append(ChurnEpisode(uid, int(prev) + k, int(prev), True))
        if horizon - offs[-1] > k:
            episodes.append(ChurnEpisode(uid, int(offs[-1]) + k, int(offs[-1]), False))
        out[uid] = episodes
    return out


def _first_flag_arrays(panel: CohortPanel, users: Sequence[str]):
    """Per-user gap structure: internal gaps, terminal gap, login offsets."""
    gaps = []
    for uid in users:
        offs = panel.login_offsets(uid)
        gaps.append((offs, panel.observation_days(uid) - offs[-1]))
    return gaps


def rcmm_curve(
    panel: CohortPanel,
    k_grid: Sequence[int] = DEFAULT_K_GRID,
    metrics: Sequence[str] = DEFAULT_MISSED_METRICS,
    group: Optional[str] = None,
) -> RcmmCurve:
    """Returning-churner and missed-metric fractions across the k grid."""
    k_grid = np.asarray(sorted(k_grid), dtype=np.int64)
    if k_grid.size == 0 or k_grid[0] < 1:
        raise ValueError("k grid must be non-empty with k >= 1")
    users = [u for u in panel.users if group is None or panel.groups.get(u) == group]
    if not users:
        raise ValueError(f"no users in group {group!r}")
    gap_info = _first_flag_arrays(panel, users)
    metric_values = {m: [panel.user_values(u, m) for u in users] for m in metrics}
    totals = {m: float(sum(v.sum() for v in metric_values[m])) for m in metrics}

    returning = np.zeros(k_grid.size)
    missed = {m: np.zeros(k_grid.size) for m in metrics}
    for j, k in enumerate(k_grid):
        n_churned = 0
        n_returned = 0
        for i, (offs, terminal) in enumerate(gap_info):
            internal = np.diff(offs)
            big = np.flatnonzero(internal > k)
            first_flag = None
            if big.size:
                first_flag = int(offs[big[0]]) + int(k)
                returned = True
            elif terminal > k:
                first_flag = int(offs[-1]) + int(k)
                returned = False
            if first_flag is None:
                continue
            n_churned += 1
            n_returned += int(returned)
            for m in metrics:
                vals = metric_values[m][i]
                after = vals[first_flag + 1 :]
                if after.size:
                    missed[m][j] += float(after.sum())
        returning[j] = n_returned / n_churned if n_churned else 0.0
        for m in metrics:
            missed[m][j] = missed[m][j] / totals[m] if totals[m] > 0 else 0.0
    return RcmmCurve(k_grid=k_grid, returning_fraction=returning, missed_fraction=missed, group=group)


def find_churn_definition(
    curve: RcmmCurve,
    returning_max: float,
    missed_max: float,
    as_of: Optional[date] = None,
    monotone_atol: float = 0.02,
) -> ChurnDefinition:
    """Smallest k on the grid meeting both thresholds.

    The curve must be (near-)monotone non-increasing; small-sample jitter in
    the returning fraction up to ``monotone_atol`` is tolerated.
    """
    if not (0 < returning_max < 1 and 0 < missed_max < 1):
        raise ValueError("thresholds must lie in (0, 1)")
    if not curve.validate_monotone(atol=monotone_atol):
        raise ValueError("curve is not monotone non-increasing in k")
    worst_missed = np.max(np.vstack(list(curve.missed_fraction.values())), axis=0)
    ok = (curve.returning_fraction <= returning_max) & (worst_missed <= missed_max)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        best = int(np.argmin(np.maximum(curve.returning_fraction / returning_max, worst_missed / missed_max)))
        raise NoChurnDefinitionError(
            float(curve.returning_fraction[best]),
            {m: float(v[best]) for m, v in curve.missed_fraction.items()},
        )
    return ChurnDefinition(
        k_days=int(curve.k_grid[hits[0]]),
        method="rcmm",
        returning_max=returning_max,
        missed_max=missed_max,
        group=curve.group,
        as_of=as_of,
    )
