"""Per-user daily metric panels built from raw event logs.

A :class:`CohortPanel` holds one dense row per (user, calendar day) from the
user's first login through the shared panel end date.  Days are bucketed in
UTC.  Sessions and video spans crossing midnight are split at the boundary
with their seconds prorated, so daily connection time sums back to the raw
session totals exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import IO, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from .events import CLICK_KINDS, ELEARNING_KINDS, EventRecord

# fixed export order of the per-day metric columns
BASE_COLUMNS = [
    "lifetime_days",
    "logged_in",
    "session_count",
    "connection_time_s",
    "action_count",
    "elearning_action_count",
    "progression",
    "video_view_count",
    "video_watch_time_s",
    "elearning_connection_time_s",
    "loyalty_index",
    "weekly_loyalty_index",
    "days_since_last_login",
]

ROLLING_BASE_METRICS = ["connection_time_s", "action_count", "session_count", "progression"]

DEFAULT_SESSION_TIMEOUT_S = 1800


class PanelError(Exception):
    pass


def _split_interval_by_day(start: datetime, duration_s: int) -> Dict[date, int]:
    """Allocate the seconds of [start, start+duration) to UTC calendar days."""
    out: Dict[date, int] = {}
    t = start
    remaining = int(duration_s)
    while remaining > 0:
        day = t.date()
        next_midnight = datetime(day.year, day.month, day.day, tzinfo=timezone.utc) + timedelta(days=1)
        chunk = min(remaining, int((next_midnight - t).total_seconds()))
        out[day] = out.get(day, 0) + chunk
        t = next_midnight
        remaining -= chunk
    if duration_s == 0:
        out[start.date()] = out.get(start.date(), 0)
    return out


@dataclass
class CohortPanel:
    """Dense per-user, per-day metric matrix plus group labels.

    Immutable by convention after construction; rolling-feature columns are
    the only sanctioned append (see :func:`rolling_features`).
    """

    frame: pd.DataFrame
    panel_end: date
    groups: Dict[str, str]
    warnings: List[str] = field(default_factory=list)

    # ---- derived lookups (built lazily) -------------------------------
    _slices: Dict[str, slice] = field(default_factory=dict, repr=False)
    _columns_np: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._slices:
            uid = self.frame["user_id"].to_numpy()
            starts = np.flatnonzero(np.r_[True, uid[1:] != uid[:-1]])
            bounds = np.r_[starts, len(uid)]
            for i, s in enumerate(starts):
                self._slices[uid[s]] = slice(int(s), int(bounds[i + 1]))

    @property
    def users(self) -> List[str]:
        return sorted(self._slices)

    @property
    def metric_columns(self) -> List[str]:
        return [c for c in self.frame.columns if c not in ("user_id", "day", "country")]

    def column(self, name: str) -> np.ndarray:
        if name not in self._columns_np:
            self._columns_np[name] = self.frame[name].to_numpy()
        return self._columns_np[name]

    def user_slice(self, user_id: str) -> slice:
        try:
            return self._slices[user_id]
        except KeyError:
            raise PanelError(f"unknown user: {user_id!r}")

    def first_login_day(self, user_id: str) -> date:
        sl = self.user_slice(user_id)
        return self.frame["day"].iloc[sl.start]

    def user_values(self, user_id: str, metric: str) -> np.ndarray:
        return self.column(metric)[self.user_slice(user_id)]

    def day_index(self, user_id: str, day: date) -> int:
        """Offset of `day` within the user's dense range (0 = first login day)."""
        idx = (day - self.first_login_day(user_id)).days
        sl = self.user_slice(user_id)
        if idx < 0 or sl.start + idx >= sl.stop:
            raise PanelError(f"day {day} outside panel range for user {user_id!r}")
        return idx

    def value(self, user_id: str, day: date, metric: str):
        sl = self.user_slice(user_id)
        return self.column(metric)[sl.start + self.day_index(user_id, day)]

    def login_offsets(self, user_id: str) -> np.ndarray:
        """Day offsets (since first login) on which the user logged in."""
        return np.flatnonzero(self.user_values(user_id, "logged_in"))

    def login_gaps(self, user_id: str) -> np.ndarray:
        """Completed days-between-logins samples (differences of login days)."""
        offs = self.login_offsets(user_id)
        return np.diff(offs)

    def observation_days(self, user_id: str) -> int:
        return (self.panel_end - self.first_login_day(user_id)).days


def build_panel(
    events: Sequence[EventRecord],
    panel_end: date,
    session_timeout_s: int = DEFAULT_SESSION_TIMEOUT_S,
) -> CohortPanel:
    """Derive the dense daily metric panel from an event list.

    Deterministic and order-insensitive: events are re-sorted internally.
    Every user must have at least one login; panel_end must not precede the
    last event.
    """
    if not events:
        raise PanelError("no events")
    events = sorted(events)
    last_day = max(e.timestamp.date() for e in events)
    if panel_end < last_day:
        raise PanelError(f"panel_end {panel_end} precedes last event day {last_day}")

    warnings: List[str] = []
    groups: Dict[str, str] = {}
    per_user: Dict[str, List[EventRecord]] = {}
    for ev in events:
        per_user.setdefault(ev.user_id, []).append(ev)
        if ev.country:
            groups.setdefault(ev.user_id, ev.country)

    frames = []
    for user_id in sorted(per_user):
        evs = per_user[user_id]
        login_days = sorted({e.timestamp.date() for e in evs if e.event_kind == "login"})
        if not login_days:
            raise PanelError(f"user {user_id!r} has no login event")
        first_day = login_days[0]
        n_days = (panel_end - first_day).days + 1

        conn = np.zeros(n_days, dtype=np.int64)
        watch = np.zeros(n_days, dtype=np.int64)
        actions = np.zeros(n_days, dtype=np.int64)
        elearn = np.zeros(n_days, dtype=np.int64)
        progression = np.zeros(n_days, dtype=np.int64)
        views = np.zeros(n_days, dtype=np.int64)
        sessions = np.zeros(n_days, dtype=np.int64)
        logged = np.zeros(n_days, dtype=bool)

        def _off(d: date) -> int:
            return (d - first_day).days

        def _add_span(dest: np.ndarray, start_ts: datetime, dur: int):
            for d, secs in _split_interval_by_day(start_ts, dur).items():
                o = _off(d)
                if 0 <= o < n_days:
                    dest[o] += secs

        open_login: Optional[datetime] = None
        open_video: Optional[datetime] = None
        for ev in evs:
            day_off = _off(ev.timestamp.date())
            kind = ev.event_kind
            if kind == "login":
                if open_login is not None:
                    # previous session never closed: time out, capped at next login
                    gap = int((ev.timestamp - open_login).total_seconds())
                    _add_span(conn, open_login, min(session_timeout_s, max(gap, 0)))
                if 0 <= day_off < n_days:
                    logged[day_off] = True
                    sessions[day_off] += 1
                open_login = ev.timestamp
            elif kind == "session_end":
                if open_login is None:
                    warnings.append(
                        f"{user_id}: session_end without matching login at {ev.timestamp.isoformat()}"
                    )
                    if 0 <= day_off < n_days:
                        conn[day_off] += ev.duration_s
                else:
                    _add_span(conn, open_login, ev.duration_s)
                    open_login = None
            elif kind == "video_start":
                open_video = ev.timestamp
                if 0 <= day_off < n_days:
                    views[day_off] += 1
            elif kind == "video_stop":
                if open_video is None:
                    warnings.append(
                        f"{user_id}: video_stop without matching start at {ev.timestamp.isoformat()}"
                    )
                    if 0 <= day_off < n_days:
                        watch[day_off] += ev.duration_s
                else:
                    _add_span(watch, open_video, ev.duration_s)
                    open_video = None
            if kind in CLICK_KINDS and 0 <= day_off < n_days:
                actions[day_off] += 1
                if kind in ELEARNING_KINDS:
                    elearn[day_off] += 1
                if kind == "test_passed":
                    progression[day_off] += 1
        if open_login is not None:
            _add_span(conn, open_login, session_timeout_s)

        login_cum = np.cumsum(logged)
        lifetime = np.arange(n_days, dtype=np.int64)
        loyalty = login_cum / (lifetime + 1)
        # trailing 7-day login fraction
        pad = np.r_[np.zeros(7, dtype=np.int64), login_cum]
        weekly = (login_cum - pad[:n_days]) / 7.0
        # days since the most recent login day (0 on login days)
        last_login_off = np.where(logged, lifetime, -1)
        last_login_off = np.maximum.accumulate(last_login_off)
        dsll = lifetime - last_login_off

        days = [first_day + timedelta(days=int(i)) for i in range(n_days)]
        frames.append(
            pd.DataFrame(
                {
                    "user_id": user_id,
                    "day": days,
                    "country": groups.get(user_id, ""),
                    "lifetime_days": lifetime,
                    "logged_in": logged,
                    "session_count": sessions,
                    "connection_time_s": conn,
                    "action_count": actions,
                    "elearning_action_count": elearn,
                    "progression": progression,
                    "video_view_count": views,
                    "video_watch_time_s": watch,
                    "elearning_connection_time_s": watch.copy(),
                    "loyalty_index": loyalty,
                    "weekly_loyalty_index": weekly,
                    "days_since_last_login": dsll,
                }
            )
        )

    frame = pd.concat(frames, ignore_index=True)
    return CohortPanel(frame=frame, panel_end=panel_end, groups=groups, warnings=warnings)


def rolling_features(panel: CohortPanel, windows: Iterable[int] = (3, 7, 15)) -> CohortPanel:
    """Append trailing-window sums and the ISO week-of-year column.

    For each base metric and window w the new column holds the sum over the
    w days ending at (and including) the current day; windows larger than
    the user's history sum over the available days only.
    """
    windows = sorted(set(int(w) for w in windows))
    if any(w <= 0 for w in windows):
        raise PanelError("windows must be positive")
    frame = panel.frame.copy()
    new_cols: Dict[str, np.ndarray] = {}
    for metric in ROLLING_BASE_METRICS:
        values = frame[metric].to_numpy()
        for w in windows:
            new_cols[f"{metric}_sum_{w}d"] = np.empty(len(frame), dtype=values.dtype)
    week = np.empty(len(frame), dtype=np.int64)

    uid = frame["user_id"].to_numpy()
    days = frame["day"].to_numpy()
    starts = np.flatnonzero(np.r_[True, uid[1:] != uid[:-1]])
    bounds = np.r_[starts, len(uid)]
    for i, s in enumerate(starts):
        e = bounds[i + 1]
        for metric in ROLLING_BASE_METRICS:
            v = frame[metric].to_numpy()[s:e]
            cum = np.cumsum(v)
            for w in windows:
                padded = np.r_[np.zeros(w, dtype=cum.dtype), cum]
                new_cols[f"{metric}_sum_{w}d"][s:e] = cum - padded[: e - s]
    for j, d in enumerate(days):
        week[j] = d.isocalendar()[1]

    for name, col in new_cols.items():
        frame[name] = col
    frame["week_of_year"] = week
    return CohortPanel(
        frame=frame, panel_end=panel_end_of(panel), groups=dict(panel.groups), warnings=list(panel.warnings)
    )


def panel_end_of(panel: CohortPanel) -> date:
    return panel.panel_end


def export_panel_csv(panel: CohortPanel, stream: IO) -> None:
    """Write the panel as CSV, one row per (user, day), fixed column order."""
    cols = ["user_id", "day", "country"] + [c for c in panel.frame.columns if c not in ("user_id", "day", "country")]
    frame = panel.frame[cols].copy()
    frame["logged_in"] = frame["logged_in"].astype(int)
    frame["day"] = frame["day"].map(lambda d: d.isoformat())
    stream.write(frame.to_csv(index=False, lineterminator="\n", float_format="%.12g"))


def read_panel_csv(stream: IO) -> CohortPanel:
    """Rebuild a CohortPanel from its CSV export."""
    frame = pd.read_csv(stream, dtype={"user_id": str, "country": str}, keep_default_na=False)
    frame["day"] = frame["day"].map(date.fromisoformat)
    frame["logged_in"] = frame["logged_in"].astype(bool)
    panel_end = frame["day"].max()
    groups = {}
    for u, c in zip(frame["user_id"], frame["country"]):
        if u not in groups:
            groups[u] = c
    return CohortPanel(frame=frame, panel_end=panel_end, groups=groups)
