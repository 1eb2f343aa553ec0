"""Seeded synthetic behavioral-log generator with known ground truth.

Users draw a class, then a churn day from the class hazard (constant, or
regime-switching so that time-varying covariates genuinely carry signal),
then login days via per-day Bernoulli draws (equivalent to geometric gap
draws, hence memoryless) truncated at churn.  Each login day emits session,
click, video and test events from the class intensity distributions.

Generation runs per user on spawned RNG substreams, so output is
deterministic in the seed for any worker count.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .events import EventRecord


class SpecError(Exception):
    pass


@dataclass(frozen=True)
class ActivityLevels:
    session_secs_mean: float = 900.0
    clicks_per_login: float = 4.0
    elearning_share: float = 0.5
    videos_per_login: float = 1.0
    video_secs_mean: float = 120.0
    tests_per_login: float = 0.3


@dataclass(frozen=True)
class ChurnProcess:
    kind: str = "exponential"  # exponential | regime_switch
    rate: float = 0.01  # daily hazard rate (before the switch, if any)
    rate_after: Optional[float] = None
    switch_day_mean: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("exponential", "regime_switch"):
            raise SpecError(f"unknown churn kind {self.kind!r}")
        if self.rate < 0:
            raise SpecError("rate must be non-negative")
        if self.kind == "regime_switch" and (self.rate_after is None or self.switch_day_mean is None):
            raise SpecError("regime_switch requires rate_after and switch_day_mean")


@dataclass(frozen=True)
class ClassSpec:
    name: str
    weight: float
    group: str = "alpha"
    gap_p: float = 0.5  # daily login probability (geometric gaps with this p)
    gap_p_after: Optional[float] = None  # login probability after the regime switch
    churn: ChurnProcess = field(default_factory=ChurnProcess)
    activity: ActivityLevels = field(default_factory=ActivityLevels)
    activity_after: Optional[ActivityLevels] = None

    def __post_init__(self):
        if not (0 < self.gap_p <= 1):
            raise SpecError("gap_p must lie in (0, 1]")
        if self.weight < 0:
            raise SpecError("weight must be non-negative")


@dataclass(frozen=True)
class CohortSpec:
    n_users: int
    classes: Tuple[ClassSpec, ...]
    start: date = date(2021, 1, 1)
    n_days: int = 365
    seed: int = 0
    first_login_spread: int = 30
    login_second_max: int = 86400 - 6 * 3600  # keep room for same-day sessions

    def __post_init__(self):
        if self.n_users < 1:
            raise SpecError("n_users must be >= 1")
        if not self.classes:
            raise SpecError("at least one class required")
        total = sum(c.weight for c in self.classes)
        if abs(total - 1.0) > 1e-9:
            raise SpecError(f"class weights must sum to 1 (got {total})")


@dataclass
class UserTruth:
    user_id: str
    class_name: str
    group: str
    first_login_day: date
    true_churn_day: Optional[date]  # last day on which a login was possible
    switch_day: Optional[date]
    login_days: List[date]
    daily_counts: Dict[str, Dict[str, int]]  # iso day -> counters


@dataclass
class GroundTruth:
    spec: CohortSpec
    users: List[UserTruth]
    signal_features: List[str]
    panel_end: date

    def analytic_survival(self, class_name: str):
        """S(t) for the class's churn process (days since first login)."""
        cls = next(c for c in self.spec.classes if c.name == class_name)

        def s(t):
            t = np.asarray(t, dtype=float)
            if cls.churn.kind == "exponential":
                return np.exp(-cls.churn.rate * t)
            m = cls.churn.switch_day_mean
            # expectation over the exponential switch day is not closed-form
            # friendly here; report the pre-switch branch
            return np.exp(-cls.churn.rate * np.minimum(t, m) - cls.churn.rate_after * np.maximum(t - m, 0))

        return s


def _simulate_user(spec: CohortSpec, index: int, seed_seq) -> Tuple[List[EventRecord], UserTruth]:
    rng = np.random.default_rng(seed_seq)
    user_id = f"u{index:06d}"
    weights = np.array([c.weight for c in spec.classes])
    cls = spec.classes[int(rng.choice(len(spec.classes), p=weights))]
    first_off = int(rng.integers(0, spec.first_login_spread)) if spec.first_login_spread > 0 else 0
    first_day = spec.start + timedelta(days=first_off)
    horizon = spec.n_days - first_off

    switch = None
    if cls.churn.kind == "regime_switch":
        switch = max(1, int(round(rng.exponential(cls.churn.switch_day_mean))))

    h_before = 1.0 - np.exp(-cls.churn.rate)
    h_after = 1.0 - np.exp(-(cls.churn.rate_after or cls.churn.rate))

    events: List[EventRecord] = []
    login_days: List[date] = []
    daily: Dict[str, Dict[str, int]] = {}
    churn_day = None

    def _bump(d: date, key: str, by: int = 1):
        rec = daily.setdefault(d.isoformat(), {})
        rec[key] = rec.get(key, 0) + by

    for d in range(horizon):
        after = switch is not None and d >= switch
        p_login = (cls.gap_p_after if after and cls.gap_p_after is not None else cls.gap_p)
        act = cls.activity_after if after and cls.activity_after is not None else cls.activity
        logged = d == 0 or rng.random() < p_login
        if logged:
            day = first_day + timedelta(days=d)
            login_days.append(day)
            base = datetime(day.year, day.month, day.day, tzinfo=timezone.utc) + timedelta(
                seconds=int(rng.integers(0, spec.login_second_max))
            )
            dur = max(60, int(rng.exponential(act.session_secs_mean)))
            events.append(EventRecord(user_id, base, "login", None, cls.group))
            _bump(base.date(), "logins")
            end_ts = base + timedelta(seconds=dur)
            events.append(EventRecord(user_id, end_ts, "session_end", dur, cls.group))
            _bump(base.date(), "session_seconds", dur)

            # offsets drawn without replacement so no two same-kind events
            # collide on the same second (exact duplicates would be deduped
            # on ingest and break log round-tripping)
            n_clicks = min(int(rng.poisson(act.clicks_per_login)), dur)
            click_offs = rng.choice(dur, size=n_clicks, replace=False)
            for off in click_offs:
                off = int(off)
                kind = "action_card_view" if rng.random() < act.elearning_share else "click"
                ts = base + timedelta(seconds=off)
                events.append(EventRecord(user_id, ts, kind, None, cls.group))
                _bump(ts.date(), "actions")
                if kind == "action_card_view":
                    _bump(ts.date(), "elearning_actions")

            n_videos = int(rng.poisson(act.videos_per_login))
            cursor = base + timedelta(seconds=10)
            for _ in range(n_videos):
                vdur = 1 + int(rng.exponential(act.video_secs_mean))
                events.append(EventRecord(user_id, cursor, "video_start", None, cls.group))
                _bump(cursor.date(), "actions")
                _bump(cursor.date(), "elearning_actions")
                _bump(cursor.date(), "video_views")
                stop = cursor + timedelta(seconds=vdur)
                events.append(EventRecord(user_id, stop, "video_stop", vdur, cls.group))
                _bump(stop.date(), "actions")
                _bump(stop.date(), "elearning_actions")
                cursor = stop + timedelta(seconds=5)

            n_tests = min(int(rng.poisson(act.tests_per_login)), dur)
            test_offs = rng.choice(dur, size=n_tests, replace=False)
            for off in test_offs:
                ts = base + timedelta(seconds=int(off))
                events.append(EventRecord(user_id, ts, "test_passed", None, cls.group))
                _bump(ts.date(), "actions")
                _bump(ts.date(), "elearning_actions")
                _bump(ts.date(), "tests")

        h = h_after if after else h_before
        if rng.random() < h:
            churn_day = first_day + timedelta(days=d)
            break

    truth = UserTruth(
        user_id=user_id,
        class_name=cls.name,
        group=cls.group,
        first_login_day=first_day,
        true_churn_day=churn_day,
        switch_day=None if switch is None else first_day + timedelta(days=switch),
        login_days=login_days,
        daily_counts=daily,
    )
    return events, truth


def generate(spec: CohortSpec, n_jobs: int = 1) -> Tuple[List[EventRecord], GroundTruth]:
    """Generate the event log and its ground truth, deterministically in the seed."""
    seqs = np.random.SeedSequence(spec.seed).spawn(spec.n_users)
    if n_jobs == 1:
        results = [_simulate_user(spec, i, s) for i, s in enumerate(seqs)]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_simulate_user)(spec, i, s) for i, s in enumerate(seqs)
        )
    events: List[EventRecord] = []
    users: List[UserTruth] = []
    for evs, truth in results:
        events.extend(evs)
        users.append(truth)
    if not events:
        raise SpecError("spec produced no events")
    events.sort()
    nominal_end = spec.start + timedelta(days=spec.n_days - 1)
    panel_end = max(nominal_end, max(e.timestamp.date() for e in events))
    signal = sorted({f for c in spec.classes for f in _class_signal_features(c)})
    return events, GroundTruth(spec=spec, users=users, signal_features=signal, panel_end=panel_end)


def _class_signal_features(cls: ClassSpec) -> List[str]:
    # any rolling activity feature tracks the login/intensity regimes
    return ["action_count_sum_7d", "session_count_sum_7d", "connection_time_s_sum_7d"]


# ---------------------------------------------------------------------------
# canned cohorts used by the tests and acceptance suite


def two_group_spec(n_users: int = 2000, hazard_ratio: float = 4.0, base_rate: float = 0.008, seed: int = 0) -> CohortSpec:
    """Two classes with a planted proportional-hazards ratio and distinct activity."""
    return CohortSpec(
        n_users=n_users,
        seed=seed,
        n_days=420,
        classes=(
            ClassSpec(
                name="steady",
                weight=0.5,
                group="alpha",
                gap_p=0.7,
                churn=ChurnProcess(kind="exponential", rate=base_rate),
                activity=ActivityLevels(clicks_per_login=8.0, videos_per_login=2.0, tests_per_login=1.0),
            ),
            ClassSpec(
                name="fading",
                weight=0.5,
                group="alpha",
                gap_p=0.3,
                churn=ChurnProcess(kind="exponential", rate=base_rate * hazard_ratio),
                activity=ActivityLevels(clicks_per_login=2.0, videos_per_login=0.3, tests_per_login=0.1),
            ),
        ),
    )


def regime_switch_spec(n_users: int = 600, seed: int = 0) -> CohortSpec:
    """Graded regime-switch classes: hazard and activity jump at a random day.

    Every class looks identical while healthy; at an exponential switch day
    activity drops to a class-graded level and the hazard jumps to a matching
    class-graded rate.  Lifetimes are dominated by the unobservable switch
    time, so a static end-of-life snapshot carries little signal, while the
    covariate path reveals both when the switch happened and how severe it
    is -- and the severity acts multiplicatively on a shared hazard shape.
    """
    busy = ActivityLevels(clicks_per_login=8.0, videos_per_login=2.0, tests_per_login=1.0, session_secs_mean=1200.0)
    grades = [
        ("mild", 0.04, ActivityLevels(clicks_per_login=4.0, videos_per_login=1.0, tests_per_login=0.5, session_secs_mean=600.0)),
        ("medium", 0.07, ActivityLevels(clicks_per_login=2.0, videos_per_login=0.5, tests_per_login=0.2, session_secs_mean=400.0)),
        ("strong", 0.12, ActivityLevels(clicks_per_login=1.0, videos_per_login=0.2, tests_per_login=0.1, session_secs_mean=250.0)),
        ("severe", 0.20, ActivityLevels(clicks_per_login=0.5, videos_per_login=0.1, tests_per_login=0.05, session_secs_mean=150.0)),
    ]
    classes = tuple(
        ClassSpec(
            name=name,
            weight=0.25,
            group="alpha",
            gap_p=0.8,
            gap_p_after=0.5,
            churn=ChurnProcess(kind="regime_switch", rate=0.001, rate_after=rate_after, switch_day_mean=120.0),
            activity=busy,
            activity_after=quiet,
        )
        for name, rate_after, quiet in grades
    )
    return CohortSpec(n_users=n_users, seed=seed, n_days=420, classes=classes)


def homogeneous_spec(n_users: int = 500, rate: float = 0.01, seed: int = 0) -> CohortSpec:
    return CohortSpec(
        n_users=n_users,
        seed=seed,
        n_days=400,
        classes=(
            ClassSpec(name="uniform", weight=1.0, group="alpha", gap_p=0.6, churn=ChurnProcess(rate=rate)),
        ),
    )


# ---------------------------------------------------------------------------
# JSON round trip


def spec_to_json(spec: CohortSpec) -> str:
    payload = asdict(spec)
    payload["start"] = spec.start.isoformat()
    payload["classes"] = [asdict(c) for c in spec.classes]
    for c in payload["classes"]:
        c.pop("churn")
        c.pop("activity")
        c.pop("activity_after")
    for c, cls in zip(payload["classes"], spec.classes):
        c["churn"] = asdict(cls.churn)
        c["activity"] = asdict(cls.activity)
        c["activity_after"] = None if cls.activity_after is None else asdict(cls.activity_after)
    return json.dumps(payload, indent=2, sort_keys=True)


def spec_from_json(text: str) -> CohortSpec:
    payload = json.loads(text)
    classes = []
    for c in payload["classes"]:
        classes.append(
            ClassSpec(
                name=c["name"],
                weight=c["weight"],
                group=c.get("group", "alpha"),
                gap_p=c.get("gap_p", 0.5),
                gap_p_after=c.get("gap_p_after"),
                churn=ChurnProcess(**(c.get("churn") or {})),
                activity=ActivityLevels(**(c.get("activity") or {})),
                activity_after=None if c.get("activity_after") is None else ActivityLevels(**c["activity_after"]),
            )
        )
    return CohortSpec(
        n_users=payload["n_users"],
        classes=tuple(classes),
        start=date.fromisoformat(payload.get("start", "2021-01-01")),
        n_days=payload.get("n_days", 365),
        seed=payload.get("seed", 0),
        first_login_spread=payload.get("first_login_spread", 30),
    )


def truth_to_json(truth: GroundTruth) -> str:
    payload = {
        "panel_end": truth.panel_end.isoformat(),
        "signal_features": truth.signal_features,
        "users": [
            {
                "user_id": u.user_id,
                "class": u.class_name,
                "group": u.group,
                "first_login_day": u.first_login_day.isoformat(),
                "true_churn_day": None if u.true_churn_day is None else u.true_churn_day.isoformat(),
                "switch_day": None if u.switch_day is None else u.switch_day.isoformat(),
                "n_logins": len(u.login_days),
            }
            for u in truth.users
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)
