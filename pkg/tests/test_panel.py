import io
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest

from churnkit.events import EventRecord
from churnkit.panel import (
    PanelError,
    build_panel,
    export_panel_csv,
    read_panel_csv,
    rolling_features,
)


def ts(text):
    return datetime.fromisoformat(text).replace(tzinfo=timezone.utc)


def ev(user, when, kind, dur=None, country="ke"):
    return EventRecord(user, ts(when), kind, dur, country)


def simple_events():
    return [
        ev("u1", "2021-01-01T10:00:00", "login"),
        ev("u1", "2021-01-01T10:05:00", "click"),
        ev("u1", "2021-01-01T10:06:00", "video_start"),
        ev("u1", "2021-01-01T10:08:00", "video_stop", 120),
        ev("u1", "2021-01-01T10:30:00", "session_end", 1800),
        ev("u1", "2021-01-03T09:00:00", "login"),
        ev("u1", "2021-01-03T09:01:00", "test_passed"),
        ev("u1", "2021-01-03T09:20:00", "session_end", 1200),
    ]


def test_daily_metrics_hand_check():
    panel = build_panel(simple_events(), date(2021, 1, 4))
    assert panel.users == ["u1"]
    assert panel.observation_days("u1") == 3
    assert list(panel.user_values("u1", "logged_in")) == [True, False, True, False]
    assert list(panel.user_values("u1", "connection_time_s")) == [1800, 0, 1200, 0]
    # actions: click + video_start + video_stop on day 0; test_passed on day 2
    assert list(panel.user_values("u1", "action_count")) == [3, 0, 1, 0]
    assert list(panel.user_values("u1", "elearning_action_count")) == [2, 0, 1, 0]
    assert list(panel.user_values("u1", "progression")) == [0, 0, 1, 0]
    assert list(panel.user_values("u1", "video_view_count")) == [1, 0, 0, 0]
    assert list(panel.user_values("u1", "video_watch_time_s")) == [120, 0, 0, 0]
    assert list(panel.user_values("u1", "days_since_last_login")) == [0, 1, 0, 1]
    # loyalty after 4 observed days with 2 login days
    assert panel.user_values("u1", "loyalty_index")[3] == pytest.approx(2 / 4)
    assert panel.user_values("u1", "weekly_loyalty_index")[3] == pytest.approx(2 / 7)
    assert list(panel.login_gaps("u1")) == [2]


def test_order_insensitive():
    events = simple_events()
    shuffled = [events[i] for i in np.random.default_rng(0).permutation(len(events))]
    a = build_panel(events, date(2021, 1, 4))
    b = build_panel(shuffled, date(2021, 1, 4))
    assert a.frame.equals(b.frame)


def test_midnight_split_conserves_seconds():
    # session starts 23:30 and lasts 2h -> 1800 s before midnight, 5400 after
    events = [
        ev("u1", "2021-01-01T23:30:00", "login"),
        ev("u1", "2021-01-02T01:30:00", "session_end", 7200),
    ]
    panel = build_panel(events, date(2021, 1, 2))
    conn = panel.user_values("u1", "connection_time_s")
    assert list(conn) == [1800, 5400]
    assert conn.sum() == 7200


def test_unclosed_session_times_out():
    events = [
        ev("u1", "2021-01-01T10:00:00", "login"),
        ev("u1", "2021-01-01T20:00:00", "login"),
        ev("u1", "2021-01-01T20:10:00", "session_end", 600),
    ]
    panel = build_panel(events, date(2021, 1, 1))
    # first session times out at the default 1800 s cap
    assert panel.user_values("u1", "connection_time_s")[0] == 1800 + 600


def test_unmatched_end_events_warn():
    events = [
        ev("u1", "2021-01-01T10:00:00", "login"),
        ev("u1", "2021-01-01T10:10:00", "session_end", 600),
        ev("u1", "2021-01-01T11:00:00", "session_end", 300),
        ev("u1", "2021-01-01T12:00:00", "video_stop", 60),
    ]
    panel = build_panel(events, date(2021, 1, 1))
    assert len(panel.warnings) == 2
    assert panel.user_values("u1", "connection_time_s")[0] == 900
    assert panel.user_values("u1", "video_watch_time_s")[0] == 60


def test_user_without_login_rejected():
    with pytest.raises(PanelError):
        build_panel([ev("u1", "2021-01-01T10:00:00", "click")], date(2021, 1, 1))
    with pytest.raises(PanelError):
        build_panel(simple_events(), date(2021, 1, 2))  # end precedes last event


def test_rolling_oracle_brute_force(small_panel):
    rng = np.random.default_rng(42)
    users = list(small_panel.users)
    for uid in [users[i] for i in rng.choice(len(users), size=10, replace=False)]:
        for metric in ["connection_time_s", "action_count", "session_count", "progression"]:
            base = small_panel.user_values(uid, metric)
            for w in (3, 7, 15):
                rolled = small_panel.user_values(uid, f"{metric}_sum_{w}d")
                brute = np.array([base[max(0, i - w + 1) : i + 1].sum() for i in range(len(base))])
                assert np.array_equal(rolled, brute), (uid, metric, w)


def test_week_of_year_column(small_panel):
    row = small_panel.frame.iloc[0]
    assert row["week_of_year"] == row["day"].isocalendar()[1]


def test_csv_roundtrip(small_panel):
    buf = io.StringIO()
    export_panel_csv(small_panel, buf)
    buf.seek(0)
    back = read_panel_csv(buf)
    assert back.users == small_panel.users
    assert back.panel_end == small_panel.panel_end
    assert back.groups == small_panel.groups
    for col in small_panel.metric_columns:
        a = small_panel.column(col).astype(float)
        b = back.column(col).astype(float)
        assert np.allclose(a, b, rtol=0, atol=1e-9), col
