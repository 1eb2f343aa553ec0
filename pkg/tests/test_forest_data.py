import numpy as np
import pytest

from churnkit.forest import (
    build_pseudo_dataset,
    build_static_dataset,
    default_feature_columns,
    label_churn,
    pseudo_observations,
)


def test_label_churn(small_panel):
    labels, warnings = label_churn(small_panel, 31)
    for uid, lab in labels.items():
        offs = small_panel.login_offsets(uid)
        assert lab.entry_day == 0
        assert lab.exit_day == offs[-1]
        terminal = small_panel.observation_days(uid) - offs[-1]
        assert lab.event == (terminal > 31)
    # single-login users are dropped with a warning, not labeled
    dropped = set(small_panel.users) - set(labels)
    for uid in dropped:
        assert small_panel.login_offsets(uid)[-1] == 0
    assert len(warnings) == len(dropped)


def test_label_churn_k_strictness(small_panel):
    l30, _ = label_churn(small_panel, 30)
    l120, _ = label_churn(small_panel, 120)
    # a looser horizon can only remove events, never add them
    for uid in l120:
        assert not l120[uid].event or l30[uid].event


def test_pseudo_observation_conservation(small_panel):
    """Criterion: segment lengths partition the labeled duration exactly."""
    labels, _ = label_churn(small_panel, 31)
    cols = default_feature_columns(small_panel)
    for interval in ("day", "week", "month"):
        for uid, lab in labels.items():
            rows = pseudo_observations(small_panel, uid, lab, cols, interval)
            lengths = [b - a for a, b, _, _ in rows]
            assert sum(lengths) == lab.exit_day
            # contiguity and event placement
            assert rows[0][0] == 0
            for (a1, b1, _, _), (a2, _, _, _) in zip(rows, rows[1:]):
                assert b1 == a2
            assert [ev for _, _, ev, _ in rows] == [False] * (len(rows) - 1) + [lab.event]


def test_pseudo_features_snapshot_segment_entry(small_panel):
    labels, _ = label_churn(small_panel, 31)
    uid = next(iter(labels))
    cols = ["action_count_sum_7d", "connection_time_s"]
    rows = pseudo_observations(small_panel, uid, labels[uid], cols, "week")
    for a, _, _, feats in rows:
        expect = [float(small_panel.user_values(uid, c)[a]) for c in cols]
        assert list(feats) == expect


def test_static_dataset(small_panel):
    ds = build_static_dataset(small_panel, 31)
    assert ds.n_rows == ds.n_subjects
    assert np.all(ds.entry == 0)
    ds.validate()
    labels, _ = label_churn(small_panel, 31)
    assert ds.subject_ids == sorted(labels)
    # features come from the last login day
    uid = ds.subject_ids[0]
    last = int(small_panel.login_offsets(uid)[-1])
    j = ds.feature_names.index("action_count")
    assert ds.X[0, j] == float(small_panel.user_values(uid, "action_count")[last])


def test_pseudo_dataset_groups_subjects(small_panel):
    ds = build_pseudo_dataset(small_panel, 31, "week")
    ds.validate()
    assert ds.n_rows > ds.n_subjects
    for code in range(0, ds.n_subjects, 25):
        rows = ds.subject_rows(code)
        assert np.all(np.diff(ds.entry[rows]) > 0)
        o = ds.subject_observation(code)
        assert o.entry_day == 0
        assert o.exit_day == ds.exit[rows].max()


def test_interval_validation(small_panel):
    labels, _ = label_churn(small_panel, 31)
    uid = next(iter(labels))
    with pytest.raises(ValueError):
        pseudo_observations(small_panel, uid, labels[uid], ["action_count"], "year")
    with pytest.raises(ValueError):
        label_churn(small_panel, 0)
