import numpy as np
import pytest

from churnkit.survival import (
    BrierError,
    SurvivalCurve,
    SurvivalObservation,
    brier_score,
    censoring_survival,
    default_ibs_grid,
    evaluate_ibs,
    integrated_brier_score,
    kaplan_meier,
    median_survival,
    nelson_aalen,
)


def obs(entry, exit_, event):
    return SurvivalObservation(entry, exit_, event)


HAND = [obs(0, 1, True), obs(0, 2, False), obs(0, 3, True)]


def test_km_hand_check():
    curve = kaplan_meier(HAND)
    assert list(curve.times) == [1, 3]
    assert curve.survival[0] == pytest.approx(2 / 3, abs=0)
    assert curve.survival[1] == 0.0
    assert curve.evaluate(0) == 1.0
    assert curve.evaluate(2.5) == pytest.approx(2 / 3)


def test_nelson_aalen_hand_check():
    na = nelson_aalen(HAND)
    # H(3) = 1/3 + 1/1 = 4/3 exactly
    assert na.evaluate(3) == pytest.approx(4 / 3, abs=0)
    assert na.evaluate(0.5) == 0.0
    assert na.evaluate_left(1) == 0.0
    assert na.evaluate_left(3) == pytest.approx(1 / 3)


def test_km_with_left_truncation():
    # the late entrant is not at risk at t=1
    data = [obs(0, 1, True), obs(0, 3, True), obs(2, 4, True)]
    curve = kaplan_meier(data)
    # t=1: n=2 (entry<1<=exit for first two), d=1 -> 1/2
    # t=3: n=2, d=1 -> 1/4 ; t=4: n=1, d=1 -> 0
    assert np.allclose(curve.survival, [0.5, 0.25, 0.0])


def test_greenwood_band_shrinks_with_n():
    rng = np.random.default_rng(3)

    def width(n):
        t = rng.exponential(100, size=n).astype(int) + 1
        c = rng.random(n) < 0.7
        curve = kaplan_meier([obs(0, int(x), bool(e)) for x, e in zip(t, c)])
        mid = np.searchsorted(curve.times, np.median(t))
        return float(curve.upper[mid] - curve.lower[mid])

    w_small, w_big = width(100), width(6400)
    # se scales ~1/sqrt(n): expect roughly an 8x narrower band, allow slack
    assert w_big < w_small / 4


def test_km_band_ordering_and_range():
    rng = np.random.default_rng(9)
    data = [obs(0, int(t) + 1, bool(e)) for t, e in zip(rng.exponential(50, 300), rng.random(300) < 0.6)]
    curve = kaplan_meier(data)
    assert np.all(curve.lower <= curve.survival + 1e-12)
    assert np.all(curve.survival <= curve.upper + 1e-12)
    assert np.all((curve.lower >= 0) & (curve.upper <= 1))


def test_km_equals_one_minus_ecdf_without_censoring():
    rng = np.random.default_rng(4)
    t = rng.integers(1, 50, size=500)
    curve = kaplan_meier([obs(0, int(x), True) for x in t])
    for q in [1, 5, 10, 30, 49]:
        assert curve.evaluate(q) == pytest.approx(np.mean(t > q), abs=1e-12)


def test_km_dominates_fleming_harrington():
    """S_KM >= exp(-H_NA) pointwise (classical inequality 1-x <= e^-x)."""
    rng = np.random.default_rng(8)
    data = [obs(0, int(t) + 1, bool(e)) for t, e in zip(rng.exponential(30, 400), rng.random(400) < 0.5)]
    km = kaplan_meier(data, conf_band=False)
    na = nelson_aalen(data)
    fh = np.exp(-na.values)
    assert np.all(km.survival <= fh + 1e-12)


def test_median_survival():
    assert median_survival(kaplan_meier(HAND)) == 3
    big = kaplan_meier([obs(0, 5, False)] * 10)
    assert median_survival(big) is None


def test_censoring_survival_reverse_km():
    data = [obs(0, 2, False), obs(0, 3, True), obs(0, 4, False)]
    g = censoring_survival(data)
    # censorings at 2 (n=3) and 4 (n=1)
    assert np.allclose(g.evaluate([1, 2, 3, 4]), [1.0, 2 / 3, 2 / 3, 0.0])


def test_brier_perfect_oracle_is_zero():
    rng = np.random.default_rng(1)
    t = rng.integers(1, 100, size=200)
    data = [obs(0, int(x), True) for x in t]
    # oracle: per-subject step function dropping to 0 at the true event time
    preds = [SurvivalCurve(times=np.array([float(x)]), survival=np.array([0.0])) for x in t]
    for q in [0, 10, 50, 99]:
        assert brier_score(preds, data, q) == 0.0
    assert evaluate_ibs(preds, data) == 0.0


def test_brier_constant_half_uncensored():
    data = [obs(0, t, True) for t in (3, 7, 11, 19)]
    preds = [SurvivalCurve(times=np.array([0.0]), survival=np.array([0.5]))] * 4
    grid = default_ibs_grid(data)
    for t in grid:
        assert brier_score(preds, data, t) == pytest.approx(0.25, abs=0)
    assert evaluate_ibs(preds, data, grid) == pytest.approx(0.25, abs=1e-15)


def test_brier_censored_contribute_zero():
    data = [obs(0, 5, False), obs(0, 10, True)]
    preds = [SurvivalCurve(times=np.array([0.0]), survival=np.array([1.0]))] * 2
    # at t=7 the censored subject contributes nothing; the survivor
    # contributes (1-1)^2 = 0
    assert brier_score(preds, data, 7) == 0.0


def test_ibs_validation():
    with pytest.raises(ValueError):
        integrated_brier_score([0.1], [1.0])
    with pytest.raises(ValueError):
        integrated_brier_score([0.1, 0.2], [2.0, 1.0])
    with pytest.raises(BrierError):
        # the censoring KM hits zero at t=3, so the late entrant still at
        # risk past t cannot be weighted
        data = [obs(0, 3, False), obs(4, 5, True)]
        preds = [SurvivalCurve(times=np.array([0.0]), survival=np.array([0.5]))] * 2
        brier_score(preds, data, 4.5)


def test_default_grid_properties():
    rng = np.random.default_rng(2)
    data = [obs(0, int(t) + 1, True) for t in rng.exponential(40, 300)]
    grid = default_ibs_grid(data)
    assert grid[0] == 0.0
    assert np.all(np.diff(grid) > 0)
    assert grid[-1] <= np.percentile([o.exit_day for o in data], 95)


def test_observation_validation():
    with pytest.raises(ValueError):
        obs(3, 3, True)
    with pytest.raises(ValueError):
        obs(-1, 3, True)
