"""Backend-agreement tests between the compiled and numpy split kernels."""

import numpy as np
import pytest

from churnkit.forest import _split_py

_split_cy = pytest.importorskip("churnkit.forest._split_cy")


def random_problem(rng, n=400):
    x = rng.normal(size=n)
    if rng.random() < 0.3:
        x = np.round(x)  # heavy ties
    thresholds = np.unique(np.quantile(x, rng.random(20)))[:-1]
    if thresholds.size == 0:
        thresholds = np.array([float(x.min())])
    exit_ = rng.integers(1, 60, size=n).astype(np.int64)
    event = rng.random(n) < rng.uniform(0.2, 0.9)
    times = np.unique(exit_[event])
    K = max(times.size, 1)
    entry = np.minimum(rng.integers(0, 30, size=n), exit_ - 1).astype(np.int64)
    lo = np.searchsorted(times, entry, side="right").astype(np.int64)
    hi = (np.searchsorted(times, exit_, side="right") - 1).astype(np.int64)
    death_k = np.where(event, np.searchsorted(times, exit_, side="left"), -1).astype(np.int64)
    d = np.bincount(death_k[event], minlength=K).astype(np.float64)
    diff = np.zeros(K + 1, dtype=np.int64)
    np.add.at(diff, np.clip(lo, 0, K), 1)
    np.add.at(diff, np.clip(hi + 1, 0, K), -1)
    n_tot = np.cumsum(diff[:K]).astype(np.float64)
    return x, np.ascontiguousarray(thresholds, dtype=float), lo, hi, death_k, d, n_tot


def test_logrank_split_backends_agree():
    rng = np.random.default_rng(0)
    for _ in range(50):
        x, thr, lo, hi, death_k, d, n_tot = random_problem(rng)
        args = (x, thr, lo, hi, death_k, d, n_tot, 5)
        i_py, s_py = _split_py.best_logrank_split(*args)
        i_cy, s_cy = _split_cy.best_logrank_split(*args)
        assert i_py == i_cy
        assert s_py == pytest.approx(s_cy, rel=1e-12, abs=1e-12)


def test_poisson_split_backends_agree():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, thr, *_ = random_problem(rng)
        delta = (rng.random(len(x)) < 0.5).astype(np.float64)
        expected = rng.random(len(x)) + 0.01
        args = (x, thr, delta, expected, 5)
        i_py, g_py = _split_py.best_poisson_split(*args)
        i_cy, g_cy = _split_cy.best_poisson_split(*args)
        assert i_py == i_cy
        assert g_py == pytest.approx(g_cy, rel=1e-12, abs=1e-12)


def test_logrank_split_finds_planted_threshold():
    """Group separation at x=0 with far later deaths above the cut."""
    rng = np.random.default_rng(2)
    n = 300
    x = np.r_[rng.uniform(-1, 0, n // 2), rng.uniform(0.5, 1.5, n // 2)]
    exit_ = np.r_[rng.integers(1, 15, n // 2), rng.integers(40, 60, n // 2)].astype(np.int64)
    event = np.ones(n, dtype=bool)
    times = np.unique(exit_)
    lo = np.zeros(n, dtype=np.int64)
    hi = (np.searchsorted(times, exit_, side="right") - 1).astype(np.int64)
    death_k = np.searchsorted(times, exit_, side="left").astype(np.int64)
    d = np.bincount(death_k, minlength=times.size).astype(np.float64)
    diff = np.zeros(times.size + 1, dtype=np.int64)
    np.add.at(diff, lo, 1)
    np.add.at(diff, hi + 1, -1)
    n_tot = np.cumsum(diff[: times.size]).astype(np.float64)
    thr = np.linspace(-1, 1.4, 25)
    j, stat = _split_py.best_logrank_split(x, thr, lo, hi, death_k, d, n_tot, 5)
    assert -0.1 < thr[j] < 0.55
    assert stat > 100


def test_min_child_blocks_splits():
    rng = np.random.default_rng(3)
    x, thr, lo, hi, death_k, d, n_tot = random_problem(rng, n=8)
    j, stat = _split_py.best_logrank_split(x, thr, lo, hi, death_k, d, n_tot, 10)
    assert j == -1 and stat == 0.0
