"""Pure-numpy split-search kernels (fallback when the compiled core is absent).

Both kernels scan candidate thresholds over one feature at a tree node.
Rows are described positionally: ``lo[i]``/``hi[i]`` bound the (inclusive)
range of node event-time indices at which row i is at risk, and
``death_k[i]`` is the event-time index of row i's event (-1 if censored).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def best_logrank_split(x, thresholds, lo, hi, death_k, d_tot, n_tot, min_child):
    """Best two-sample log-rank split over ascending thresholds.

    Returns ``(best_index, best_stat)`` with best_index = -1 when no
    threshold yields a valid split (child sizes below min_child or zero
    log-rank variance).
    """
    n = len(x)
    K = len(d_tot)
    order = np.argsort(x, kind="stable")
    diff = np.zeros(K + 1, dtype=np.int64)
    d1 = np.zeros(K, dtype=np.int64)
    best_idx = -1
    best_stat = 0.0
    ptr = 0
    n_left = 0
    for j, thr in enumerate(thresholds):
        while ptr < n and x[order[ptr]] <= thr:
            i = order[ptr]
            diff[lo[i]] += 1
            diff[hi[i] + 1] -= 1
            if death_k[i] >= 0:
                d1[death_k[i]] += 1
            n_left += 1
            ptr += 1
        if n_left < min_child or n - n_left < min_child:
            continue
        n1 = np.cumsum(diff[:K])
        observed = float(d1.sum())
        frac = np.where(n_tot > 0, n1 / n_tot, 0.0)
        expected = float(np.sum(d_tot * frac))
        with np.errstate(invalid="ignore", divide="ignore"):
            var_terms = np.where(
                n_tot > 1,
                d_tot * frac * (1.0 - frac) * (n_tot - d_tot) / (n_tot - 1.0),
                0.0,
            )
        variance = float(np.sum(var_terms))
        if variance <= 0.0:
            continue
        stat = (observed - expected) ** 2 / variance
        if stat > best_stat:
            best_stat = stat
            best_idx = j
    return best_idx, best_stat


def best_poisson_split(x, thresholds, delta, expected_events, min_child):
    """Best Poisson-deviance (relative-risk) split over ascending thresholds.

    Gain = D_L log(D_L/E_L) + D_R log(D_R/E_R); splits with zero events or
    zero expected events in either child are disallowed.
    """
    n = len(x)
    order = np.argsort(x, kind="stable")
    d_total = float(np.sum(delta))
    e_total = float(np.sum(expected_events))
    best_idx = -1
    best_gain = 0.0
    ptr = 0
    d_left = 0.0
    e_left = 0.0
    n_left = 0
    for j, thr in enumerate(thresholds):
        while ptr < n and x[order[ptr]] <= thr:
            i = order[ptr]
            d_left += float(delta[i])
            e_left += float(expected_events[i])
            n_left += 1
            ptr += 1
        d_right = d_total - d_left
        e_right = e_total - e_left
        if n_left < min_child or n - n_left < min_child:
            continue
        if d_left <= 0.0 or d_right <= 0.0 or e_left <= 0.0 or e_right <= 0.0:
            continue
        gain = d_left * np.log(d_left / e_left) + d_right * np.log(d_right / e_right)
        if gain > best_gain:
            best_gain = float(gain)
            best_idx = j
    return best_idx, best_gain
