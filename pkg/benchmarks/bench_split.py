"""Benchmark the compiled split-search kernel against the numpy fallback.

Usage: python3 benchmarks/bench_split.py [n_rows] [n_thresholds] [repeats]
"""

import sys
import time

import numpy as np

from churnkit.forest import _split_py

try:
    from churnkit.forest import _split_cy
except ImportError:
    _split_cy = None


def make_problem(rng, n, n_thresh):
    x = rng.normal(size=n)
    thresholds = np.quantile(x, np.linspace(0.05, 0.95, n_thresh))
    exit_ = rng.integers(1, 200, size=n).astype(np.int64)
    event = rng.random(n) < 0.6
    times = np.unique(exit_[event])
    k = times.size
    # inclusive at-risk index ranges [lo, hi] per row
    lo = np.zeros(n, dtype=np.int64)
    hi = np.maximum(np.searchsorted(times, exit_, side="right") - 1, 0).astype(np.int64)
    death_k = np.where(event, np.searchsorted(times, exit_), -1).astype(np.int64)
    d_tot = np.bincount(death_k[death_k >= 0], minlength=k).astype(np.float64)
    n_tot = np.zeros(k)
    for j in range(k):
        n_tot[j] = np.sum((lo <= j) & (j <= hi))
    return x, np.asarray(thresholds), lo, hi, death_k, d_tot, n_tot


def bench(fn, args, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
    n_thresh = int(sys.argv[2]) if len(sys.argv) > 2 else 50
    repeats = int(sys.argv[3]) if len(sys.argv) > 3 else 5
    rng = np.random.default_rng(0)
    x, thresholds, lo, hi, death_k, d_tot, n_tot = make_problem(rng, n, n_thresh)
    args = (x, thresholds, lo, hi, death_k, d_tot, n_tot, 5)

    t_py, out_py = bench(_split_py.best_logrank_split, args, repeats)
    print(f"logrank  python : {t_py * 1e3:8.2f} ms  -> idx={out_py[0]} stat={out_py[1]:.6f}")
    if _split_cy is not None:
        t_cy, out_cy = bench(_split_cy.best_logrank_split, args, repeats)
        print(f"logrank  cython : {t_cy * 1e3:8.2f} ms  -> idx={out_cy[0]} stat={out_cy[1]:.6f}")
        assert out_py[0] == out_cy[0] and abs(out_py[1] - out_cy[1]) < 1e-9
        print(f"logrank  speedup: {t_py / t_cy:8.2f}x")
    else:
        print("cython kernel unavailable")

    delta = (death_k >= 0).astype(np.float64)
    expected = rng.random(n) + 0.05
    pargs = (x, thresholds, delta, expected, 5)
    t_py, out_py = bench(_split_py.best_poisson_split, pargs, repeats)
    print(f"poisson  python : {t_py * 1e3:8.2f} ms  -> idx={out_py[0]} gain={out_py[1]:.6f}")
    if _split_cy is not None:
        t_cy, out_cy = bench(_split_cy.best_poisson_split, pargs, repeats)
        print(f"poisson  cython : {t_cy * 1e3:8.2f} ms  -> idx={out_cy[0]} gain={out_cy[1]:.6f}")
        assert out_py[0] == out_cy[0] and abs(out_py[1] - out_cy[1]) < 1e-9
        print(f"poisson  speedup: {t_py / t_cy:8.2f}x")


if __name__ == "__main__":
    main()
