"""Survival forest learners.

Three ensemble variants share one recursive partitioner:

* ``csf``      - conditional inference survival forest on static rows
                 (feature chosen by the smallest p-value of a standardized
                 log-rank linear statistic, split point by the best
                 two-sample log-rank statistic);
* ``ltrc_cif`` - the same splitting on left-truncated pseudo-observations,
                 with whole users kept together during resampling;
* ``ltrc_rrf`` - relative-risk trees splitting by one-step Poisson deviance
                 against the node's Nelson-Aalen baseline, leaves holding
                 risk multipliers over the tree baseline hazard.

Fitting is deterministic in the seed for any worker count: each tree draws
its randomness from a spawned substream, and trees are collected in
dispatch order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..survival import StepFunction, SurvivalCurve
from . import _kernels
from .data import SurvivalDataset

ALGORITHMS = ("csf", "ltrc_cif", "ltrc_rrf")


@dataclass(frozen=True)
class Hyperparams:
    ntree: int = 100
    mtry: Optional[int] = None  # default ceil(sqrt(p))
    alpha: float = 0.05  # Bonferroni-adjusted stopping level (csf / ltrc_cif)
    min_node_size: int = 20  # subjects required to attempt a split
    max_split_points: int = 50
    min_child: int = 5  # rows required on each side of a split
    small_node_cutoff: int = 30  # below this, permutation p-values
    small_node_perms: int = 200
    bootstrap: bool = True

    def resolve_mtry(self, p: int) -> int:
        m = self.mtry if self.mtry is not None else math.ceil(math.sqrt(p))
        return max(1, min(m, p))


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = float("nan")
    stat: float = 0.0
    p_value: float = 1.0
    left: int = -1
    right: int = -1
    # leaf payloads
    leaf_times: Optional[np.ndarray] = None  # csf / ltrc_cif: node KM support
    leaf_surv: Optional[np.ndarray] = None
    leaf_risk: float = 1.0  # ltrc_rrf: relative risk over the tree baseline

    @property
    def is_leaf(self) -> bool:
        return self.left < 0


@dataclass
class Tree:
    nodes: List[TreeNode]
    baseline: Optional[StepFunction] = None  # ltrc_rrf cumulative hazard

    def leaf_for(self, x: np.ndarray) -> TreeNode:
        node = self.nodes[0]
        while not node.is_leaf:
            node = self.nodes[node.left] if x[node.feature] <= node.threshold else self.nodes[node.right]
        return node


@dataclass
class ForestModel:
    algorithm: str
    trees: List[Tree]
    hyper: Hyperparams
    feature_names: List[str]
    seed: int
    time_grid: np.ndarray
    importance: Optional[np.ndarray] = None
    format_version: int = 1


# ---------------------------------------------------------------------------
# node-level machinery


def _node_tables(entry: np.ndarray, exit_: np.ndarray, event: np.ndarray):
    """Event-time grid plus per-row at-risk index ranges for a node.

    Row i is at risk at event-time index k iff lo[i] <= k <= hi[i];
    death_k[i] is the index of row i's event time (-1 when censored).
    """
    times = np.unique(exit_[event])
    K = times.size
    lo = np.searchsorted(times, entry, side="right").astype(np.int64)
    hi = (np.searchsorted(times, exit_, side="right") - 1).astype(np.int64)
    death_k = np.where(event, np.searchsorted(times, exit_, side="left"), -1).astype(np.int64)
    d = np.bincount(death_k[event], minlength=K).astype(np.float64) if K else np.empty(0)
    diff = np.zeros(K + 1, dtype=np.int64)
    if K:
        np.add.at(diff, lo, 1)
        np.add.at(diff, hi + 1, -1)
    n = np.cumsum(diff[:K]).astype(np.float64)
    return times, lo, hi, death_k, d, n


def _node_km(entry, exit_, event) -> Tuple[np.ndarray, np.ndarray]:
    times, _, _, _, d, n = _node_tables(entry, exit_, event)
    if times.size == 0:
        return times, np.empty(0)
    return times, np.cumprod(1.0 - d / n)


def _node_na(entry, exit_, event) -> StepFunction:
    times, _, _, _, d, n = _node_tables(entry, exit_, event)
    values = np.cumsum(d / n) if times.size else np.empty(0)
    return StepFunction(times=times.astype(float), values=values, baseline=0.0)


def _logrank_scores(lo, hi, death_k, d, n, event) -> np.ndarray:
    """Martingale-residual log-rank scores a_i = delta_i - (H(exit) - H(entry))."""
    if d.size == 0:
        return np.zeros(len(lo))
    hcum = np.r_[0.0, np.cumsum(d / n)]
    h_exit = hcum[np.clip(hi + 1, 0, d.size)]
    h_entry = hcum[np.clip(lo, 0, d.size)]
    return event.astype(float) - (h_exit - h_entry)


def _association_pvalue(x: np.ndarray, scores: np.ndarray, hyper: Hyperparams, rng) -> Tuple[float, float]:
    """Two-sided p-value of the standardized linear statistic T = sum a_i x_i.

    Asymptotic normal approximation; Monte Carlo permutation below the
    small-node cutoff.
    """
    n = len(x)
    t_obs = float(scores @ x)
    mu = n * scores.mean() * x.mean()
    if n < hyper.small_node_cutoff:
        perms = hyper.small_node_perms
        hits = 0
        for _ in range(perms):
            t_b = float(scores @ rng.permutation(x))
            if abs(t_b - mu) >= abs(t_obs - mu) - 1e-12:
                hits += 1
        p = (1 + hits) / (perms + 1)
        z = abs(t_obs - mu)
        return z, p
    var = scores.var(ddof=0) * n * x.var(ddof=0) * n / (n - 1)
    if var <= 0:
        return 0.0, 1.0
    z = abs(t_obs - mu) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return z, p


def _candidate_thresholds(x: np.ndarray, max_points: int) -> np.ndarray:
    uv = np.unique(x)
    if uv.size < 2:
        return np.empty(0)
    thr = uv[:-1]  # splitting at the max leaves the right child empty
    if thr.size > max_points:
        idx = np.linspace(0, thr.size - 1, max_points).round().astype(int)
        thr = thr[np.unique(idx)]
    return thr.astype(float)


# ---------------------------------------------------------------------------
# tree growing


def _grow(
    ds: SurvivalDataset,
    rows: np.ndarray,
    hyper: Hyperparams,
    rng,
    algorithm: str,
    nodes: List[TreeNode],
    tree_baseline: Optional[StepFunction],
) -> int:
    node_id = len(nodes)
    node = TreeNode()
    nodes.append(node)
    entry = ds.entry[rows]
    exit_ = ds.exit[rows]
    event = ds.event[rows]
    n_subjects = len(np.unique(ds.subject[rows]))

    split = None
    if n_subjects >= hyper.min_node_size and event.any():
        times, lo, hi, death_k, d, n = _node_tables(entry, exit_, event)
        p_feat = ds.n_features
        mtry = hyper.resolve_mtry(p_feat)
        feats = np.sort(rng.choice(p_feat, size=mtry, replace=False))
        if algorithm in ("csf", "ltrc_cif"):
            scores = _logrank_scores(lo, hi, death_k, d, n, event)
            best_feat, best_p, best_z = -1, 2.0, 0.0
            tested = 0
            for f in feats:
                x = ds.X[rows, f]
                if x.max() == x.min():
                    continue
                tested += 1
                z, p = _association_pvalue(x, scores, hyper, rng)
                if p < best_p or (p == best_p and f < best_feat):
                    best_feat, best_p, best_z = int(f), p, z
            if tested and min(1.0, best_p * tested) <= hyper.alpha:
                x = np.ascontiguousarray(ds.X[rows, best_feat], dtype=np.float64)
                thr = _candidate_thresholds(x, hyper.max_split_points)
                if thr.size:
                    j, stat = _kernels.best_logrank_split(
                        x, thr, lo, hi, death_k, d, n, hyper.min_child
                    )
                    if j >= 0:
                        split = (best_feat, float(thr[j]), float(stat), float(best_p))
        else:  # ltrc_rrf
            baseline = _node_na(entry, exit_, event)
            e_j = baseline.evaluate(exit_) - baseline.evaluate(entry)
            delta = event.astype(np.float64)
            best = None
            for f in feats:
                x = np.ascontiguousarray(ds.X[rows, f], dtype=np.float64)
                if x.max() == x.min():
                    continue
                thr = _candidate_thresholds(x, hyper.max_split_points)
                if not thr.size:
                    continue
                j, gain = _kernels.best_poisson_split(
                    x, thr, delta, np.ascontiguousarray(e_j), hyper.min_child
                )
                if j >= 0 and gain > 0 and (best is None or gain > best[2]):
                    best = (int(f), float(thr[j]), float(gain))
            if best is not None:
                split = (best[0], best[1], best[2], 1.0)

    if split is None:
        # leaf payloads
        if algorithm in ("csf", "ltrc_cif"):
            lt, lsurv = _node_km(entry, exit_, event)
            node.leaf_times = lt.astype(float)
            node.leaf_surv = lsurv
        else:
            e_tree = tree_baseline.evaluate(exit_) - tree_baseline.evaluate(entry)
            e_sum = float(e_tree.sum())
            node.leaf_risk = float(event.sum() / e_sum) if e_sum > 0 else 1.0
        return node_id

    feat, thr, stat, p_value = split
    mask = ds.X[rows, feat] <= thr
    node.feature = feat
    node.threshold = thr
    node.stat = stat
    node.p_value = p_value
    node.left = _grow(ds, rows[mask], hyper, rng, algorithm, nodes, tree_baseline)
    node.right = _grow(ds, rows[~mask], hyper, rng, algorithm, nodes, tree_baseline)
    return node_id


def _recalibrate_rrf(tree: Tree, ds: SurvivalDataset, rows: np.ndarray, iters: int = 3) -> None:
    """Alternate leaf risks and a Breslow (risk-weighted Nelson-Aalen) baseline.

    The one-step leaf risks D/E are computed against the node's marginal
    hazard, which miscalibrates exp(-r*H0) whenever risks are heterogeneous;
    a few fixed-point sweeps of r -> H0(t) = sum d_k / sum_{at risk} r_i
    restore the proper partial-likelihood baseline.
    """
    entry = ds.entry[rows]
    exit_ = ds.exit[rows]
    event = ds.event[rows]
    times, lo, hi, death_k, d, _ = _node_tables(entry, exit_, event)
    if times.size == 0:
        return
    leaves = [node for node in tree.nodes if node.is_leaf]
    leaf_index = {id(node): i for i, node in enumerate(leaves)}
    code = np.array([leaf_index[id(tree.leaf_for(ds.X[r]))] for r in rows])
    K = times.size
    baseline = tree.baseline
    risks = np.ones(len(leaves))
    for _ in range(iters):
        e_j = baseline.evaluate(exit_) - baseline.evaluate(entry)
        for i in range(len(leaves)):
            mask = code == i
            e_sum = float(e_j[mask].sum())
            risks[i] = float(event[mask].sum() / e_sum) if e_sum > 0 else 1.0
        r_row = risks[code]
        # at-risk risk totals via a difference array over event-time indices
        diff = np.zeros(K + 1)
        np.add.at(diff, lo, r_row)
        np.add.at(diff, hi + 1, -r_row)
        denom = np.cumsum(diff[:K])
        with np.errstate(divide="ignore", invalid="ignore"):
            inc = np.where(denom > 0, d / denom, 0.0)
        baseline = StepFunction(times=times.astype(float), values=np.cumsum(inc), baseline=0.0)
    tree.baseline = baseline
    for i, node in enumerate(leaves):
        node.leaf_risk = float(risks[i])


def _bootstrap_rows(ds: SurvivalDataset, rng) -> np.ndarray:
    """Resample whole subjects with replacement (row order follows the draw)."""
    codes = rng.integers(0, ds.n_subjects, size=ds.n_subjects)
    if ds.n_rows == ds.n_subjects:
        return codes.astype(np.int64)
    parts = [ds.subject_rows(int(c)) for c in codes]
    return np.concatenate(parts)


def _fit_tree(ds: SurvivalDataset, hyper: Hyperparams, seed_seq, algorithm: str) -> Tree:
    rng = np.random.default_rng(seed_seq)
    rows = _bootstrap_rows(ds, rng) if hyper.bootstrap else np.arange(ds.n_rows, dtype=np.int64)
    baseline = None
    if algorithm == "ltrc_rrf":
        baseline = _node_na(ds.entry[rows], ds.exit[rows], ds.event[rows])
    nodes: List[TreeNode] = []
    _grow(ds, rows, hyper, rng, algorithm, nodes, baseline)
    tree = Tree(nodes=nodes, baseline=baseline)
    if algorithm == "ltrc_rrf":
        # recalibrate on the full training data (partially out-of-bag), which
        # tempers leaf risks overfit to the bootstrap draw
        _recalibrate_rrf(tree, ds, np.arange(ds.n_rows, dtype=np.int64))
    return tree


def fit_forest(
    ds: SurvivalDataset,
    hyper: Hyperparams = Hyperparams(),
    seed: int = 0,
    algorithm: str = "csf",
    n_jobs: int = 1,
) -> ForestModel:
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if algorithm == "csf" and np.any(ds.entry != 0):
        raise ValueError("csf requires untruncated rows (entry_day == 0)")
    children = np.random.SeedSequence(seed).spawn(hyper.ntree)
    if n_jobs == 1:
        trees = [_fit_tree(ds, hyper, c, algorithm) for c in children]
    else:
        trees = Parallel(n_jobs=n_jobs)(delayed(_fit_tree)(ds, hyper, c, algorithm) for c in children)
    time_grid = np.unique(ds.exit[ds.event]).astype(float)
    if time_grid.size == 0:
        time_grid = np.unique(ds.exit).astype(float)
    return ForestModel(
        algorithm=algorithm,
        trees=trees,
        hyper=hyper,
        feature_names=list(ds.feature_names),
        seed=seed,
        time_grid=time_grid,
    )


def fit_csf(ds: SurvivalDataset, hyper: Hyperparams = Hyperparams(), seed: int = 0, n_jobs: int = 1) -> ForestModel:
    return fit_forest(ds, hyper, seed, "csf", n_jobs)


def fit_ltrc_cif(ds: SurvivalDataset, hyper: Hyperparams = Hyperparams(), seed: int = 0, n_jobs: int = 1) -> ForestModel:
    return fit_forest(ds, hyper, seed, "ltrc_cif", n_jobs)


def fit_ltrc_rrf(ds: SurvivalDataset, hyper: Hyperparams = Hyperparams(), seed: int = 0, n_jobs: int = 1) -> ForestModel:
    return fit_forest(ds, hyper, seed, "ltrc_rrf", n_jobs)


# ---------------------------------------------------------------------------
# prediction


def _eval_step_curve(times: np.ndarray, surv: np.ndarray, t: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(times, t, side="right")
    return np.r_[1.0, surv][idx]


def _tree_survival_on_grid(tree: Tree, algorithm: str, segments, grid: np.ndarray) -> np.ndarray:
    """Survival over the grid for one subject's covariate path in one tree.

    ``segments`` is a list of (start, end, x) with end = inf on the final
    segment; survival past a segment boundary multiplies the conditional
    survival of the following segments' leaves.
    """
    if algorithm == "ltrc_rrf":
        cum = np.zeros(grid.size)
        for start, end, x in segments:
            leaf = tree.leaf_for(x)
            upper = np.minimum(grid, end)
            inc = tree.baseline.evaluate(upper) - tree.baseline.evaluate(start)
            cum += leaf.leaf_risk * np.maximum(inc, 0.0) * (grid > start)
        return np.exp(-cum)
    surv = np.ones(grid.size)
    for start, end, x in segments:
        leaf = tree.leaf_for(x)
        active = grid > start
        if not active.any():
            continue
        upper = np.minimum(grid[active], end)
        s_end = _eval_step_curve(leaf.leaf_times, leaf.leaf_surv, upper)
        s_start = float(_eval_step_curve(leaf.leaf_times, leaf.leaf_surv, np.array([start]))[0])
        cond = s_end / s_start if s_start > 0 else np.zeros_like(s_end)
        surv[active] = surv[active] * cond
    return surv


def subject_segments(ds: SurvivalDataset, code: int) -> List[Tuple[float, float, np.ndarray]]:
    """Ordered covariate path of a subject; the last segment extends to +inf."""
    rows = ds.subject_rows(code)
    rows = rows[np.argsort(ds.entry[rows], kind="stable")]
    segs = []
    for i, r in enumerate(rows):
        end = float("inf") if i == len(rows) - 1 else float(ds.exit[r])
        segs.append((float(ds.entry[r]), end, ds.X[r]))
    return segs


def predict_curves(
    model: ForestModel,
    ds: SurvivalDataset,
    grid: Optional[np.ndarray] = None,
    n_jobs: int = 1,
) -> List[SurvivalCurve]:
    """Per-subject survival curves averaged over the ensemble."""
    grid = model.time_grid if grid is None else np.asarray(grid, dtype=float)

    def _one(code: int) -> SurvivalCurve:
        segs = subject_segments(ds, code)
        acc = np.zeros(grid.size)
        for tree in model.trees:
            acc += _tree_survival_on_grid(tree, model.algorithm, segs, grid)
        return SurvivalCurve(times=grid, survival=acc / len(model.trees))

    codes = range(ds.n_subjects)
    if n_jobs == 1:
        return [_one(c) for c in codes]
    return Parallel(n_jobs=n_jobs)(delayed(_one)(c) for c in codes)
