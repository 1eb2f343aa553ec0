"""Bootstrap evaluation protocol for the survival forests.

Each round draws a user-level train/validation split (default 75/25), fits
the requested model on the training users and scores the held-out users by
IPCW integrated Brier score.  Feature importances are permutation-based:
the held-out IBS increase after permuting one feature column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..survival import SurvivalObservation, default_ibs_grid, evaluate_ibs, kaplan_meier
from .data import SurvivalDataset
from .trees import ForestModel, Hyperparams, fit_forest, predict_curves


class EvaluationError(Exception):
    pass


@dataclass
class EvaluationReport:
    per_round_ibs: List[float]
    importances: np.ndarray  # averaged over rounds, aligned with feature_names
    feature_names: List[str]
    skipped_rounds: List[int] = field(default_factory=list)

    @property
    def ibs_boot_avg(self) -> float:
        return float(np.mean(self.per_round_ibs))


def subset_subjects(ds: SurvivalDataset, codes: Sequence[int]) -> SurvivalDataset:
    """Rows of the chosen subjects, with subject codes renumbered densely."""
    codes = list(codes)
    remap = {c: i for i, c in enumerate(codes)}
    mask = np.isin(ds.subject, codes)
    rows = np.flatnonzero(mask)
    return SurvivalDataset(
        X=ds.X[rows].copy(),
        entry=ds.entry[rows].copy(),
        exit=ds.exit[rows].copy(),
        event=ds.event[rows].copy(),
        subject=np.array([remap[int(c)] for c in ds.subject[rows]], dtype=np.int64),
        subject_ids=[ds.subject_ids[c] for c in codes],
        feature_names=list(ds.feature_names),
    )


def subject_observations(ds: SurvivalDataset) -> List[SurvivalObservation]:
    return [ds.subject_observation(c) for c in range(ds.n_subjects)]


def km_null_ibs(
    train_obs: Sequence[SurvivalObservation],
    test_obs: Sequence[SurvivalObservation],
    grid: Optional[np.ndarray] = None,
) -> float:
    """IBS of the no-covariate null: the training KM applied to every subject."""
    km = kaplan_meier(train_obs, conf_band=False)
    preds = [km] * len(test_obs)
    return evaluate_ibs(preds, test_obs, grid)


def round_seed_sequences(seed: int, b: int):
    """One spawned substream per bootstrap round (split, fit, permutation)."""
    return np.random.SeedSequence(seed).spawn(b)


def evaluate_round(
    ds: SurvivalDataset,
    algorithm: str,
    hyper: Hyperparams,
    seed_seq,
    split: float,
    compute_importance: bool = True,
    n_jobs: int = 1,
):
    """One train/validation round; returns (ibs, per-feature IBS increases)."""
    rng = np.random.default_rng(seed_seq)
    order = rng.permutation(ds.n_subjects)
    n_train = int(round(split * ds.n_subjects))
    train_codes = np.sort(order[:n_train])
    test_codes = np.sort(order[n_train:])
    train = subset_subjects(ds, train_codes)
    test = subset_subjects(ds, test_codes)
    test_obs = subject_observations(test)
    if not any(o.event for o in test_obs):
        return None, None

    fit_seed = int(rng.integers(0, 2**31 - 1))
    model = fit_forest(train, hyper, fit_seed, algorithm, n_jobs=n_jobs)
    grid = default_ibs_grid(test_obs)
    base_ibs = evaluate_ibs(predict_curves(model, test, n_jobs=n_jobs), test_obs, grid)

    importances = None
    if compute_importance:
        importances = np.zeros(ds.n_features)
        for f in range(ds.n_features):
            perm = test.X[:, f].copy()
            shuffled = rng.permutation(perm)
            test.X[:, f] = shuffled
            ibs_f = evaluate_ibs(predict_curves(model, test, n_jobs=n_jobs), test_obs, grid)
            test.X[:, f] = perm
            importances[f] = ibs_f - base_ibs
    return float(base_ibs), importances


def bootstrap_evaluate(
    ds: SurvivalDataset,
    algorithm: str = "csf",
    hyper: Hyperparams = Hyperparams(),
    b: int = 25,
    split: float = 0.75,
    seed: int = 0,
    compute_importance: bool = True,
    n_jobs: int = 1,
) -> EvaluationReport:
    """The b-round bootstrap evaluation with averaged permutation importances."""
    if b < 1:
        raise ValueError("b must be >= 1")
    if not (0 < split < 1):
        raise ValueError("split must lie in (0, 1)")
    seqs = round_seed_sequences(seed, b)
    per_round = []
    imp_rounds = []
    skipped = []
    for j, seq in enumerate(seqs):
        ibs, imp = evaluate_round(ds, algorithm, hyper, seq, split, compute_importance, n_jobs)
        if ibs is None:
            skipped.append(j)
            continue
        per_round.append(ibs)
        if imp is not None:
            imp_rounds.append(imp)
    if not per_round:
        raise EvaluationError("every bootstrap round had zero held-out events")
    importances = (
        np.mean(np.vstack(imp_rounds), axis=0) if imp_rounds else np.zeros(ds.n_features)
    )
    return EvaluationReport(
        per_round_ibs=per_round,
        importances=importances,
        feature_names=list(ds.feature_names),
        skipped_rounds=skipped,
    )


def select_top_features(report: EvaluationReport, m: int) -> List[str]:
    """The m most important features; ties break lexicographically by name."""
    if m < 1:
        raise ValueError("m must be >= 1")
    ranked = sorted(
        zip(report.feature_names, report.importances), key=lambda kv: (-kv[1], kv[0])
    )
    return [name for name, _ in ranked[:m]]
