"""Training-data assembly for the survival forests.

Turns a cohort panel into labeled survival observations (lifetime = days
between first and last login, event = terminal inactivity beyond the churn
horizon) and, for the LTRC models, into per-user pseudo-observations whose
covariates are interval-constant snapshots of the engineered features.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..panel import CohortPanel
from ..survival import SurvivalObservation

INTERVAL_DAYS = {"day": 1, "week": 7, "month": 30}


@dataclass
class SurvivalDataset:
    """Flat row matrix for forest training (one row per pseudo-observation)."""

    X: np.ndarray  # (n_rows, p) float64
    entry: np.ndarray  # (n_rows,) int64
    exit: np.ndarray  # (n_rows,) int64
    event: np.ndarray  # (n_rows,) bool
    subject: np.ndarray  # (n_rows,) int64 codes into subject_ids
    subject_ids: List[str]
    feature_names: List[str]

    @property
    def n_rows(self) -> int:
        return len(self.entry)

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subject_rows(self, code: int) -> np.ndarray:
        return np.flatnonzero(self.subject == code)

    def subject_observation(self, code: int) -> SurvivalObservation:
        rows = self.subject_rows(code)
        return SurvivalObservation(
            entry_day=int(self.entry[rows].min()),
            exit_day=int(self.exit[rows].max()),
            event=bool(self.event[rows].any()),
        )

    def validate(self) -> None:
        if not np.all(self.entry < self.exit):
            raise ValueError("entry_day must precede exit_day in every row")
        if np.any(~np.isfinite(self.X)):
            raise ValueError("feature matrix contains non-finite values")


def default_feature_columns(panel: CohortPanel) -> List[str]:
    # lifetime_days and week_of_year are excluded: snapshotted at the last
    # active day they are functions of the survival label itself whenever
    # enrollment is concentrated in time (the truncation times already encode
    # age); pass feature_cols explicitly to include them anyway
    return [c for c in panel.metric_columns if c not in ("logged_in", "lifetime_days", "week_of_year")]


def label_churn(panel: CohortPanel, churn_k: int) -> Tuple[Dict[str, SurvivalObservation], List[str]]:
    """Label each user's lifetime, marking churn when the terminal gap exceeds k.

    Users with a single login day (zero-length lifetime) are dropped with a
    warning.  Returns (labels by user, warnings).
    """
    if churn_k < 1:
        raise ValueError("churn_k must be >= 1")
    labels: Dict[str, SurvivalObservation] = {}
    warnings: List[str] = []
    for uid in panel.users:
        offs = panel.login_offsets(uid)
        duration = int(offs[-1])
        if duration == 0:
            warnings.append(f"{uid}: zero-length lifetime dropped")
            continue
        terminal_gap = panel.observation_days(uid) - duration
        labels[uid] = SurvivalObservation(entry_day=0, exit_day=duration, event=terminal_gap > churn_k)
    return labels, warnings


def pseudo_observations(
    panel: CohortPanel,
    user_id: str,
    label: SurvivalObservation,
    feature_cols: Sequence[str],
    interval: str = "week",
) -> List[Tuple[int, int, bool, np.ndarray]]:
    """Cut one user's lifetime at interval boundaries into LTRC rows.

    Each segment (a, b] carries the engineered features as observed on the
    calendar day entering the segment; the event flag sits on the final
    segment only.  Segment lengths partition the labeled duration exactly.
    """
    if interval not in INTERVAL_DAYS:
        raise ValueError(f"unknown interval {interval!r}")
    step = INTERVAL_DAYS[interval]
    duration = label.exit_day
    cuts = list(range(0, duration, step)) + [duration]
    cols = {c: panel.user_values(user_id, c) for c in feature_cols}
    rows = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        feats = np.array([float(cols[c][a]) for c in feature_cols])
        rows.append((a, b, bool(label.event) and b == duration, feats))
    return rows


def build_static_dataset(
    panel: CohortPanel,
    churn_k: int,
    feature_cols: Optional[Sequence[str]] = None,
) -> SurvivalDataset:
    """One row per user: features snapshotted at the last active (login) day."""
    feature_cols = list(feature_cols) if feature_cols is not None else default_feature_columns(panel)
    labels, _ = label_churn(panel, churn_k)
    subject_ids = sorted(labels)
    X = np.empty((len(subject_ids), len(feature_cols)))
    entry = np.zeros(len(subject_ids), dtype=np.int64)
    exit_ = np.empty(len(subject_ids), dtype=np.int64)
    event = np.empty(len(subject_ids), dtype=bool)
    for i, uid in enumerate(subject_ids):
        lab = labels[uid]
        last_active = int(panel.login_offsets(uid)[-1])
        for j, c in enumerate(feature_cols):
            X[i, j] = float(panel.user_values(uid, c)[last_active])
        exit_[i] = lab.exit_day
        event[i] = lab.event
    ds = SurvivalDataset(
        X=X,
        entry=entry,
        exit=exit_,
        event=event,
        subject=np.arange(len(subject_ids), dtype=np.int64),
        subject_ids=subject_ids,
        feature_names=list(feature_cols),
    )
    ds.validate()
    return ds


def build_pseudo_dataset(
    panel: CohortPanel,
    churn_k: int,
    interval: str = "week",
    feature_cols: Optional[Sequence[str]] = None,
) -> SurvivalDataset:
    """Pseudo-observation rows for the LTRC forests (whole users stay together)."""
    feature_cols = list(feature_cols) if feature_cols is not None else default_feature_columns(panel)
    labels, _ = label_churn(panel, churn_k)
    subject_ids = sorted(labels)
    X_rows, entry, exit_, event, subject = [], [], [], [], []
    for code, uid in enumerate(subject_ids):
        for a, b, ev, feats in pseudo_observations(panel, uid, labels[uid], feature_cols, interval):
            X_rows.append(feats)
            entry.append(a)
            exit_.append(b)
            event.append(ev)
            subject.append(code)
    ds = SurvivalDataset(
        X=np.vstack(X_rows),
        entry=np.asarray(entry, dtype=np.int64),
        exit=np.asarray(exit_, dtype=np.int64),
        event=np.asarray(event, dtype=bool),
        subject=np.asarray(subject, dtype=np.int64),
        subject_ids=subject_ids,
        feature_names=list(feature_cols),
    )
    ds.validate()
    return ds
