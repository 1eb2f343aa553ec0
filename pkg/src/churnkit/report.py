"""Per-user report cards and cross-method churn comparisons."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import ecdf as ecdf_mod
from .ecdf import (
    DEFAULT_GAP_CUTOFF,
    GAP_METRIC,
    InsufficientHistoryError,
    build_ecdf,
    churn_risk_flag,
    equivalent_churn_definition,
    indicator,
)
from .panel import CohortPanel
from .rcmm import DEFAULT_K_GRID, find_churn_definition, rcmm_curve
from .score import ScoreSpec, score_series


@dataclass
class ReportCard:
    user_id: str
    as_of: date
    ecdf_endo: Optional[float]
    ecdf_exo: Optional[float]
    ecdf_snp: Optional[float]
    engagement_score: float
    equivalent_churn_days: Optional[int]
    survival_probability: Optional[float]
    flags: Dict[str, Optional[bool]]

    def to_row(self) -> Dict:
        row = {
            "user_id": self.user_id,
            "as_of": self.as_of.isoformat(),
            "ecdf_endo": self.ecdf_endo,
            "ecdf_exo": self.ecdf_exo,
            "ecdf_snp": self.ecdf_snp,
            "engagement_score": self.engagement_score,
            "equivalent_churn_days": self.equivalent_churn_days,
            "survival_probability": self.survival_probability,
        }
        for name, val in sorted(self.flags.items()):
            row[f"flag_{name}"] = val
        return row


def _maybe_indicator(panel, user_id, as_of, mode, cutoff) -> Optional[float]:
    try:
        return indicator(panel, user_id, as_of, GAP_METRIC, mode, cutoff).value
    except InsufficientHistoryError:
        return None


def build_report_cards(
    panel: CohortPanel,
    user_ids: Optional[Sequence[str]] = None,
    as_of: Optional[date] = None,
    q: float = 0.9,
    cutoff: Optional[float] = DEFAULT_GAP_CUTOFF,
    score_spec: Optional[ScoreSpec] = None,
    survival_probabilities: Optional[Dict[str, float]] = None,
) -> List[ReportCard]:
    """One card per user combining indicators, score, horizon and flags."""
    as_of = as_of or panel.panel_end
    user_ids = list(user_ids) if user_ids is not None else panel.users
    score_spec = score_spec or ScoreSpec()
    cards = []
    for uid in user_ids:
        endo = _maybe_indicator(panel, uid, as_of, "endo", cutoff)
        exo = _maybe_indicator(panel, uid, as_of, "exo", cutoff)
        snp = _maybe_indicator(panel, uid, as_of, "snp", cutoff)
        score = score_series(panel, score_spec, uid, [as_of])[0].value
        gaps = ecdf_mod._gap_samples_endo(panel, uid, panel.day_index(uid, as_of) + 1)
        horizon = None
        if gaps.size:
            horizon = equivalent_churn_definition(build_ecdf(gaps, provenance="endo"), q)
        surp = None if survival_probabilities is None else survival_probabilities.get(uid)
        flags = {
            "ecdf_endo": None if endo is None else churn_risk_flag(endo, "high_is_bad", q),
            "ecdf_exo": None if exo is None else churn_risk_flag(exo, "high_is_bad", q),
            "ecdf_snp": None if snp is None else churn_risk_flag(snp, "high_is_bad", q),
            "score": churn_risk_flag(score, "low_is_bad", q),
        }
        cards.append(
            ReportCard(
                user_id=uid,
                as_of=as_of,
                ecdf_endo=endo,
                ecdf_exo=exo,
                ecdf_snp=snp,
                engagement_score=score,
                equivalent_churn_days=horizon,
                survival_probability=surp,
                flags=flags,
            )
        )
    return cards


@dataclass
class ChurnComparison:
    group: Optional[str]
    as_of: date
    k_rcmm: Optional[int]
    k_exo: Optional[int]
    k_snp: Optional[int]
    k_endo_avg: Optional[float]
    # 2x2 counts keyed (rcmm_churned, other_churned) per compared method
    confusion: Dict[str, Dict[str, int]]
    n_users: int
    n_endo_undefined: int


def _confusion_counts(rcmm_flags: Dict[str, bool], other_flags: Dict[str, bool]) -> Dict[str, int]:
    cells = {"not_not": 0, "not_churned": 0, "churned_not": 0, "churned_churned": 0}
    for uid, r in rcmm_flags.items():
        if uid not in other_flags:
            continue
        o = other_flags[uid]
        key = ("churned" if r else "not") + "_" + ("churned" if o else "not")
        cells[key] += 1
    return cells


def compare_churn_definitions(
    panel: CohortPanel,
    as_of: Optional[date] = None,
    returning_max: float = 0.30,
    missed_max: float = 0.10,
    k_rcmm: Optional[int] = None,
    q: float = 0.9,
    cutoff: Optional[float] = DEFAULT_GAP_CUTOFF,
    group: Optional[str] = None,
    k_grid: Sequence[int] = DEFAULT_K_GRID,
) -> ChurnComparison:
    """RCMM-vs-ECDF confusion matrices and per-method horizons for one group."""
    as_of = as_of or panel.panel_end
    users = [u for u in panel.users if group is None or panel.groups.get(u) == group]
    users = [u for u in users if panel.first_login_day(u) <= as_of]

    if k_rcmm is None:
        curve = rcmm_curve(panel, k_grid=k_grid, group=group)
        k_rcmm = find_churn_definition(curve, returning_max, missed_max, as_of).k_days

    # group-level equivalent horizons
    ref_user = users[0]
    k_exo = k_snp = None
    exo_samples = ecdf_mod.reference_samples(panel, ref_user, as_of, GAP_METRIC, "exo", cutoff)
    if len(exo_samples):
        k_exo = equivalent_churn_definition(build_ecdf(exo_samples, provenance="exo"), q)
    snp_samples = ecdf_mod.reference_samples(panel, ref_user, as_of, GAP_METRIC, "snp", cutoff)
    if len(snp_samples):
        k_snp = equivalent_churn_definition(build_ecdf(snp_samples, provenance="snp"), q)

    rcmm_flags: Dict[str, bool] = {}
    exo_flags: Dict[str, bool] = {}
    snp_flags: Dict[str, bool] = {}
    endo_flags: Dict[str, bool] = {}
    endo_ks: List[int] = []
    n_endo_undef = 0
    for uid in users:
        gap_now = int(panel.value(uid, as_of, "days_since_last_login"))
        rcmm_flags[uid] = gap_now > k_rcmm
        if k_exo is not None:
            exo_flags[uid] = gap_now > k_exo
        if k_snp is not None:
            snp_flags[uid] = gap_now > k_snp
        gaps = ecdf_mod._gap_samples_endo(panel, uid, panel.day_index(uid, as_of) + 1)
        if gaps.size:
            k_endo = equivalent_churn_definition(build_ecdf(gaps, provenance="endo"), q)
            endo_ks.append(k_endo)
            endo_flags[uid] = gap_now > k_endo
        else:
            n_endo_undef += 1

    confusion = {
        "ecdf_endo": _confusion_counts(rcmm_flags, endo_flags),
        "ecdf_exo": _confusion_counts(rcmm_flags, exo_flags),
        "ecdf_snp": _confusion_counts(rcmm_flags, snp_flags),
    }
    return ChurnComparison(
        group=group,
        as_of=as_of,
        k_rcmm=k_rcmm,
        k_exo=k_exo,
        k_snp=k_snp,
        k_endo_avg=float(np.mean(endo_ks)) if endo_ks else None,
        confusion=confusion,
        n_users=len(users),
        n_endo_undefined=n_endo_undef,
    )
