"""churnkit: engagement metrics, churn definitions and survival models
for mobile app usage logs.

The pipeline runs events -> panel -> constructs:

* :mod:`churnkit.events` - ingestion and canonicalization of raw event logs;
* :mod:`churnkit.panel` - per-user daily metric panels with rolling features;
* :mod:`churnkit.rcmm` - data-driven inactivity-horizon churn definitions;
* :mod:`churnkit.ecdf` - empirical-CDF engagement indicators;
* :mod:`churnkit.score` - harmonic-mean engagement scores;
* :mod:`churnkit.survival` - KM / Nelson-Aalen / IPCW Brier scoring;
* :mod:`churnkit.forest` - survival forests with static or time-varying
  covariates, plus the bootstrap evaluation protocol;
* :mod:`churnkit.synth` - seeded synthetic cohorts with known ground truth.
"""

from .ecdf import (
    Ecdf,
    EcdfIndicator,
    InsufficientHistoryError,
    build_ecdf,
    churn_risk_flag,
    equivalent_churn_definition,
    indicator,
    reference_samples,
)
from .events import EventRecord, IngestError, IngestResult, ingest_events, write_events_csv
from .panel import (
    CohortPanel,
    build_panel,
    export_panel_csv,
    read_panel_csv,
    rolling_features,
)
from .rcmm import (
    ChurnDefinition,
    NoChurnDefinitionError,
    RcmmCurve,
    churn_flags,
    find_churn_definition,
    rcmm_curve,
)
from .report import ReportCard, build_report_cards, compare_churn_definitions
from .score import EngagementScore, ScoreSpec, harmonic_score, minmax_scale, score_series
from .synth import (
    CohortSpec,
    GroundTruth,
    generate,
    homogeneous_spec,
    regime_switch_spec,
    spec_from_json,
    spec_to_json,
    two_group_spec,
)
from .survival import (
    StepFunction,
    SurvivalCurve,
    SurvivalObservation,
    brier_score,
    censoring_survival,
    evaluate_ibs,
    integrated_brier_score,
    kaplan_meier,
    median_survival,
    nelson_aalen,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Ecdf",
    "EcdfIndicator",
    "InsufficientHistoryError",
    "build_ecdf",
    "churn_risk_flag",
    "equivalent_churn_definition",
    "indicator",
    "reference_samples",
    "EventRecord",
    "IngestError",
    "IngestResult",
    "ingest_events",
    "write_events_csv",
    "CohortPanel",
    "build_panel",
    "export_panel_csv",
    "read_panel_csv",
    "rolling_features",
    "ChurnDefinition",
    "NoChurnDefinitionError",
    "RcmmCurve",
    "churn_flags",
    "find_churn_definition",
    "rcmm_curve",
    "ReportCard",
    "build_report_cards",
    "compare_churn_definitions",
    "EngagementScore",
    "ScoreSpec",
    "harmonic_score",
    "minmax_scale",
    "score_series",
    "CohortSpec",
    "GroundTruth",
    "generate",
    "homogeneous_spec",
    "regime_switch_spec",
    "spec_from_json",
    "spec_to_json",
    "two_group_spec",
    "StepFunction",
    "SurvivalCurve",
    "SurvivalObservation",
    "brier_score",
    "censoring_survival",
    "evaluate_ibs",
    "integrated_brier_score",
    "kaplan_meier",
    "median_survival",
    "nelson_aalen",
]
