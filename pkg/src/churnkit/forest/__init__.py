"""Survival ensembles with static and time-varying covariates."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .data import (
    SurvivalDataset,
    build_pseudo_dataset,
    build_static_dataset,
    default_feature_columns,
    label_churn,
    pseudo_observations,
)
from .evaluate import (
    EvaluationReport,
    bootstrap_evaluate,
    km_null_ibs,
    select_top_features,
    subject_observations,
    subset_subjects,
)
from .trees import (
    ForestModel,
    Hyperparams,
    fit_csf,
    fit_forest,
    fit_ltrc_cif,
    fit_ltrc_rrf,
    predict_curves,
)

__all__ = [
    "KERNEL_BACKEND",
    "SurvivalDataset",
    "build_pseudo_dataset",
    "build_static_dataset",
    "default_feature_columns",
    "label_churn",
    "pseudo_observations",
    "EvaluationReport",
    "bootstrap_evaluate",
    "km_null_ibs",
    "select_top_features",
    "subject_observations",
    "subset_subjects",
    "ForestModel",
    "Hyperparams",
    "fit_csf",
    "fit_forest",
    "fit_ltrc_cif",
    "fit_ltrc_rrf",
    "predict_curves",
]
