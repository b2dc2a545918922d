"""Identification and MAR-recovery functionals, plus estimator objects."""

from ._data import MISSING, ObservedTable, VariableMap, check_table
from ._estimators import IVEstimator, PIEstimator, PrincipalEffectEstimator
from .functional import (
    Moments,
    RecoveredMean,
    StratumMeans,
    eq1_pce,
    iv_cace,
    iv_effects,
    iv_stratum_means,
    mar_recover_mean,
    moments,
    pce_with_missing,
    pi_effects,
    strata_covariate_dist,
    strata_prevalence,
)

__all__ = [
    "MISSING",
    "ObservedTable",
    "VariableMap",
    "check_table",
    "IVEstimator",
    "PIEstimator",
    "PrincipalEffectEstimator",
    "Moments",
    "RecoveredMean",
    "StratumMeans",
    "eq1_pce",
    "iv_cace",
    "iv_effects",
    "iv_stratum_means",
    "mar_recover_mean",
    "moments",
    "pce_with_missing",
    "pi_effects",
    "strata_covariate_dist",
    "strata_prevalence",
]
