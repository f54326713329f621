"""Numerical checks of the curvature, weight, threshold and oracle-bound results."""

from .constants import VSolution, solve_v_constants
from .experiments import (AdditiveModel, RateConfig, concentration_probe, null_experiment,
                          rate_experiment)
from .lemma1 import check_lemma1, scale_to_thresholds
from .oracle import OracleSpec, compute_beta_star, oracle_bound_report
from .restricted import REEstimate, estimate_re_constant, in_cone
from .sandwich import SandwichReport, check_sandwich
from .weights import min_weight_prop1, sample_omega_lower

__all__ = [
    "AdditiveModel", "OracleSpec", "REEstimate", "RateConfig", "SandwichReport", "VSolution",
    "check_lemma1", "check_sandwich", "compute_beta_star", "concentration_probe",
    "estimate_re_constant", "in_cone", "min_weight_prop1", "null_experiment",
    "oracle_bound_report", "rate_experiment", "sample_omega_lower", "scale_to_thresholds",
    "solve_v_constants",
]
