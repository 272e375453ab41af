"""Adaptive minimum sample sizes for low-risk inspection pathways."""

from .belief import (
    BetaParams,
    EvidenceWindow,
    InspectionBatch,
    beta_cdf,
    beta_quantile,
    binomial_tail_upper,
    jeffreys_prior,
    posterior_update,
)
from .comparators import FixedDesign, PowerDesign, fixed_detection_size, power_analysis_size
from .errors import LowRiskError, NoSolution, NotLowRisk, RedStatus, ValidationError
from .simulator import ScenarioSchedule, SimConfig, run_scenario, sizing_sweep, status_sweep
from .sizing import SizingResult, critical_contamination_count, min_sample_size, weighted_success_prob
from .status import ColourStatus, Thresholds, assert_low_risk, classify, tune_change_threshold

__version__ = "0.1.0"

__all__ = [
    "BetaParams",
    "ColourStatus",
    "EvidenceWindow",
    "FixedDesign",
    "InspectionBatch",
    "LowRiskError",
    "NoSolution",
    "NotLowRisk",
    "PowerDesign",
    "RedStatus",
    "ScenarioSchedule",
    "SimConfig",
    "SizingResult",
    "Thresholds",
    "ValidationError",
    "assert_low_risk",
    "beta_cdf",
    "beta_quantile",
    "binomial_tail_upper",
    "classify",
    "critical_contamination_count",
    "fixed_detection_size",
    "jeffreys_prior",
    "min_sample_size",
    "posterior_update",
    "power_analysis_size",
    "run_scenario",
    "sizing_sweep",
    "status_sweep",
    "tune_change_threshold",
    "weighted_success_prob",
]
