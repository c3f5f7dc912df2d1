"""Penalty-form distributionally robust optimization and mean-variance calibration."""

from .asymptotics import (
    AsymptoticSummary, baseline_moments, predicted_curves, sandwich_covariance, summarize,
)
from .config import ExperimentConfig
from .data import LabeledTable, ReturnsTable, ingest_csv
from .divergence import (
    PhiDivergence, divergence, get_divergence, modified_chi_square, register_divergence,
    relative_entropy,
)
from .empirical import (
    EmpiricalDistribution, bootstrap_resample, empirical_optimize, empirical_solve, replicate_rng,
)
from .exceptions import ConfigError, DataError, DrocalError, SolverError
from .frontier import (
    Frontier, HighConfidence, MaxMean, MeanVarTradeoff, Satisficing, bootstrap_frontier,
    calibrate, frontier_gap, high_confidence_delta, normalize_frontier, oos_frontier,
    read_frontier, true_frontier, write_frontier,
)
from .rewards import (
    BoxBudget, ExpUtilityModel, LogisticModel, NewsvendorModel, QuadraticModel, Unconstrained,
    model_reward_stats, smoothed_min,
)
from .robust import RobustSolution, WorstCase, robust_optimize, worst_case

__version__ = "0.1.0"

__all__ = [
    "AsymptoticSummary", "baseline_moments", "bootstrap_frontier", "bootstrap_resample",
    "BoxBudget", "calibrate", "ConfigError", "DataError", "divergence", "DrocalError",
    "empirical_optimize", "empirical_solve", "EmpiricalDistribution", "ExperimentConfig",
    "ExpUtilityModel", "Frontier", "frontier_gap", "get_divergence", "high_confidence_delta",
    "HighConfidence", "ingest_csv", "LabeledTable", "LogisticModel", "MaxMean", "MeanVarTradeoff",
    "model_reward_stats", "modified_chi_square", "NewsvendorModel", "normalize_frontier",
    "oos_frontier", "PhiDivergence", "predicted_curves", "QuadraticModel", "read_frontier",
    "register_divergence", "relative_entropy", "replicate_rng", "ReturnsTable", "robust_optimize",
    "RobustSolution", "sandwich_covariance", "Satisficing", "smoothed_min", "SolverError",
    "summarize", "true_frontier", "Unconstrained", "worst_case", "WorstCase", "write_frontier",
]
