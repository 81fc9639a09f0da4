"""Bootstrap k-FWE joint prediction regions for time-series path forecasts."""

from .bootstrap import BootstrapPlan, BootstrapSpec
from .decompose import Decomposition, classical_decompose, recompose
from .errors import BootstrapSizeWarning, JPRError
from .forecasters import ForecasterSpec, PathForecast, fit_ar, fit_ari, fit_holt, fit_holt_winters, fit_ses, select_order
from .harness import EvalReport, ExperimentConfig, SyntheticSpec, emit_report, generate_synthetic, rolling_eval
from .regions import (
    JointRegion,
    bonferroni_levels,
    bootstrap_prediction_errors,
    build_region,
    contains,
    geometric_width,
    kfwe_multipliers,
    kfwe_region,
    modified_scheffe_region,
    np_heuristic_region,
)
from .rng import RandomSource
from .series import TimeSeries

__all__ = [
    "BootstrapPlan",
    "BootstrapSizeWarning",
    "BootstrapSpec",
    "Decomposition",
    "EvalReport",
    "ExperimentConfig",
    "ForecasterSpec",
    "JPRError",
    "JointRegion",
    "PathForecast",
    "RandomSource",
    "SyntheticSpec",
    "TimeSeries",
    "bonferroni_levels",
    "bootstrap_prediction_errors",
    "build_region",
    "classical_decompose",
    "contains",
    "emit_report",
    "fit_ar",
    "fit_ari",
    "fit_holt",
    "fit_holt_winters",
    "fit_ses",
    "generate_synthetic",
    "geometric_width",
    "kfwe_multipliers",
    "kfwe_region",
    "modified_scheffe_region",
    "np_heuristic_region",
    "recompose",
    "rolling_eval",
    "select_order",
]
