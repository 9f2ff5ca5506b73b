from ssumkit.core.diagnostics import (
    ConvexityReport,
    StepNormReport,
    TightnessReport,
    check_strong_convexity,
    check_tightness,
    stationarity_gap,
    step_norm_bound_check,
    step_norm_report,
    tightness_sweep,
)
from ssumkit.core.engine import run_saa, run_ssum
from ssumkit.core.parallel import ordered_map
from ssumkit.core.rng import RngStream, as_generator
from ssumkit.core.surrogate import (
    QuadraticToyModel,
    Sampler,
    SurrogateModel,
    central_difference,
)

__all__ = [
    "ConvexityReport",
    "QuadraticToyModel",
    "RngStream",
    "Sampler",
    "StepNormReport",
    "SurrogateModel",
    "TightnessReport",
    "as_generator",
    "central_difference",
    "check_strong_convexity",
    "check_tightness",
    "ordered_map",
    "run_saa",
    "run_ssum",
    "stationarity_gap",
    "step_norm_bound_check",
    "step_norm_report",
    "tightness_sweep",
]
