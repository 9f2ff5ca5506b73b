from .config_loader import load_config, parse_config
from .property_suite import CheckResult, PropertyReport, property_suite
from .runner import run_and_emit, run_experiment

__all__ = [
    "CheckResult",
    "PropertyReport",
    "load_config",
    "parse_config",
    "property_suite",
    "run_and_emit",
    "run_experiment",
]
