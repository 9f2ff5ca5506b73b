"""
Configuration module for ssumkit.

Contains constants, settings, and configuration values used throughout the application.
"""

import os
from pathlib import Path

# Version
VERSION = "0.1.0"

# Application paths
PROJECT_ROOT = Path(__file__).parent.parent
RESULTS_DIR = PROJECT_ROOT / "results"
LOG_DIR = PROJECT_ROOT / "logs"

# Numerics
# Rates are reported in nats: every logarithm in the package is natural.
HERMITIAN_RTOL = 1e-10
FD_STEP_SCALE = 1e-5  # central differences use h = FD_STEP_SCALE * (1 + ||x||)
CSV_FLOAT_FORMAT = "%.17g"

# Power bisection
BISECTION_REL_TOL = 1e-8  # default tol = BISECTION_REL_TOL * P
BISECTION_MAX_DOUBLINGS = 200
BISECTION_MAX_ITER = 400

# SSUM engine
EARLY_STOP_STEP = 1e-10
EARLY_STOP_PATIENCE = 10

# Stochastic WMMSE defaults
DEFAULT_RHO_SCALE = 0.01  # rho = DEFAULT_RHO_SCALE * P_k / M_k
DEFAULT_PATH_LOSS_EXPONENT = 3.76
DEFAULT_REFERENCE_DISTANCE = 0.05  # in units of the inter-site distance
DEFAULT_WMMSE_ITERATIONS = 100

# Dictionary learning defaults
DEFAULT_GAMMA_PROX = 1e-2
LASSO_TOL = 1e-10
LASSO_MAX_SWEEPS = 20000
DICT_UPDATE_TOL = 1e-10
DICT_UPDATE_MAX_SWEEPS = 5000

# Experiment defaults
DEFAULT_EVAL_EVERY = 10
DEFAULT_N_MC = 200
DEFAULT_THREADS = 1
RESULTS_FILE = "results.csv"
MANIFEST_FILE = "manifest.txt"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PROPERTY_FAILURE = 2
EXIT_RUNTIME_ERROR = 3

# Logging configuration
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE = "ssumkit.log"
LOG_LEVEL = os.getenv("SSUM_LOG_LEVEL", "INFO")


def ensure_directories():
    """Ensure required directories exist."""
    get_results_dir().mkdir(parents=True, exist_ok=True)
    LOG_DIR.mkdir(parents=True, exist_ok=True)


def get_log_level():
    """Get the configured log level."""
    import logging

    level_map = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }
    level = os.getenv("SSUM_LOG_LEVEL", LOG_LEVEL)
    return level_map.get(level.upper(), logging.INFO)


def get_results_dir() -> Path:
    """Output directory for configs that set none; SSUM_OUTPUT_DIR overrides."""
    return Path(os.getenv("SSUM_OUTPUT_DIR", str(RESULTS_DIR)))


def get_default_threads() -> int:
    """Monte-Carlo worker threads; SSUM_THREADS overrides."""
    value = os.getenv("SSUM_THREADS", str(DEFAULT_THREADS))
    try:
        return int(value)
    except ValueError as e:
        raise ValueError(f"SSUM_THREADS must be an integer, got {value!r}") from e
