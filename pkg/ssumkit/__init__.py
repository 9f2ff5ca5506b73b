"""
ssumkit - Stochastic Successive Upper-bound Minimization

Online optimization by averaging locally tight convex upper bounds of sampled
objectives, with stochastic WMMSE beamforming, online dictionary learning and
stochastic-gradient variants built on the same engine.
"""

from .core import QuadraticToyModel, RngStream, SurrogateModel, run_saa, run_ssum
from .errors import ConfigError, SSUMError
from .experiments import load_config, property_suite, run_experiment
from .services.dictlearn import online_dictionary_learning
from .services.wmmse import stochastic_wmmse

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "QuadraticToyModel",
    "RngStream",
    "SSUMError",
    "SurrogateModel",
    "load_config",
    "online_dictionary_learning",
    "property_suite",
    "run_experiment",
    "run_saa",
    "run_ssum",
    "stochastic_wmmse",
]
