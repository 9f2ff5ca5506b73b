"""
Exception hierarchy for ssumkit.

Numeric kernels raise these; algorithm services let them propagate and the
CLI runner maps them to exit codes.
"""


class SSUMError(Exception):
    """Base class for every error raised by ssumkit."""


class NotPositiveDefinite(SSUMError, ValueError):
    """A matrix expected to be Hermitian positive definite is not."""


class DimensionMismatch(SSUMError, ValueError):
    """Operand shapes are inconsistent."""


class BracketFailure(SSUMError, RuntimeError):
    """No finite upper bracket was found for a Lagrange multiplier search."""


class InfeasibleStart(SSUMError, ValueError):
    """The starting point of an iteration lies outside the feasible set."""


class TraceTooShort(SSUMError, ValueError):
    """A run trace holds too few iterations for the requested diagnostic."""


class SingularW(SSUMError, ArithmeticError):
    """The weight matrix I - U^H H V could not be inverted."""


class NonFinite(SSUMError, ValueError):
    """NaN or infinite values were found in an input."""


class DegenerateStats(SSUMError, ArithmeticError):
    """Accumulated sufficient statistics cannot define a dictionary update."""


class ConfigError(SSUMError, ValueError):
    """An experiment configuration violates the documented schema."""
