from .hermitian import (
    as_hermitian,
    chol_logdet,
    complex_gaussian,
    hermitian_part,
    hermitian_solve,
    power_bisection,
)

__all__ = [
    "as_hermitian",
    "chol_logdet",
    "complex_gaussian",
    "hermitian_part",
    "hermitian_solve",
    "power_bisection",
]
