"""
Dense complex-matrix primitives for the beamforming instance.

Hermitian positive definite solves and log-determinants go through a Cholesky
factorization; the per-cell power constraint is handled by bisection on the
Lagrange multiplier.
"""

import logging
from typing import Optional

import numpy as np
import scipy.linalg as la

from ssumkit.config import (
    BISECTION_MAX_DOUBLINGS,
    BISECTION_MAX_ITER,
    BISECTION_REL_TOL,
    HERMITIAN_RTOL,
)
from ssumkit.errors import BracketFailure, DimensionMismatch, NotPositiveDefinite

logger = logging.getLogger(__name__)


def hermitian_part(M: np.ndarray) -> np.ndarray:
    """Return (M + M^H) / 2."""
    return 0.5 * (M + M.conj().T)


def as_hermitian(M: np.ndarray, rtol: float = HERMITIAN_RTOL) -> np.ndarray:
    """
    Validate that ``M`` is square and Hermitian and return its Hermitian part.

    Args:
        M: Square matrix
        rtol: Allowed ||M - M^H||_F relative to ||M||_F

    Returns:
        The exactly Hermitian matrix (M + M^H) / 2

    Raises:
        DimensionMismatch: If M is not square
        NotPositiveDefinite: If M is not Hermitian within rtol
    """
    M = np.atleast_2d(np.asarray(M))
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    scale = np.linalg.norm(M)
    if np.linalg.norm(M - M.conj().T) > rtol * max(scale, np.finfo(float).tiny):
        raise NotPositiveDefinite("matrix is not Hermitian")
    return hermitian_part(M)


def _cholesky(M: np.ndarray) -> np.ndarray:
    M = as_hermitian(M)
    if not np.all(np.isfinite(M)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    try:
        return la.cholesky(M, lower=True, check_finite=False)
    except la.LinAlgError as e:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {e}") from e


def chol_logdet(M: np.ndarray) -> float:
    """
    Natural log-determinant of a Hermitian positive definite matrix.

    log det(M^-1) is -chol_logdet(M).

    Raises:
        NotPositiveDefinite: If any Cholesky pivot is not positive
    """
    L = _cholesky(M)
    diag = np.real(np.diag(L))
    if np.any(diag <= 0):
        raise NotPositiveDefinite("non-positive Cholesky pivot")
    return float(2.0 * np.sum(np.log(diag)))


def hermitian_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Solve A X = B for Hermitian positive definite A.

    Args:
        A: Hermitian positive definite matrix (n x n)
        B: Right-hand side with n rows (vector or matrix)

    Returns:
        X with the same shape as B

    Raises:
        NotPositiveDefinite: If A is not positive definite
        DimensionMismatch: If B does not have A.shape[0] rows
    """
    A = np.atleast_2d(np.asarray(A))
    B = np.asarray(B)
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(
            f"right-hand side has {B.shape[0]} rows, "
            f"matrix is {A.shape[0]} x {A.shape[1]}"
        )
    L = _cholesky(A)
    return la.cho_solve((L, True), B, check_finite=False)


def _power(
    A: np.ndarray, B: np.ndarray, mu: float
) -> tuple[float, Optional[np.ndarray]]:
    """phi(mu) = Tr(V^H V) with V = (A + mu I)^-1 B; inf when A + mu I is not PD."""
    shifted = A + mu * np.eye(A.shape[0])
    try:
        V = hermitian_solve(shifted, B)
    except NotPositiveDefinite:
        return float("inf"), None
    return float(np.real(np.vdot(V, V))), V


def power_bisection(
    A: np.ndarray,
    B: np.ndarray,
    P: float,
    tol: Optional[float] = None,
    trace: Optional[list[tuple[float, float]]] = None,
) -> tuple[float, np.ndarray]:
    """
    Find the Lagrange multiplier of the power constraint Tr(V^H V) <= P.

    Minimizes Tr(V^H A V) - 2 Re Tr(V^H B) subject to Tr(V^H V) <= P. The
    solution is V(mu) = (A + mu I)^-1 B with mu = 0 when the unconstrained
    solution is feasible, else mu chosen so that Tr(V^H V) = P within tol.

    Args:
        A: Hermitian positive semidefinite matrix (M x M)
        B: Right-hand side (M x d)
        P: Power budget, P > 0
        tol: Accuracy on the power, defaults to BISECTION_REL_TOL * P
        trace: Optional list receiving every evaluated (mu, phi(mu)) pair

    Returns:
        Tuple of (mu, V)

    Raises:
        DimensionMismatch: If B.shape[0] != A.shape[0]
        BracketFailure: If no upper bracket is found
    """
    A = as_hermitian(A)
    B = np.asarray(B)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    if B.shape[0] != A.shape[0]:
        raise DimensionMismatch(
            f"B has {B.shape[0]} rows but A is {A.shape[0]} x {A.shape[1]}"
        )
    if P <= 0:
        raise ValueError(f"power budget must be positive, got {P}")
    if tol is None:
        tol = BISECTION_REL_TOL * P

    if not np.any(B):
        return 0.0, np.zeros_like(B, dtype=np.result_type(A, B, complex))

    def phi(mu: float) -> tuple[float, Optional[np.ndarray]]:
        value, V = _power(A, B, mu)
        if trace is not None:
            trace.append((mu, value))
        return value, V

    value, V = phi(0.0)
    if value <= P:
        return 0.0, V

    mu_lo, mu_hi = 0.0, 1.0
    value_hi, V_hi = phi(mu_hi)
    doublings = 0
    while value_hi > P:
        mu_lo = mu_hi
        mu_hi *= 2.0
        doublings += 1
        if doublings > BISECTION_MAX_DOUBLINGS or not np.isfinite(mu_hi):
            raise BracketFailure(
                f"no upper bracket after {doublings} doublings (mu={mu_hi:g})"
            )
        value_hi, V_hi = phi(mu_hi)
    if abs(value_hi - P) <= tol:
        return mu_hi, V_hi

    for _ in range(BISECTION_MAX_ITER):
        mu = 0.5 * (mu_lo + mu_hi)
        value, V = phi(mu)
        if abs(value - P) <= tol and V is not None:
            return mu, V
        if value > P:
            mu_lo = mu
        else:
            mu_hi, V_hi = mu, V
        if mu_hi - mu_lo <= np.finfo(float).eps * max(mu_hi, 1e-300):
            break

    logger.debug(f"bisection stopped on bracket width, mu={mu_hi:g}")
    return mu_hi, V_hi


def complex_gaussian(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    variance: float = 1.0,
    mean: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Draw CN(mean, variance) entries.

    Real and imaginary parts are independent N(Re m, variance/2) and
    N(Im m, variance/2), so E|h - m|^2 = variance.
    """
    scale = np.sqrt(variance / 2.0)
    sample = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    if mean is not None:
        sample = sample + mean
    return sample
