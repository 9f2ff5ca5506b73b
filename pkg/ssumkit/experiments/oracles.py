"""
Independent reference solutions used by the property suite and the tests.

Each oracle solves its problem by a route that shares no code with the
production kernel it checks.
"""

import math

import numpy as np
from scipy.optimize import brentq


def l1_quadratic_minimizer(
    curvature: float, linear: np.ndarray, lam: float
) -> np.ndarray:
    """
    argmin_x (c/2)||x||^2 + <b, x> + lam ||x||_1 by sign-pattern enumeration.

    The objective separates over coordinates; each coordinate compares the
    stationary point of the x > 0 piece, of the x < 0 piece and x = 0.
    """
    if curvature <= 0:
        raise ValueError(f"curvature must be positive, got {curvature}")
    b = np.asarray(linear, dtype=float)
    out = np.zeros_like(b)
    for i, bi in enumerate(b):
        candidates = [0.0]
        positive = -(bi + lam) / curvature
        if positive > 0:
            candidates.append(positive)
        negative = -(bi - lam) / curvature
        if negative < 0:
            candidates.append(negative)
        values = [0.5 * curvature * x * x + bi * x + lam * abs(x) for x in candidates]
        out[i] = candidates[int(np.argmin(values))]
    return out


def diagonal_power_multiplier(a: np.ndarray, b: np.ndarray, power: float) -> float:
    """
    Multiplier of min x^H diag(a) x - 2 Re(b^H x) s.t. ||x||^2 <= P.

    phi(mu) = sum |b_i|^2 / (a_i + mu)^2 is solved for phi(mu) = P with
    Brent's method; mu = 0 when the unconstrained solution is feasible.
    Requires a > 0.
    """
    a = np.asarray(a, dtype=float)
    weights = np.abs(np.asarray(b)).ravel() ** 2
    if np.any(a <= 0):
        raise ValueError("diagonal entries must be positive")

    def excess(mu: float) -> float:
        return float(np.sum(weights / (a + mu) ** 2)) - power

    if excess(0.0) <= 0:
        return 0.0
    upper = math.sqrt(float(np.sum(weights)) / power)
    return float(brentq(excess, 0.0, upper, xtol=1e-15, rtol=1e-14))


def scalar_capacity(h: complex, v: complex, noise: float) -> float:
    """ln(1 + |h v|^2 / noise)."""
    return math.log1p(abs(h * v) ** 2 / noise)
