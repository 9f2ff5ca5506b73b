"""
Stochastic least squares used by the stochastic-gradient demo.

Samples are pairs (a, b) with a uniform on the sphere of radius sqrt(n) and
b = <a, x*> + noise, so E[a a^T] = I and every sampled gradient is
n-Lipschitz.
"""

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ssumkit.core.parallel import ordered_map
from ssumkit.core.rng import as_generator
from ssumkit.models.experiment import SGParams
from ssumkit.services.sg_variants import SmoothProblem

LeastSquaresSample = tuple[np.ndarray, float]


@dataclass
class LeastSquaresSource:
    """Sample source around a planted sparse solution."""

    x_star: np.ndarray
    noise_std: float

    @classmethod
    def planted(cls, params: SGParams, rng: Any = 0) -> "LeastSquaresSource":
        """Gaussian x* with its second half zeroed."""
        gen = as_generator(rng)
        x_star = gen.standard_normal(params.dim)
        x_star[(params.dim + 1) // 2 :] = 0.0
        return cls(x_star=x_star, noise_std=params.noise_std)

    @property
    def dim(self) -> int:
        return self.x_star.shape[0]

    def __call__(self, gen: np.random.Generator) -> LeastSquaresSample:
        a = gen.standard_normal(self.dim)
        a *= math.sqrt(self.dim) / np.linalg.norm(a)
        b = float(a @ self.x_star) + self.noise_std * float(gen.standard_normal())
        return a, b

    def draw(self, count: int, rng: Any = 0) -> list[LeastSquaresSample]:
        gen = as_generator(rng)
        return [self(gen) for _ in range(count)]


def least_squares_value(x: np.ndarray, xi: LeastSquaresSample) -> float:
    a, b = xi
    residual = float(a @ x) - b
    return 0.5 * residual * residual


def least_squares_grad(x: np.ndarray, xi: LeastSquaresSample) -> np.ndarray:
    a, b = xi
    return a * (float(a @ x) - b)


def least_squares_problem(dim: int, l1: float = 0.0) -> SmoothProblem:
    """Smooth problem with L = dim, the exact per-sample curvature."""
    return SmoothProblem(
        grad=least_squares_grad,
        lipschitz=float(dim),
        value=least_squares_value,
        l1=l1,
    )


def expected_least_squares(
    x: np.ndarray, samples: list[LeastSquaresSample], threads: int = 1
) -> tuple[float, float]:
    """
    Mean squared-residual loss over held-out samples.

    Returns:
        Tuple of (mean, standard error)
    """
    losses = ordered_map(lambda xi: least_squares_value(x, xi), samples, threads)
    n = len(losses)
    mean = math.fsum(losses) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in losses) / (n - 1)
    return mean, math.sqrt(var / n)
