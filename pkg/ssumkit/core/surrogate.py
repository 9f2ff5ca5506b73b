"""
The surrogate-model contract implemented by every problem instance.

A model owns the running aggregate (1/r) sum_i ghat(., x^{i-1}, xi^i) in the
form of fixed-size sufficient statistics and can minimize it exactly.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable

import numpy as np

from ssumkit.config import FD_STEP_SCALE

Point = Any
Sample = Any
Sampler = Callable[[np.random.Generator], Sample]


def central_difference(
    func: Callable[[np.ndarray], float], v: np.ndarray
) -> np.ndarray:
    """Central-difference gradient with step FD_STEP_SCALE * (1 + ||v||)."""
    v = np.asarray(v, dtype=float)
    h = FD_STEP_SCALE * (1.0 + float(np.linalg.norm(v)))
    grad = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        grad[i] = (func(v + e) - func(v - e)) / (2.0 * h)
    return grad


class SurrogateModel(ABC):
    """
    Behavioral contract of an SSUM problem instance.

    Subclasses must satisfy, for all y in the feasible set:
      - eval_ghat(y, y, xi) == eval_g(y, xi)          (tight at y)
      - eval_ghat(x, y, xi) >= eval_g(x, xi)          (upper bound)
      - x -> eval_ghat(x, y, xi) is strongly convex with modulus
        ``strong_convexity``.
    """

    strong_convexity: float = 0.0

    @abstractmethod
    def eval_g(self, x: Point, xi: Sample) -> float:
        """Sampled objective g(x, xi) = g1(x, xi) + g2(x, xi)."""

    @abstractmethod
    def eval_ghat(self, x: Point, y: Point, xi: Sample) -> float:
        """Surrogate ghat(x, y, xi) = ghat1(x, y, xi) + g2(x, xi)."""

    @abstractmethod
    def observe(self, y: Point, xi: Sample) -> None:
        """Fold ghat(., y, xi) into the running aggregate."""

    @abstractmethod
    def minimize_aggregate(self) -> Point:
        """Exact minimizer of the aggregate over the feasible set."""

    @abstractmethod
    def eval_aggregate(self, x: Point) -> float:
        """(1/r) sum_i ghat(x, x^{i-1}, xi^i) for the samples observed so far."""

    @abstractmethod
    def project(self, x: Point) -> Point:
        """Projection onto the feasible set."""

    @property
    @abstractmethod
    def n_observed(self) -> int:
        """Number of samples folded into the aggregate."""

    def eval_g2(self, x: Point, xi: Sample) -> float:
        """Convex nonsmooth part g2; zero unless the model has one."""
        return 0.0

    def subgrad_g2(self, x: Point, xi: Sample) -> np.ndarray:
        """A subgradient of g2 at x in vector coordinates."""
        return np.zeros_like(self.to_vector(x))

    def eval_g1(self, x: Point, xi: Sample) -> float:
        return self.eval_g(x, xi) - self.eval_g2(x, xi)

    def grad_g1(self, x: Point, xi: Sample) -> np.ndarray:
        """Gradient of g1 in vector coordinates, central differences by default."""
        return central_difference(
            lambda v: self.eval_g1(self.from_vector(v, x), xi), self.to_vector(x)
        )

    def to_vector(self, x: Point) -> np.ndarray:
        """Real coordinates of a point; identity for real arrays."""
        return np.asarray(x, dtype=float).ravel()

    def from_vector(self, v: np.ndarray, like: Point) -> Point:
        return np.asarray(v, dtype=float).reshape(np.shape(like))

    def distance(self, x: Point, y: Point) -> float:
        return float(np.linalg.norm(self.to_vector(x) - self.to_vector(y)))


class QuadraticToyModel(SurrogateModel):
    """
    g(x, xi) = ghat(x, y, xi) = 0.5 ||x - xi||^2 on R^n, optionally boxed.

    The aggregate minimizer is the running sample mean, clipped to the box
    when bounds are given.
    """

    strong_convexity = 1.0

    def __init__(self, lower: float = -np.inf, upper: float = np.inf):
        self.lower = lower
        self.upper = upper
        self._sum = None
        self._sum_sq = 0.0
        self._r = 0

    @property
    def n_observed(self) -> int:
        return self._r

    def eval_g(self, x, xi) -> float:
        d = np.asarray(x, dtype=float) - np.asarray(xi, dtype=float)
        return float(0.5 * np.sum(d * d))

    def eval_ghat(self, x, y, xi) -> float:
        return self.eval_g(x, xi)

    def grad_g1(self, x, xi) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.asarray(xi, dtype=float)).ravel()

    def observe(self, y, xi) -> None:
        xi = np.asarray(xi, dtype=float)
        self._sum = xi.copy() if self._sum is None else self._sum + xi
        self._sum_sq += float(np.sum(xi * xi))
        self._r += 1

    def minimize_aggregate(self):
        return self.project(self._sum / self._r)

    def eval_aggregate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        quad = 0.5 * self._r * np.sum(x * x) - np.sum(x * self._sum)
        return float((quad + 0.5 * self._sum_sq) / self._r)

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def minimize_sample_average(self, samples: list) -> np.ndarray:
        """Exact SAA step: minimizer of (1/r) sum_i g(x, xi^i)."""
        return self.project(np.mean(np.asarray(samples, dtype=float), axis=0))
