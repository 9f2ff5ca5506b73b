"""
Stochastic gradient methods as SSUM with a quadratic surrogate.

With ghat1(x, y, xi) = g1(y, xi) + <grad g1(y, xi), x - y> + (alpha/2)||x - y||^2
the aggregate minimizer is a weighted running average, which unrolls into the
gradient recursion x^r = x^{r-1} - grad g1(x^{r-1}, xi^r) / sum_i alpha^i.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from ssumkit.core.rng import as_generator
from ssumkit.core.surrogate import Sampler, SurrogateModel
from ssumkit.errors import InfeasibleStart
from ssumkit.models.trace import RunTrace, TraceRecord

logger = logging.getLogger(__name__)

Gradient = Callable[[np.ndarray, Any], np.ndarray]
Value = Callable[[np.ndarray, Any], float]


@dataclass
class SmoothProblem:
    """
    Smooth stochastic objective g1 with optional constraint set and l1 term.

    Attributes:
        grad: Gradient oracle grad g1(x, xi)
        lipschitz: Lipschitz constant L of the gradient
        value: g1(x, xi), needed for traces and tightness checks
        projection: Exact projection onto the constraint set, None for R^n
        l1: Weight lambda of lambda ||x||_1
        alpha: Curvature schedule r -> alpha^r, constant L when omitted
    """

    grad: Gradient
    lipschitz: float
    value: Optional[Value] = None
    projection: Optional[Callable[[np.ndarray], np.ndarray]] = None
    l1: float = 0.0
    alpha: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if self.lipschitz <= 0:
            raise ValueError(f"lipschitz must be positive, got {self.lipschitz}")
        if self.l1 < 0:
            raise ValueError(f"l1 weight must be nonnegative, got {self.l1}")

    def alpha_at(self, r: int) -> float:
        if self.alpha is None:
            return self.lipschitz
        a = float(self.alpha(r))
        if a <= 0:
            raise ValueError(f"alpha schedule must be positive, got {a} at r={r}")
        return a

    def project(self, x: np.ndarray) -> np.ndarray:
        return x if self.projection is None else self.projection(x)

    def objective(self, x: np.ndarray, xi: Any) -> float:
        if self.value is None:
            return float("nan")
        return self.value(x, xi) + self.l1 * float(np.sum(np.abs(x)))


def shrink(z, tau: float) -> np.ndarray:
    """Soft shrinkage: sign(z) * max(|z| - tau, 0)."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def finite_sampler(corpus) -> Sampler:
    """Uniform draws from a finite sample set (rows of an array or a list)."""
    items = corpus if isinstance(corpus, list) else list(np.asarray(corpus))
    if not items:
        raise ValueError("corpus is empty")
    return lambda gen: items[int(gen.integers(len(items)))]


def estimate_lipschitz(
    hessian: np.ndarray,
    n_iter: int = 100,
    rng: Any = 0,
    tol: float = 1e-10,
) -> float:
    """
    Largest eigenvalue of a symmetric PSD Hessian by power iteration.

    For quadratic objectives this is the gradient Lipschitz constant.
    """
    H = np.asarray(hessian, dtype=float)
    gen = as_generator(rng)
    v = gen.standard_normal(H.shape[0])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(n_iter):
        w = H @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= tol * max(norm, 1.0):
            estimate = norm
            break
        estimate = norm
    return estimate


def lipschitz_ratio(
    problem: SmoothProblem,
    draw: Callable[[np.random.Generator], tuple[np.ndarray, np.ndarray, Any]],
    n_pairs: int,
    rng: Any = 0,
) -> float:
    """
    Largest sampled ||grad(x, xi) - grad(y, xi)|| / (L ||x - y||).

    A value above one means problem.lipschitz understates the curvature and
    the quadratic surrogate is no longer an upper bound.

    Args:
        problem: Problem whose declared constant is checked
        draw: gen -> (x, y, xi)
        n_pairs: Number of sampled pairs
        rng: Seed, Generator or RngStream

    Returns:
        The worst ratio; 0.0 when every pair coincided
    """
    if n_pairs < 1:
        raise ValueError(f"n_pairs must be at least 1, got {n_pairs}")
    gen = as_generator(rng)
    worst = 0.0
    for _ in range(n_pairs):
        x, y, xi = draw(gen)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dist = float(np.linalg.norm(x - y))
        if dist == 0.0:
            continue
        diff = np.asarray(problem.grad(x, xi)) - np.asarray(problem.grad(y, xi))
        worst = max(worst, float(np.linalg.norm(diff)) / (problem.lipschitz * dist))
    return worst


class QuadraticSurrogateModel(SurrogateModel):
    """
    SSUM model with the linearization-plus-quadratic surrogate.

    Statistics: S = sum_i (alpha^i x^{i-1} - grad_i), the curvature sum
    sum_i alpha^i and the constant part of the aggregate.
    """

    def __init__(self, problem: SmoothProblem):
        if problem.projection is not None and problem.l1 > 0:
            raise ValueError("l1 term and constraint set cannot be combined")
        self.problem = problem
        self.strong_convexity = (
            problem.lipschitz if problem.alpha is None else problem.alpha_at(1)
        )
        self.S: Optional[np.ndarray] = None
        self.alpha_sum = 0.0
        self.constant = 0.0
        self._r = 0

    @property
    def n_observed(self) -> int:
        return self._r

    def _l1(self, x) -> float:
        return self.problem.l1 * float(np.sum(np.abs(x)))

    def eval_g(self, x, xi) -> float:
        return self.problem.objective(np.asarray(x, dtype=float), xi)

    def eval_g2(self, x, xi) -> float:
        return self._l1(x)

    def subgrad_g2(self, x, xi) -> np.ndarray:
        return self.problem.l1 * np.sign(np.asarray(x, dtype=float)).ravel()

    def grad_g1(self, x, xi) -> np.ndarray:
        return np.asarray(self.problem.grad(x, xi), dtype=float).ravel()

    def _value(self, y, xi) -> float:
        if self.problem.value is None:
            raise ValueError("surrogate values need a SmoothProblem with value set")
        return float(self.problem.value(y, xi))

    def eval_ghat(self, x, y, xi) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = x - y
        alpha = self.problem.alpha_at(self._r + 1)
        linear = float(np.sum(self.problem.grad(y, xi) * d))
        return (
            self._value(y, xi)
            + linear
            + 0.5 * alpha * float(np.sum(d * d))
            + self._l1(x)
        )

    def observe(self, y, xi) -> None:
        y = np.asarray(y, dtype=float)
        alpha = self.problem.alpha_at(self._r + 1)
        g = np.asarray(self.problem.grad(y, xi), dtype=float)
        term = alpha * y - g
        self.S = term if self.S is None else self.S + term
        self.alpha_sum += alpha
        value = self.problem.value(y, xi) if self.problem.value is not None else 0.0
        self.constant += value - float(np.sum(g * y))
        self.constant += 0.5 * alpha * float(np.sum(y * y))
        self._r += 1

    def minimize_aggregate(self) -> np.ndarray:
        center = self.S / self.alpha_sum
        if self.problem.l1 > 0:
            return shrink(center, self.problem.l1 * self._r / self.alpha_sum)
        return self.problem.project(center)

    def eval_aggregate(self, x) -> float:
        if self.problem.value is None:
            raise ValueError("aggregate values need a SmoothProblem with value set")
        x = np.asarray(x, dtype=float)
        quad = 0.5 * self.alpha_sum * float(np.sum(x * x))
        quad -= float(np.sum(self.S * x))
        return (quad + self.constant) / self._r + self._l1(x)

    def project(self, x) -> np.ndarray:
        return self.problem.project(np.asarray(x, dtype=float))


def ssum_sg_model(problem: SmoothProblem) -> QuadraticSurrogateModel:
    """SSUM model whose aggregate minimizer reproduces the gradient recursion."""
    return QuadraticSurrogateModel(problem)


def _run_recursion(
    step: Callable[[int, np.ndarray, Any], np.ndarray],
    problem: SmoothProblem,
    x0: np.ndarray,
    r_max: int,
    sampler: Sampler,
    rng: Any,
    trace_every: int,
    keep_iterates: bool,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> RunTrace:
    if r_max < 1:
        raise ValueError(f"r_max must be at least 1, got {r_max}")
    gen = as_generator(rng)
    trace = RunTrace(iterates=[] if keep_iterates else None)
    x_prev = np.array(x0, dtype=float)
    for r in range(1, r_max + 1):
        xi = sampler(gen)
        sampled_obj = problem.objective(x_prev, xi)
        x = step(r, x_prev, xi)
        step_norm = float(np.linalg.norm(x - x_prev))
        trace.step_norms.append(step_norm)
        if r % trace_every == 0 or r == r_max:
            trace.records.append(
                TraceRecord(
                    r=r,
                    step_norm=step_norm,
                    surrogate_gap=float("nan"),
                    sampled_obj=sampled_obj,
                )
            )
        if keep_iterates:
            trace.iterates.append(x)
        if callback is not None:
            callback(r, x)
        x_prev = x
    trace.final = x_prev
    return trace


def sg_run(
    problem: SmoothProblem,
    x0: np.ndarray,
    r_max: int,
    sampler: Sampler,
    rng: Any = 0,
    step_rule: str = "diminishing",
    step: Optional[float] = None,
    trace_every: int = 1,
    keep_iterates: bool = False,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> RunTrace:
    """
    Unconstrained stochastic gradient.

    x^r = x^{r-1} - gamma^r grad g1(x^{r-1}, xi^r).

    Args:
        problem: Smooth problem; projection and l1 are ignored
        x0: Starting point
        r_max: Number of iterations
        sampler: Draws one sample from a numpy Generator
        rng: Generator, RngStream or integer seed
        step_rule: "diminishing" for gamma^r = 1 / sum_{i<=r} alpha^i, or
            "constant" for gamma^r = step
        step: Constant step size, required by the constant rule
        trace_every: Record diagnostics every this many iterations
        keep_iterates: Store every iterate in the trace
        callback: Called as callback(r, x^r) after every update

    Returns:
        RunTrace of the recursion
    """
    if step_rule == "constant":
        if step is None or step <= 0:
            raise ValueError("constant step rule needs a positive step")
        logger.warning(f"Running SG with constant step {step}; it may diverge")
    elif step_rule != "diminishing":
        raise ValueError(f"unknown step rule: {step_rule}")

    alpha_sum = 0.0

    def update(r, x, xi):
        nonlocal alpha_sum
        alpha_sum += problem.alpha_at(r)
        gamma = step if step_rule == "constant" else 1.0 / alpha_sum
        return x - gamma * np.asarray(problem.grad(x, xi), dtype=float)

    return _run_recursion(
        update, problem, x0, r_max, sampler, rng, trace_every, keep_iterates, callback
    )


def projected_ssum_sg(
    problem: SmoothProblem,
    x0: np.ndarray,
    r_max: int,
    sampler: Sampler,
    rng: Any = 0,
    trace_every: int = 1,
    keep_iterates: bool = False,
    auxiliary: Optional[list[np.ndarray]] = None,
) -> RunTrace:
    """
    Constrained SSUM-SG through an auxiliary sequence.

    z^r = (sum_{i<r} alpha^i z^{r-1} + alpha^r x^{r-1} - grad g1(x^{r-1}, xi^r))
          / sum_{i<=r} alpha^i,   x^r = project(z^r).

    z^r may leave the feasible set; pass a list as ``auxiliary`` to collect it.

    Raises:
        InfeasibleStart: If x0 is not feasible
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.allclose(problem.project(x0), x0, rtol=0.0, atol=1e-12):
        raise InfeasibleStart("starting point is not in the feasible set")
    alpha_prev = 0.0
    z = x0.copy()

    def update(r, x, xi):
        nonlocal alpha_prev, z
        alpha = problem.alpha_at(r)
        alpha_sum = alpha_prev + alpha
        g = np.asarray(problem.grad(x, xi), dtype=float)
        z = (alpha_prev * z + alpha * x - g) / alpha_sum
        alpha_prev = alpha_sum
        if auxiliary is not None:
            auxiliary.append(z.copy())
        return problem.project(z)

    return _run_recursion(
        update, problem, x0, r_max, sampler, rng, trace_every, keep_iterates
    )


def l1_ssum_sg(
    problem: SmoothProblem,
    x0: np.ndarray,
    r_max: int,
    sampler: Sampler,
    rng: Any = 0,
    trace_every: int = 1,
    keep_iterates: bool = False,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> RunTrace:
    """
    SSUM-SG with an l1 penalty, dual-averaging style.

    z^1 = x^0 - grad g1(x^0, xi^1) / L, then
    z^{r+1} = (r z^r + x^r - grad g1(x^r, xi^{r+1}) / L) / (r + 1),
    with x^r = shrink(z^r, lambda / L).
    """
    L = problem.lipschitz
    tau = problem.l1 / L
    z = np.asarray(x0, dtype=float).copy()

    def update(r, x, xi):
        nonlocal z
        g = np.asarray(problem.grad(x, xi), dtype=float)
        if r == 1:
            z = x - g / L
        else:
            z = ((r - 1) * z + x - g / L) / r
        return shrink(z, tau)

    return _run_recursion(
        update, problem, x0, r_max, sampler, rng, trace_every, keep_iterates, callback
    )


def projected_sg_run(
    problem: SmoothProblem,
    x0: np.ndarray,
    r_max: int,
    sampler: Sampler,
    rng: Any = 0,
    trace_every: int = 1,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> RunTrace:
    """
    Classical projected SG: x^r = project(x^{r-1} - grad / sum_{i<=r} alpha^i).

    Unlike projected_ssum_sg the gradient step starts from the projected
    iterate, not from an auxiliary average.
    """
    alpha_sum = 0.0

    def update(r, x, xi):
        nonlocal alpha_sum
        alpha_sum += problem.alpha_at(r)
        g = np.asarray(problem.grad(x, xi), dtype=float)
        return problem.project(x - g / alpha_sum)

    return _run_recursion(
        update, problem, x0, r_max, sampler, rng, trace_every, False, callback
    )
