"""
Runtime checks of the surrogate contract and empirical convergence diagnostics.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from ssumkit.config import FD_STEP_SCALE
from ssumkit.core.parallel import ordered_map
from ssumkit.core.rng import RngStream, as_generator
from ssumkit.core.surrogate import Point, Sample, Sampler, SurrogateModel
from ssumkit.errors import TraceTooShort
from ssumkit.models.trace import RunTrace

logger = logging.getLogger(__name__)


@dataclass
class TightnessReport:
    """Outcome of one tightness and upper-bound check."""

    a1_ok: bool
    a2_ok: bool
    a1_residual: float  # |ghat(y, y) - g(y)|
    a2_margin: float  # ghat(x, y) - g(x), negative means violated

    @property
    def ok(self) -> bool:
        return self.a1_ok and self.a2_ok


def check_tightness(
    model: SurrogateModel, x: Point, y: Point, xi: Sample, tol: float = 1e-9
) -> TightnessReport:
    """
    Check that ghat(., y, xi) touches g(., xi) at y and lies above it at x.

    Args:
        model: Surrogate model
        x: Point where the upper bound is checked
        y: Anchor point
        xi: Sample
        tol: Relative tolerance, scaled by 1 + |g|

    Returns:
        TightnessReport with both verdicts and their margins
    """
    g_y = model.eval_g(y, xi)
    ghat_y = model.eval_ghat(y, y, xi)
    g_x = model.eval_g(x, xi)
    ghat_x = model.eval_ghat(x, y, xi)
    residual = abs(ghat_y - g_y)
    margin = ghat_x - g_x
    return TightnessReport(
        a1_ok=bool(residual <= tol * (1.0 + abs(g_y))),
        a2_ok=bool(margin >= -tol * (1.0 + abs(g_x))),
        a1_residual=float(residual),
        a2_margin=float(margin),
    )


def tightness_sweep(
    model: SurrogateModel,
    draw: Callable[[np.random.Generator], tuple[Point, Point, Sample]],
    n_trials: int,
    stream: RngStream,
    tol: float = 1e-9,
    threads: int = 1,
) -> list[TightnessReport]:
    """
    Run check_tightness on n_trials random (x, y, xi) triples.

    Trial i draws from stream.child(i), so the reports are identical for any
    thread count.
    """

    def trial(child: RngStream) -> TightnessReport:
        x, y, xi = draw(child.generator())
        return check_tightness(model, x, y, xi, tol)

    return ordered_map(trial, stream.children(n_trials), threads)


@dataclass
class ConvexityReport:
    ok: bool
    margin: float  # lhs - (gamma/2) t^2 ||d||^2


def check_strong_convexity(
    model: SurrogateModel,
    x: Point,
    y: Point,
    xi: Sample,
    direction: np.ndarray,
    t: float,
    gamma: Optional[float] = None,
    tol: float = 1e-6,
) -> ConvexityReport:
    """
    Check strong convexity of x -> ghat(x, y, xi) along one direction.

    Checks ghat(x + t d) - ghat(x) - t * D_d ghat(x) >= (gamma/2) t^2 ||d||^2,
    with the directional derivative taken by central differences.
    """
    if gamma is None:
        gamma = model.strong_convexity
    v = model.to_vector(x)
    d = np.asarray(direction, dtype=float).ravel()

    def ghat(w: np.ndarray) -> float:
        return model.eval_ghat(model.from_vector(w, x), y, xi)

    h = FD_STEP_SCALE * (1.0 + float(np.linalg.norm(v)))
    slope = (ghat(v + h * d) - ghat(v - h * d)) / (2.0 * h)
    lhs = ghat(v + t * d) - ghat(v) - t * slope
    margin = lhs - 0.5 * gamma * t * t * float(d @ d)
    scale = 1.0 + abs(ghat(v))
    return ConvexityReport(ok=bool(margin >= -tol * scale), margin=float(margin))


@dataclass
class StepNormReport:
    """Result of the O(1/r) step-norm check."""

    ok: bool
    constant: float  # C = max_{r <= r_min} r * step_norm(r)
    tail_max: float  # max_{r > r_min} r * step_norm(r)
    slack: float


def step_norm_report(
    trace: Union[RunTrace, Sequence[float]],
    r_min: int,
    slack: float,
    r_start: int = 1,
) -> StepNormReport:
    """
    Compare r * step_norm(r) on the tail of a trace against its early maximum.

    Args:
        trace: RunTrace or the raw step-norm sequence (index 0 is r = 1)
        r_min: End of the calibration window
        slack: Allowed growth factor over the calibration constant
        r_start: First iteration of the calibration window. Early iterates
            can move by O(1) before the aggregate settles.

    Raises:
        TraceTooShort: If the trace has at most 2 * r_min iterations
    """
    steps = trace.step_norms if isinstance(trace, RunTrace) else list(trace)
    if len(steps) <= 2 * r_min:
        raise TraceTooShort(
            f"need more than {2 * r_min} iterations, trace has {len(steps)}"
        )
    scaled = np.arange(1, len(steps) + 1) * np.asarray(steps, dtype=float)
    constant = float(np.max(scaled[r_start - 1 : r_min]))
    tail_max = float(np.max(scaled[r_min:]))
    ok = bool(tail_max <= slack * constant)
    if not ok:
        logger.warning(
            f"Step norms decay slower than 1/r: tail max {tail_max:.4g} "
            f"exceeds {slack} x {constant:.4g}"
        )
    return StepNormReport(ok=ok, constant=constant, tail_max=tail_max, slack=slack)


def step_norm_bound_check(
    trace: Union[RunTrace, Sequence[float]],
    r_min: int,
    slack: float,
    r_start: int = 1,
) -> bool:
    """True iff r * step_norm(r) <= slack * C for every r > r_min."""
    return step_norm_report(trace, r_min, slack, r_start).ok


def stationarity_gap(
    model: SurrogateModel,
    x: Point,
    n_samples: int,
    rng: Any,
    sampler: Sampler,
) -> float:
    """
    Projected-gradient stationarity measure of x for the sampled average.

    Returns ||x - project(x - grad)|| where grad averages the g1 gradient and
    a g2 subgradient over n_samples fresh draws. Zero at stationary points of
    that average.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    gen = as_generator(rng)
    v = model.to_vector(x)
    grad = np.zeros_like(v)
    for _ in range(n_samples):
        xi = sampler(gen)
        grad += model.grad_g1(x, xi) + model.subgrad_g2(x, xi)
    grad /= n_samples
    stepped = model.project(model.from_vector(v - grad, x))
    return float(np.linalg.norm(v - model.to_vector(stepped)))
