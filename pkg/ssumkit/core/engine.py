"""
The SSUM iteration and its sample-average reference.

    draw xi^r, observe(x^{r-1}, xi^r), x^r <- argmin (1/r) sum_i ghat(., x^{i-1}, xi^i)
"""

import logging
import math
from typing import Any, Callable, Optional

import numpy as np

from ssumkit.config import EARLY_STOP_PATIENCE, EARLY_STOP_STEP
from ssumkit.core.rng import as_generator
from ssumkit.core.surrogate import Point, Sampler, SurrogateModel
from ssumkit.errors import InfeasibleStart
from ssumkit.models.trace import RunTrace, TraceRecord

logger = logging.getLogger(__name__)

Callback = Callable[[int, Point], None]


def _check_feasible(model: SurrogateModel, x0: Point) -> None:
    projected = model.project(x0)
    scale = 1.0 + float(np.linalg.norm(model.to_vector(x0)))
    if model.distance(projected, x0) > 1e-12 * scale:
        raise InfeasibleStart("starting point is not in the feasible set")


def _sample_average(model: SurrogateModel, x: Point, samples: list) -> float:
    return math.fsum(model.eval_g(x, xi) for xi in samples) / len(samples)


def run_ssum(
    model: SurrogateModel,
    sampler: Sampler,
    x0: Point,
    r_max: int,
    trace_every: int = 1,
    rng: Any = 0,
    track_gap: bool = False,
    keep_iterates: bool = False,
    callback: Optional[Callback] = None,
    early_stop: bool = False,
) -> RunTrace:
    """
    Run the stochastic successive upper-bound minimization loop.

    Args:
        model: Fresh surrogate model (no samples observed yet)
        sampler: Draws one sample from a numpy Generator
        x0: Feasible starting point
        r_max: Number of iterations
        trace_every: Record diagnostics every this many iterations
        rng: Generator, RngStream or integer seed
        track_gap: Record fhat^r(x^r) - f^r(x^r). Keeps every drawn sample,
            so memory grows with r; the update itself never uses them.
        keep_iterates: Store every iterate in the returned trace
        callback: Called as callback(r, x^r) after every update
        early_stop: Stop once the step norm stays below EARLY_STOP_STEP for
            EARLY_STOP_PATIENCE consecutive iterations

    Returns:
        RunTrace with the final iterate x^{r_max} (or the early-stop iterate)

    Raises:
        InfeasibleStart: If project(x0) != x0
    """
    if r_max < 1:
        raise ValueError(f"r_max must be at least 1, got {r_max}")
    if trace_every < 1:
        raise ValueError(f"trace_every must be at least 1, got {trace_every}")
    _check_feasible(model, x0)

    gen = as_generator(rng)
    trace = RunTrace(iterates=[] if keep_iterates else None)
    history: list = []
    x_prev = x0
    quiet = 0

    for r in range(1, r_max + 1):
        xi = sampler(gen)
        sampled_obj = model.eval_g(x_prev, xi)
        model.observe(x_prev, xi)
        if track_gap:
            history.append(xi)
        x = model.minimize_aggregate()
        step = model.distance(x, x_prev)
        trace.step_norms.append(step)

        if r % trace_every == 0 or r == r_max:
            gap = float("nan")
            agg = float("nan")
            agg_prev = float("nan")
            if track_gap:
                agg = model.eval_aggregate(x)
                agg_prev = model.eval_aggregate(x_prev)
                gap = agg - _sample_average(model, x, history)
            trace.records.append(
                TraceRecord(
                    r=r,
                    step_norm=step,
                    surrogate_gap=gap,
                    sampled_obj=sampled_obj,
                    aggregate_value=agg,
                    aggregate_at_previous=agg_prev,
                )
            )
        if keep_iterates:
            trace.iterates.append(x)
        if callback is not None:
            callback(r, x)

        x_prev = x
        quiet = quiet + 1 if step < EARLY_STOP_STEP else 0
        if early_stop and quiet >= EARLY_STOP_PATIENCE:
            logger.info(
                f"Step norm below {EARLY_STOP_STEP} for {quiet} iterations, "
                f"stopping at r={r}"
            )
            trace.stopped_early = True
            if trace.records and trace.records[-1].r != r:
                trace.records.append(
                    TraceRecord(
                        r=r,
                        step_norm=step,
                        surrogate_gap=float("nan"),
                        sampled_obj=sampled_obj,
                    )
                )
            break

    trace.final = x_prev
    logger.debug(f"SSUM finished after {trace.n_iterations} iterations")
    return trace


def run_saa(
    minimize_sample_average: Callable[[list], Point],
    sampler: Sampler,
    r_max: int,
    rng: Any = 0,
    eval_at: Optional[list[int]] = None,
) -> dict[int, Point]:
    """
    Sample average approximation baseline.

    Re-solves argmin (1/r) sum_i g(x, xi^i) from scratch on the first r
    samples of the same stream SSUM would see.

    Args:
        minimize_sample_average: Exact minimizer of the sample average
        sampler: Draws one sample from a numpy Generator
        r_max: Number of samples drawn
        rng: Generator, RngStream or integer seed
        eval_at: Sample counts at which to solve; defaults to r_max only

    Returns:
        Dictionary mapping r to the SAA solution on the first r samples
    """
    gen = as_generator(rng)
    checkpoints = sorted(set(eval_at or [r_max]))
    samples = []
    solutions = {}
    for r in range(1, r_max + 1):
        samples.append(sampler(gen))
        if r in checkpoints:
            solutions[r] = minimize_sample_average(list(samples))
    return solutions
