"""
Property suite: seeded sweeps of every invariant the algorithms rely on.

Checks never raise on failure; each one returns a CheckResult with its
measured margin and the report collects them. Margins are signed so that a
negative value means the property was violated.
"""

import copy
import logging
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd

from ssumkit.config import CSV_FLOAT_FORMAT
from ssumkit.core.diagnostics import (
    check_strong_convexity,
    step_norm_report,
    tightness_sweep,
)
from ssumkit.core.engine import run_saa, run_ssum
from ssumkit.core.parallel import ordered_map
from ssumkit.core.rng import RngStream
from ssumkit.core.surrogate import QuadraticToyModel, SurrogateModel
from ssumkit.experiments.oracles import (
    diagonal_power_multiplier,
    l1_quadratic_minimizer,
    scalar_capacity,
)
from ssumkit.experiments.problems import LeastSquaresSource, least_squares_problem
from ssumkit.linalg import power_bisection
from ssumkit.models.experiment import ExperimentConfig, PropertyParams, SGParams
from ssumkit.models.network import ChannelRealization, NetworkConfig
from ssumkit.services.dictlearn import (
    DictionaryModel,
    PlantedSource,
    lasso,
    lasso_kkt_residual,
    random_dictionary,
)
from ssumkit.services.sg_variants import (
    QuadraticSurrogateModel,
    SmoothProblem,
    estimate_lipschitz,
    l1_ssum_sg,
    lipschitz_ratio,
    sg_run,
    ssum_sg_model,
)
from ssumkit.services.wmmse import (
    WMMSESurrogateModel,
    build_channel_model,
    cell_powers,
    mmse_receiver,
    random_precoders,
    rate,
    sample_channels,
    stochastic_wmmse,
)

logger = logging.getLogger(__name__)

PROPERTIES_FILE = "properties.csv"
NEGATIVE_RHO_SCALE = 1e3
POWER_RTOL = 1e-6
SG_EQUIVALENCE_TOL = 1e-10
RUNNING_MEAN_TOL = 1e-12
L1_ORACLE_TOL = 1e-8
L1_ORACLE_ITERATIONS = 100
CAPACITY_TOL = 1e-10
LASSO_KKT_TOL = 1e-8
LIPSCHITZ_RTOL = 1e-6


@dataclass
class CheckResult:
    """Outcome of one registered property check."""

    name: str
    passed: bool
    margin: float
    values: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        details = "; ".join(f"{k}={v:.6g}" for k, v in self.values.items())
        return {
            "check": self.name,
            "passed": self.passed,
            "margin": self.margin,
            "details": details,
        }


@dataclass
class PropertyReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def failures(self) -> list[CheckResult]:
        return [result for result in self.results if not result.passed]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [result.to_dict() for result in self.results],
            columns=["check", "passed", "margin", "details"],
        )

    def format(self) -> str:
        lines = []
        for result in self.results:
            status = "PASS" if result.passed else "FAIL"
            details = result.to_dict()["details"]
            lines.append(
                f"{status} {result.name:<26} margin={result.margin:.6g}  {details}"
            )
        if self.passed:
            lines.append("all checks passed")
        else:
            lines.append(f"{len(self.failures)} of {len(self.results)} checks failed")
        return "\n".join(lines)

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(
            path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n"
        )
        return path


@dataclass
class SuiteContext:
    """Everything a check needs: settings, a network and its own stream."""

    config: ExperimentConfig
    network: NetworkConfig
    stream: RngStream

    @property
    def params(self) -> PropertyParams:
        return self.config.properties

    @property
    def threads(self) -> int:
        return self.config.threads


Check = Callable[[SuiteContext], CheckResult]
REGISTRY: list[tuple[str, Check]] = []


def register(name: str):
    """Add a check to the suite under name."""

    def wrap(func: Check) -> Check:
        REGISTRY.append((name, func))
        return func

    return wrap


def desk_network() -> NetworkConfig:
    """Seven cells, one 2-antenna user per 2-antenna base station."""
    return NetworkConfig.uniform(7, users_per_cell=1, tx_antennas=2, rx_antennas=2)


def _scaled_precoders(network: NetworkConfig, gen: np.random.Generator):
    scale = math.sqrt(float(gen.uniform(0.0, 1.0)))
    return [scale * V for V in random_precoders(network, gen)]


def _sweep_result(name: str, reports) -> CheckResult:
    worst_margin = min(report.a2_margin for report in reports)
    worst_residual = max(report.a1_residual for report in reports)
    failed = sum(not report.ok for report in reports)
    return CheckResult(
        name=name,
        passed=failed == 0,
        margin=worst_margin,
        values={
            "trials": len(reports),
            "failed": failed,
            "max_tightness_residual": worst_residual,
        },
    )


@register("wmmse_tightness")
def check_wmmse_tightness(ctx: SuiteContext) -> CheckResult:
    network = ctx.network
    if ctx.params.inject_negative_rho:
        network = copy.copy(network)
        network.rho = -NEGATIVE_RHO_SCALE * max(1.0, network.csi.snr_linear)
        logger.warning(f"Injecting negative rho {network.rho:.4g}")
    channel_model = build_channel_model(network, ctx.stream.child(0).generator())
    V0 = random_precoders(network, ctx.stream.child(1).generator())
    model = WMMSESurrogateModel(network, V0)

    def draw(gen):
        x = _scaled_precoders(network, gen)
        y = _scaled_precoders(network, gen)
        return x, y, sample_channels(channel_model, gen)

    reports = tightness_sweep(
        model,
        draw,
        ctx.params.n_trials,
        ctx.stream.child(2),
        ctx.params.tightness_tol,
        ctx.threads,
    )
    return _sweep_result("wmmse_tightness", reports)


def _dictionary_setup(ctx: SuiteContext) -> tuple[DictionaryModel, PlantedSource]:
    params = ctx.config.dictionary
    source = PlantedSource(
        params.n, params.k, params.sparsity, params.noise_std, seed=ctx.config.seed
    )
    D0 = random_dictionary(params.n, params.k, ctx.stream.child(0))
    return DictionaryModel(D0, params.lam, params.gamma_prox), source


def _random_dictionary_point(ctx: SuiteContext, gen: np.random.Generator):
    params = ctx.config.dictionary
    D = random_dictionary(params.n, params.k, gen)
    return D * gen.uniform(0.2, 1.0, size=params.k)


@register("dictionary_tightness")
def check_dictionary_tightness(ctx: SuiteContext) -> CheckResult:
    model, source = _dictionary_setup(ctx)

    def draw(gen):
        x = _random_dictionary_point(ctx, gen)
        y = _random_dictionary_point(ctx, gen)
        return x, y, source(gen)

    reports = tightness_sweep(
        model,
        draw,
        ctx.params.n_trials,
        ctx.stream.child(1),
        ctx.params.tightness_tol,
        ctx.threads,
    )
    return _sweep_result("dictionary_tightness", reports)


def _convexity_sweep(
    ctx: SuiteContext,
    name: str,
    model: SurrogateModel,
    draw: Callable[[np.random.Generator], tuple],
) -> CheckResult:
    def one_direction(child: RngStream):
        gen = child.generator()
        x, y, xi = draw(gen)
        d = gen.standard_normal(model.to_vector(x).shape[0])
        d /= np.linalg.norm(d)
        return check_strong_convexity(
            model, x, y, xi, d, t=0.5, tol=ctx.params.convexity_tol
        )

    reports = ordered_map(
        one_direction, ctx.stream.children(ctx.params.n_convexity_checks), ctx.threads
    )
    failed = sum(not report.ok for report in reports)
    return CheckResult(
        name=name,
        passed=failed == 0,
        margin=min(report.margin for report in reports),
        values={
            "directions": len(reports),
            "failed": failed,
            "modulus": model.strong_convexity,
        },
    )


@register("wmmse_strong_convexity")
def check_wmmse_convexity(ctx: SuiteContext) -> CheckResult:
    network = ctx.network
    channel_model = build_channel_model(network, ctx.stream.child(0).generator())
    model = WMMSESurrogateModel(
        network, random_precoders(network, ctx.stream.child(1).generator())
    )

    def draw(gen):
        return (
            _scaled_precoders(network, gen),
            _scaled_precoders(network, gen),
            sample_channels(channel_model, gen),
        )

    sub = SuiteContext(ctx.config, network, ctx.stream.child(2))
    return _convexity_sweep(sub, "wmmse_strong_convexity", model, draw)


@register("dictionary_strong_convexity")
def check_dictionary_convexity(ctx: SuiteContext) -> CheckResult:
    model, source = _dictionary_setup(ctx)

    def draw(gen):
        return (
            _random_dictionary_point(ctx, gen),
            _random_dictionary_point(ctx, gen),
            source(gen),
        )

    sub = SuiteContext(ctx.config, ctx.network, ctx.stream.child(1))
    return _convexity_sweep(sub, "dictionary_strong_convexity", model, draw)


def _random_psd(stream: RngStream, dim: int = 4) -> np.ndarray:
    gen = stream.generator()
    R = gen.standard_normal((dim, dim))
    return R @ R.T / dim + 0.1 * np.eye(dim)


def _quadratic_problem(Q: np.ndarray, lipschitz: float) -> SmoothProblem:
    return SmoothProblem(
        grad=lambda x, xi: Q @ x - xi,
        lipschitz=lipschitz,
        value=lambda x, xi: float(0.5 * x @ Q @ x - xi @ x),
    )


def _random_quadratic(stream: RngStream, dim: int = 4) -> SmoothProblem:
    """g1(x, xi) = 0.5 x^T Q x - <xi, x> with a random PSD Q."""
    Q = _random_psd(stream, dim)
    return _quadratic_problem(Q, estimate_lipschitz(Q, n_iter=500, rng=stream.child(0)))


@register("sg_equivalence")
def check_sg_equivalence(ctx: SuiteContext) -> CheckResult:
    n_iter = ctx.params.sg_iterations
    worst = 0.0
    for i in range(3):
        stream = ctx.stream.child(i)
        problem = _random_quadratic(stream.child(0))
        dim = 4
        mean = stream.child(1).generator().standard_normal(dim)

        def sampler(gen, mean=mean):
            return mean + gen.standard_normal(dim)

        x0 = np.zeros(dim)
        direct = sg_run(
            problem, x0, n_iter, sampler, stream.child(2), keep_iterates=True
        )
        ssum = run_ssum(
            ssum_sg_model(problem),
            sampler,
            x0,
            n_iter,
            rng=stream.child(2),
            keep_iterates=True,
        )
        for a, b in zip(direct.iterates, ssum.iterates):
            scale = 1.0 + float(np.max(np.abs(a)))
            worst = max(worst, float(np.max(np.abs(a - b))) / scale)
    return CheckResult(
        name="sg_equivalence",
        passed=worst <= SG_EQUIVALENCE_TOL,
        margin=SG_EQUIVALENCE_TOL - worst,
        values={"max_rel_diff": worst, "iterations": n_iter},
    )


@register("sg_lipschitz")
def check_sg_lipschitz(ctx: SuiteContext) -> CheckResult:
    n_pairs = ctx.params.n_trials
    dim = 4
    quadratic = _random_quadratic(ctx.stream.child(0), dim)
    params = SGParams(dim=min(ctx.config.sg.dim, 5), noise_std=ctx.config.sg.noise_std)
    source = LeastSquaresSource.planted(params, ctx.stream.child(1))

    def quadratic_pair(gen):
        return (
            gen.standard_normal(dim),
            gen.standard_normal(dim),
            gen.standard_normal(dim),
        )

    def least_squares_pair(gen):
        return (
            gen.standard_normal(params.dim),
            gen.standard_normal(params.dim),
            source(gen),
        )

    ratios = {
        "quadratic": lipschitz_ratio(
            quadratic, quadratic_pair, n_pairs, ctx.stream.child(2)
        ),
        "least_squares": lipschitz_ratio(
            least_squares_problem(params.dim),
            least_squares_pair,
            n_pairs,
            ctx.stream.child(3),
        ),
    }
    worst = max(ratios.values())
    bound = 1.0 + LIPSCHITZ_RTOL
    return CheckResult(
        name="sg_lipschitz",
        passed=worst <= bound,
        margin=bound - worst,
        values={
            "quadratic_max_ratio": ratios["quadratic"],
            "least_squares_max_ratio": ratios["least_squares"],
            "pairs": n_pairs,
        },
    )


@register("sg_underestimated_lipschitz")
def check_sg_underestimated_lipschitz(ctx: SuiteContext) -> CheckResult:
    """Negative control: with L halved the quadratic surrogate must undercut g1."""
    dim = 4
    Q = _random_psd(ctx.stream.child(0), dim)
    eigvals, eigvecs = np.linalg.eigh(Q)
    top = eigvecs[:, -1]
    model = QuadraticSurrogateModel(_quadratic_problem(Q, 0.5 * float(eigvals[-1])))

    def draw(gen):
        y = gen.standard_normal(dim)
        d = top + 0.1 * gen.standard_normal(dim)
        return y + gen.uniform(0.5, 2.0) * d, y, gen.standard_normal(dim)

    reports = tightness_sweep(
        model,
        draw,
        ctx.params.n_trials,
        ctx.stream.child(1),
        ctx.params.tightness_tol,
        ctx.threads,
    )
    violated = sum(not report.a2_ok for report in reports)
    worst_margin = min(report.a2_margin for report in reports)
    return CheckResult(
        name="sg_underestimated_lipschitz",
        passed=violated > 0 and all(report.a1_ok for report in reports),
        margin=-worst_margin,
        values={"trials": len(reports), "violated": violated},
    )


@register("running_mean")
def check_running_mean(ctx: SuiteContext) -> CheckResult:
    n_iter = ctx.params.sg_iterations

    def sampler(gen):
        return gen.standard_normal(3)

    model = QuadraticToyModel()
    trace = run_ssum(
        model, sampler, np.zeros(3), n_iter, rng=ctx.stream, keep_iterates=True
    )
    gen = ctx.stream.generator()
    samples = np.array([sampler(gen) for _ in range(n_iter)])
    means = np.cumsum(samples, axis=0) / np.arange(1, n_iter + 1)[:, None]
    worst = max(
        float(np.max(np.abs(x - m)) / (1.0 + np.max(np.abs(m))))
        for x, m in zip(trace.iterates, means)
    )
    checkpoints = [1, n_iter // 2, n_iter]
    saa = run_saa(
        QuadraticToyModel().minimize_sample_average,
        sampler,
        n_iter,
        rng=ctx.stream,
        eval_at=checkpoints,
    )
    saa_gap = max(
        float(np.max(np.abs(saa[r] - trace.iterates[r - 1]))) for r in saa
    )
    worst = max(worst, saa_gap)
    return CheckResult(
        name="running_mean",
        passed=worst <= RUNNING_MEAN_TOL,
        margin=RUNNING_MEAN_TOL - worst,
        values={"max_rel_diff": worst, "saa_diff": saa_gap},
    )


@register("l1_oracle")
def check_l1_oracle(ctx: SuiteContext) -> CheckResult:
    l1 = ctx.config.sg.l1 if ctx.config.sg.l1 > 0 else 0.05
    params = SGParams(
        dim=min(ctx.config.sg.dim, 5), noise_std=ctx.config.sg.noise_std, l1=l1
    )
    source = LeastSquaresSource.planted(params, ctx.stream.child(0))
    problem = least_squares_problem(params.dim, l1=l1)
    L = problem.lipschitz
    n_iter = L1_ORACLE_ITERATIONS
    x0 = np.zeros(params.dim)
    trace = l1_ssum_sg(
        problem, x0, n_iter, source, ctx.stream.child(1), keep_iterates=True
    )

    gen = ctx.stream.child(1).generator()
    linear_sum = np.zeros(params.dim)
    x_prev = x0
    worst = 0.0
    for r, x in enumerate(trace.iterates, start=1):
        xi = source(gen)
        linear_sum += problem.grad(x_prev, xi) - L * x_prev
        oracle = l1_quadratic_minimizer(L, linear_sum / r, l1)
        worst = max(worst, float(np.max(np.abs(oracle - x))))
        x_prev = x
    return CheckResult(
        name="l1_oracle",
        passed=worst <= L1_ORACLE_TOL,
        margin=L1_ORACLE_TOL - worst,
        values={"max_abs_diff": worst, "iterations": n_iter},
    )


@register("scalar_capacity")
def check_scalar_capacity(ctx: SuiteContext) -> CheckResult:
    gen = ctx.stream.generator()
    worst_rate = 0.0
    worst_mmse = math.inf
    for _ in range(100):
        h = complex(gen.standard_normal(), gen.standard_normal())
        v = complex(gen.standard_normal(), gen.standard_normal())
        noise = float(gen.uniform(0.1, 2.0))
        H = ChannelRealization.from_lists([[np.array([[h]])]], [0])
        V = [np.array([[v]])]
        U = mmse_receiver(V, H, 0, noise)
        achieved = rate(U, V, H, 0, noise)
        worst_rate = max(worst_rate, abs(achieved - scalar_capacity(h, v, noise)))
        for _ in range(100):
            delta = complex(gen.standard_normal(), gen.standard_normal())
            perturbed = U + 0.1 * abs(U[0, 0]) * delta
            worst_mmse = min(worst_mmse, achieved - rate(perturbed, V, H, 0, noise))
    passed = worst_rate <= CAPACITY_TOL and worst_mmse >= -CAPACITY_TOL
    return CheckResult(
        name="scalar_capacity",
        passed=passed,
        margin=min(CAPACITY_TOL - worst_rate, worst_mmse),
        values={"max_rate_error": worst_rate, "min_mmse_advantage": worst_mmse},
    )


@register("power_bisection")
def check_power_bisection(ctx: SuiteContext) -> CheckResult:
    gen = ctx.stream.generator()
    worst_slack = 0.0
    worst_excess = -math.inf
    worst_mu = 0.0
    for _ in range(100):
        M = 4
        a = gen.uniform(0.01, 2.0, size=M)
        b = gen.standard_normal((M, 1)) + 1j * gen.standard_normal((M, 1))
        P = float(gen.uniform(0.05, 2.0))
        mu, V = power_bisection(np.diag(a).astype(complex), b, P)
        power = float(np.real(np.vdot(V, V)))
        worst_slack = max(worst_slack, mu * abs(power - P) / P)
        worst_excess = max(worst_excess, power / P - 1.0)
        reference = diagonal_power_multiplier(a, b, P)
        worst_mu = max(worst_mu, abs(mu - reference) / (1.0 + reference))
    passed = (
        worst_slack <= POWER_RTOL and worst_excess <= POWER_RTOL and worst_mu <= 1e-5
    )
    return CheckResult(
        name="power_bisection",
        passed=passed,
        margin=min(POWER_RTOL - worst_slack, POWER_RTOL - worst_excess),
        values={
            "complementary_slackness": worst_slack,
            "power_excess": worst_excess,
            "multiplier_error": worst_mu,
        },
    )


@register("lasso_kkt")
def check_lasso_kkt(ctx: SuiteContext) -> CheckResult:
    params = ctx.config.dictionary
    source = PlantedSource(
        params.n, params.k, params.sparsity, params.noise_std, seed=ctx.config.seed
    )
    gen = ctx.stream.generator()
    worst = 0.0
    for _ in range(ctx.params.n_trials):
        D = random_dictionary(params.n, params.k, gen)
        y = source(gen)
        alpha = lasso(D, y, params.lam)
        worst = max(worst, lasso_kkt_residual(D, y, alpha, params.lam))
    return CheckResult(
        name="lasso_kkt",
        passed=worst <= LASSO_KKT_TOL,
        margin=LASSO_KKT_TOL - worst,
        values={"max_kkt_residual": worst},
    )


@dataclass
class _WMMSERun:
    gap_ok: bool
    min_gap_margin: float
    gap_ratio: float
    constant: float
    tail_max: float
    step_ok: bool
    power_excess: float


def _wmmse_run(ctx: SuiteContext, stream: RngStream) -> _WMMSERun:
    params = ctx.params
    network = ctx.network
    channel_model = build_channel_model(network, stream.child(0).generator())
    V0 = random_precoders(network, stream.child(1).generator())
    excess = [-math.inf]

    def power_check(r, V):
        for used, budget in zip(cell_powers(V, network), network.power):
            excess[0] = max(excess[0], used / budget - 1.0)

    trace = stochastic_wmmse(
        network,
        channel_model,
        V0,
        params.r_max,
        rng=stream.child(2),
        trace_every=params.gap_early,
        track_gap=True,
        callback=power_check,
    )
    gaps = trace.column("surrogate_gap")
    scales = 1.0 + np.abs(trace.column("aggregate_value"))
    margins = gaps + 1e-9 * scales
    early = trace.record_at(params.gap_early).surrogate_gap
    late = trace.record_at(params.r_max).surrogate_gap
    steps = step_norm_report(trace, params.r_min, params.slack, params.r_start)
    return _WMMSERun(
        gap_ok=bool(np.all(margins >= 0)),
        min_gap_margin=float(np.min(margins)),
        gap_ratio=late / early if early > 0 else math.inf,
        constant=steps.constant,
        tail_max=steps.tail_max,
        step_ok=steps.ok,
        power_excess=excess[0],
    )


def wmmse_run_checks(ctx: SuiteContext) -> list[CheckResult]:
    """Surrogate gap decay, the O(1/r) step bound and power feasibility."""
    runs = ordered_map(
        lambda s: _wmmse_run(ctx, s),
        ctx.stream.children(ctx.params.gap_seeds),
        ctx.threads,
    )
    median_ratio = statistics.median(run.gap_ratio for run in runs)
    gap = CheckResult(
        name="surrogate_gap",
        passed=all(run.gap_ok for run in runs)
        and median_ratio <= ctx.params.gap_ratio,
        margin=min(
            min(run.min_gap_margin for run in runs),
            ctx.params.gap_ratio - median_ratio,
        ),
        values={"median_ratio": median_ratio, "seeds": len(runs)},
    )
    worst = max(runs, key=lambda run: run.tail_max / run.constant)
    step = CheckResult(
        name="step_norm_bound",
        passed=all(run.step_ok for run in runs),
        margin=min(ctx.params.slack * run.constant - run.tail_max for run in runs),
        values={"C": worst.constant, "tail_max": worst.tail_max},
    )
    excess = max(run.power_excess for run in runs)
    power = CheckResult(
        name="power_feasibility",
        passed=excess <= POWER_RTOL,
        margin=POWER_RTOL - excess,
        values={"max_power_excess": excess},
    )
    return [gap, step, power]


def property_suite(
    config: ExperimentConfig,
    network: Optional[NetworkConfig] = None,
    include_runs: bool = True,
) -> PropertyReport:
    """
    Run every registered check with fixed seeds derived from config.seed.

    Args:
        config: Experiment configuration; its [properties] table sets sample
            sizes and thresholds
        network: Network of the WMMSE checks; config.network or the desk
            network when omitted
        include_runs: Also run the multi-seed stochastic WMMSE checks

    Returns:
        PropertyReport with one entry per check
    """
    network = network or config.network or desk_network()
    root = RngStream(config.seed).child(99)
    report = PropertyReport()
    for i, (name, check) in enumerate(REGISTRY):
        ctx = SuiteContext(config, network, root.child(i))
        logger.info(f"Running property check {name}")
        report.results.append(check(ctx))
    if include_runs:
        ctx = SuiteContext(config, network, root.child(len(REGISTRY)))
        logger.info("Running stochastic WMMSE property runs")
        report.results.extend(wmmse_run_checks(ctx))
    for failure in report.failures:
        logger.warning(f"Property check {failure.name} failed: {failure.values}")
    return report
