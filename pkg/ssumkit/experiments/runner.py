"""
Experiment driver.

Runs every configured method from its own derived random stream, snapshots
the iterate at each scheduled iteration and scores all snapshots on one
shared evaluation set, so differences between methods are algorithmic.

Stream layout under RngStream(seed):
    child 0        scenario (channel model, planted data, starting point)
    child 1        shared evaluation draws
    child 2 + i    method i in the order of the Method enum
"""

import copy
import logging
import time
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from ssumkit.core.engine import run_ssum
from ssumkit.core.rng import RngStream
from ssumkit.errors import ConfigError
from ssumkit.experiments.problems import (
    LeastSquaresSource,
    expected_least_squares,
    least_squares_problem,
)
from ssumkit.models.experiment import (
    ExperimentConfig,
    Method,
    ProblemKind,
    ResultRow,
    ResultTable,
)
from ssumkit.models.network import ChannelModel
from ssumkit.services.dictlearn import (
    PlantedSource,
    expected_loss,
    online_dictionary_learning,
    random_dictionary,
)
from ssumkit.services.export import ExportFormat, ExportService, load_corpus
from ssumkit.services.sg_variants import (
    finite_sampler,
    l1_ssum_sg,
    sg_run,
    ssum_sg_model,
)
from ssumkit.services.wmmse import (
    build_channel_model,
    evaluation_channels,
    mean_wmmse,
    one_sample_wmmse,
    random_precoders,
    score_precoders,
    sg_beamforming,
    stochastic_wmmse,
)

logger = logging.getLogger(__name__)

SCENARIO_STREAM = 0
EVALUATION_STREAM = 1
METHOD_STREAM_OFFSET = 2

Scorer = Callable[[Any], tuple[float, float]]


def method_stream(root: RngStream, method: Method) -> RngStream:
    """Stream of one method; independent of which other methods run."""
    return root.child(METHOD_STREAM_OFFSET + list(Method).index(method))


class Snapshots:
    """Callback that copies the iterate at scheduled iterations."""

    def __init__(self, schedule: list[int]):
        self.schedule = set(schedule)
        self.points: dict[int, Any] = {}
        self.wall_times: dict[int, float] = {}
        self._start = time.perf_counter()

    def __call__(self, r: int, x: Any) -> None:
        if r in self.schedule:
            self.points[r] = copy.deepcopy(x)
            self.wall_times[r] = time.perf_counter() - self._start

    def rows(self, method: Method, score: Scorer) -> list[ResultRow]:
        rows = []
        for r in sorted(self.points):
            value, stderr = score(self.points[r])
            rows.append(
                ResultRow(
                    method=method.value,
                    iteration=r,
                    value=value,
                    stderr=stderr,
                    wall_time=self.wall_times[r],
                )
            )
        return rows


def _trace_every(config: ExperimentConfig) -> int:
    return max(config.eval_every, 1)


def _run_wmmse(
    config: ExperimentConfig,
    root: RngStream,
    channel_model: Optional[ChannelModel],
) -> ResultTable:
    network = config.network
    if network is None:
        raise ConfigError("network: required table is missing for problem wmmse")
    scenario = root.child(SCENARIO_STREAM)
    if channel_model is None:
        channel_model = build_channel_model(network, scenario.child(0).generator())
    V0 = random_precoders(network, scenario.child(1).generator())
    channels = evaluation_channels(
        channel_model, config.n_mc, root.child(EVALUATION_STREAM)
    )

    def score(V) -> tuple[float, float]:
        estimate = score_precoders(V, channels, network, config.threads)
        return estimate.mean, estimate.stderr

    table = ResultTable()
    for method in config.methods:
        stream = method_stream(root, method)
        snaps = Snapshots(config.schedule)
        logger.info(f"Running {method.value} for {config.r_max} iterations")
        if method == Method.STOCHASTIC_WMMSE:
            stochastic_wmmse(
                network,
                channel_model,
                V0,
                config.r_max,
                rng=stream,
                trace_every=_trace_every(config),
                callback=snaps,
            )
        elif method == Method.ONE_SAMPLE_WMMSE:
            one_sample_wmmse(
                network, channel_model, V0, stream, n_iter=config.r_max, callback=snaps
            )
        elif method == Method.MEAN_WMMSE:
            mean_wmmse(
                network,
                channel_model,
                V0,
                variant=config.mean_variant,
                n_iter=config.r_max,
                callback=snaps,
            )
        elif method == Method.SG_BEAMFORMING:
            sg_beamforming(
                network,
                channel_model,
                V0,
                config.r_max,
                rng=stream,
                trace_every=_trace_every(config),
                callback=snaps,
            )
        table.extend(snaps.rows(method, score))
    return table


def _run_dictionary(config: ExperimentConfig, root: RngStream) -> ResultTable:
    params = config.dictionary
    scenario = root.child(SCENARIO_STREAM)
    if params.corpus is not None:
        corpus = load_corpus(params.corpus)
        source = finite_sampler(corpus)
        signals = corpus
        n = corpus.shape[1]
    else:
        planted = PlantedSource(
            params.n, params.k, params.sparsity, params.noise_std, seed=config.seed
        )
        source = planted
        signals = planted.draw(config.n_mc, root.child(EVALUATION_STREAM))
        n = params.n
    D0 = random_dictionary(n, params.k, scenario.child(1))

    def score(D) -> tuple[float, float]:
        return expected_loss(D, signals, params.lam, config.threads)

    table = ResultTable()
    for method in config.methods:
        gamma = params.gamma_prox if method == Method.DICTIONARY_PROX else 0.0
        snaps = Snapshots(config.schedule)
        logger.info(f"Running {method.value} (gamma={gamma}) on {config.r_max} signals")
        online_dictionary_learning(
            source,
            D0,
            params.lam,
            gamma,
            config.r_max,
            rng=method_stream(root, method),
            trace_every=_trace_every(config),
            callback=snaps,
        )
        table.extend(snaps.rows(method, score))
    return table


def _run_sg(config: ExperimentConfig, root: RngStream) -> ResultTable:
    params = config.sg
    source = LeastSquaresSource.planted(params, root.child(SCENARIO_STREAM))
    samples = source.draw(config.n_mc, root.child(EVALUATION_STREAM))
    x0 = np.zeros(params.dim)
    smooth = least_squares_problem(params.dim)

    def score(x) -> tuple[float, float]:
        return expected_least_squares(x, samples, config.threads)

    table = ResultTable()
    for method in config.methods:
        stream = method_stream(root, method)
        snaps = Snapshots(config.schedule)
        every = _trace_every(config)
        logger.info(f"Running {method.value} for {config.r_max} iterations")
        if method == Method.SG_DIMINISHING:
            sg_run(
                smooth,
                x0,
                config.r_max,
                source,
                stream,
                trace_every=every,
                callback=snaps,
            )
        elif method == Method.SSUM_SG:
            run_ssum(
                ssum_sg_model(smooth),
                source,
                x0,
                config.r_max,
                trace_every=every,
                rng=stream,
                callback=snaps,
            )
        elif method == Method.L1_SSUM_SG:
            problem = least_squares_problem(params.dim, l1=params.l1)
            l1_ssum_sg(
                problem,
                x0,
                config.r_max,
                source,
                stream,
                trace_every=every,
                callback=snaps,
            )
        elif method == Method.SG_CONSTANT:
            if not params.allow_constant_step:
                raise ConfigError(
                    "sg.allow_constant_step: must be true to run sg_constant"
                )
            sg_run(
                smooth,
                x0,
                config.r_max,
                source,
                stream,
                step_rule="constant",
                step=params.constant_step,
                trace_every=every,
                callback=snaps,
            )
        table.extend(snaps.rows(method, score))
    return table


def run_experiment(
    config: ExperimentConfig,
    channel_model: Optional[ChannelModel] = None,
    write: bool = True,
) -> ResultTable:
    """
    Run every configured method and score it on the shared evaluation set.

    Args:
        config: Validated experiment configuration
        channel_model: Channel statistics to use instead of generating them
            from the network layout (WMMSE experiments only)
        write: Write results.csv (and results.xlsx when configured) to the
            output directory

    Returns:
        ResultTable with one row per (method, scheduled iteration)

    Raises:
        ConfigError: If the configuration is inconsistent
    """
    if config.n_mc < 1:
        raise ConfigError(f"experiment.n_mc: must be at least 1, got {config.n_mc}")
    if not config.methods:
        raise ConfigError("experiment.methods: must not be empty")

    root = RngStream(config.seed)
    logger.info(
        f"Experiment '{config.name}': {config.problem.value}, "
        f"methods {[m.value for m in config.methods]}, seed {config.seed}"
    )
    start = time.perf_counter()
    if config.problem == ProblemKind.WMMSE:
        table = _run_wmmse(config, root, channel_model)
    elif config.problem == ProblemKind.DICTIONARY:
        table = _run_dictionary(config, root)
    else:
        table = _run_sg(config, root)
    logger.info(
        f"Experiment '{config.name}' finished in {time.perf_counter() - start:.1f}s"
    )

    if write:
        exporter = ExportService(config.output_dir)
        exporter.export_results(table)
        if config.write_xlsx:
            exporter.export_results(table, ExportFormat.XLSX, config)
    return table


def run_and_emit(config: ExperimentConfig) -> tuple[ResultTable, list[Path]]:
    """Run an experiment, then write results.csv, plot data and the manifest."""
    table = run_experiment(config)
    paths = ExportService(config.output_dir).emit_plot_data(table, config)
    return table, paths
