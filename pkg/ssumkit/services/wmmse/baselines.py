"""
Comparison methods for stochastic WMMSE.

The deterministic WMMSE iteration runs on one fixed channel: a single draw
(one-sample WMMSE) or the channel means (mean WMMSE). The stochastic gradient
baseline runs projected SG on the expected negative sum rate.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from ssumkit.config import DEFAULT_WMMSE_ITERATIONS
from ssumkit.core.rng import as_generator
from ssumkit.linalg import power_bisection
from ssumkit.models.network import (
    ChannelModel,
    ChannelRealization,
    MeanChannelVariant,
    NetworkConfig,
    Precoders,
)
from ssumkit.models.trace import RunTrace
from ssumkit.services.sg_variants import SmoothProblem, projected_sg_run
from ssumkit.services.wmmse.channels import mean_channels, sample_channels
from ssumkit.services.wmmse.formulas import sum_rate, surrogate_p_update
from ssumkit.services.wmmse.stochastic import (
    beamformer_gradient,
    precoders_from_vector,
    precoders_to_vector,
    project_power,
    weighted_receive_covariances,
)

logger = logging.getLogger(__name__)


@dataclass
class WMMSEResult:
    """Final precoders of a deterministic WMMSE run and its sum-rate history."""

    V: Precoders
    sum_rates: list[float] = field(default_factory=list)
    multipliers: list[float] = field(default_factory=list)


def wmmse_v_step(
    V: Precoders, H: ChannelRealization, network: NetworkConfig
) -> tuple[Precoders, list[float]]:
    """One deterministic WMMSE sweep: U, W, then V with no proximal term."""
    P = surrogate_p_update(V, H, network.noise)
    X = weighted_receive_covariances(P, H)
    V_new: Precoders = [None] * network.n_users
    mus = []
    for k in range(network.n_cells):
        users = network.users_of(k)
        if not users:
            mus.append(0.0)
            continue
        B = np.hstack([H.direct(u).conj().T @ P.U[u] @ P.W[u] for u in users])
        mu, Vk = power_bisection(X[k], B, network.power[k])
        mus.append(mu)
        start = 0
        for u in users:
            d = network.streams[u]
            V_new[u] = Vk[:, start : start + d]
            start += d
    return V_new, mus


def deterministic_wmmse(
    H: ChannelRealization,
    network: NetworkConfig,
    V0: Precoders,
    n_iter: int = DEFAULT_WMMSE_ITERATIONS,
    callback: Optional[Callable[[int, Precoders], None]] = None,
) -> WMMSEResult:
    """
    Classical WMMSE on a fixed channel.

    Alternates the MMSE receiver, the weight W = (I - U^H H V)^-1 and the
    per-cell precoder solve. The sum rate is nondecreasing across sweeps.

    Args:
        H: Channel realization
        network: Network configuration
        V0: Feasible starting precoders
        n_iter: Number of sweeps
        callback: Called as callback(i, V) after every sweep

    Returns:
        WMMSEResult with sum_rates[0] at V0 and sum_rates[i] after sweep i
    """
    V = [np.array(Vu, dtype=complex) for Vu in V0]
    result = WMMSEResult(V=V, sum_rates=[sum_rate(V, H, network.noise)])
    for i in range(1, n_iter + 1):
        V, result.multipliers = wmmse_v_step(V, H, network)
        result.sum_rates.append(sum_rate(V, H, network.noise))
        if callback is not None:
            callback(i, V)
    result.V = V
    logger.debug(f"WMMSE finished at sum rate {result.sum_rates[-1]:.6f}")
    return result


def one_sample_wmmse(
    network: NetworkConfig,
    channel_model: ChannelModel,
    V0: Precoders,
    rng: Any = 0,
    n_iter: int = DEFAULT_WMMSE_ITERATIONS,
    callback: Optional[Callable[[int, Precoders], None]] = None,
) -> WMMSEResult:
    """Deterministic WMMSE on a single channel draw."""
    H = sample_channels(channel_model, as_generator(rng))
    return deterministic_wmmse(H, network, V0, n_iter, callback)


def mean_wmmse(
    network: NetworkConfig,
    channel_model: ChannelModel,
    V0: Precoders,
    variant: MeanChannelVariant = MeanChannelVariant.PATH_LOSS,
    n_iter: int = DEFAULT_WMMSE_ITERATIONS,
    callback: Optional[Callable[[int, Precoders], None]] = None,
) -> WMMSEResult:
    """Deterministic WMMSE on the mean channel."""
    H = mean_channels(channel_model, variant)
    return deterministic_wmmse(H, network, V0, n_iter, callback)


def estimate_beamforming_lipschitz(
    network: NetworkConfig, H: ChannelRealization, V: Precoders
) -> float:
    """Curvature scale 2 max_k ||X_k||_F of the surrogate at (V, H)."""
    P = surrogate_p_update(V, H, network.noise)
    X = weighted_receive_covariances(P, H)
    scale = max(float(np.linalg.norm(Xk)) for Xk in X)
    return 2.0 * max(scale, network.rho)


def sg_beamforming(
    network: NetworkConfig,
    channel_model: ChannelModel,
    V0: Precoders,
    r_max: int,
    rng: Any = 0,
    lipschitz: Optional[float] = None,
    trace_every: int = 1,
    callback: Optional[Callable[[int, Precoders], None]] = None,
) -> RunTrace:
    """
    Projected stochastic gradient on the expected negative sum rate.

    Steps are 1 / (r L), with L estimated on one channel draw at V0 when not
    given. The trace's final iterate is a list of precoders.
    """
    gen = as_generator(rng)
    if lipschitz is None:
        lipschitz = estimate_beamforming_lipschitz(
            network, sample_channels(channel_model, gen), V0
        )
    logger.info(f"SG baseline with L = {lipschitz:.4g}, {r_max} iterations")

    def grad(v, H):
        G = beamformer_gradient(precoders_from_vector(v, V0), H, network.noise)
        return precoders_to_vector([2.0 * Gu for Gu in G])

    def project(v):
        V = project_power(precoders_from_vector(v, V0), network)
        return precoders_to_vector(V)

    def on_step(r, v):
        if callback is not None:
            callback(r, precoders_from_vector(v, V0))

    problem = SmoothProblem(grad=grad, lipschitz=lipschitz, projection=project)
    trace = projected_sg_run(
        problem,
        precoders_to_vector(V0),
        r_max,
        lambda g: sample_channels(channel_model, g),
        rng=gen,
        trace_every=trace_every,
        callback=on_step,
    )
    trace.final = precoders_from_vector(trace.final, V0)
    return trace
