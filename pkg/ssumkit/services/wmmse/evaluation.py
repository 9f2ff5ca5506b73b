"""
Monte-Carlo estimates of the ergodic sum rate.
"""

import math
from dataclasses import dataclass
from typing import Any, Sequence

from ssumkit.core.parallel import ordered_map
from ssumkit.core.rng import RngStream, as_generator
from ssumkit.models.network import (
    ChannelModel,
    ChannelRealization,
    NetworkConfig,
    Precoders,
)
from ssumkit.services.wmmse.channels import sample_channels
from ssumkit.services.wmmse.formulas import sum_rate


@dataclass
class RateEstimate:
    mean: float
    stderr: float
    n_samples: int


def evaluation_channels(
    channel_model: ChannelModel, n_mc: int, stream: RngStream
) -> list[ChannelRealization]:
    """n_mc channel draws; draw i comes from stream.child(i)."""
    if n_mc < 1:
        raise ValueError(f"n_mc must be at least 1, got {n_mc}")
    return [
        sample_channels(channel_model, child.generator())
        for child in stream.children(n_mc)
    ]


def score_precoders(
    V: Precoders,
    channels: Sequence[ChannelRealization],
    network: NetworkConfig,
    threads: int = 1,
) -> RateEstimate:
    """Mean and standard error of the sum rate over fixed channel draws."""
    rates = ordered_map(lambda H: sum_rate(V, H, network.noise), channels, threads)
    n = len(rates)
    mean = math.fsum(rates) / n
    if n < 2:
        return RateEstimate(mean, 0.0, n)
    var = math.fsum((v - mean) ** 2 for v in rates) / (n - 1)
    return RateEstimate(mean, math.sqrt(var / n), n)


def ergodic_sum_rate(
    V: Precoders,
    network: NetworkConfig,
    channel_model: ChannelModel,
    n_mc: int,
    rng: Any = 0,
    threads: int = 1,
) -> float:
    """
    Average sum rate over n_mc fresh channel draws with per-draw MMSE receivers.

    Draws are generated sequentially from rng, then scored in parallel; the
    compensated sum makes the result independent of the thread count.
    """
    if n_mc < 1:
        raise ValueError(f"n_mc must be at least 1, got {n_mc}")
    gen = as_generator(rng)
    channels = [sample_channels(channel_model, gen) for _ in range(n_mc)]
    return score_precoders(V, channels, network, threads).mean
