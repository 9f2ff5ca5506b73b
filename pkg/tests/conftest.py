import math

import numpy as np
import pytest

from ssumkit.core import RngStream
from ssumkit.models.network import ChannelRealization, CsiParams, NetworkConfig
from ssumkit.services.wmmse import build_channel_model, random_precoders


@pytest.fixture
def gen():
    return RngStream(1234).generator()


@pytest.fixture
def desk_network():
    return NetworkConfig.uniform(7, users_per_cell=1, tx_antennas=2, rx_antennas=2)


@pytest.fixture
def small_network():
    """Two cells with two users each, four transmit antennas per cell."""
    return NetworkConfig.uniform(2, users_per_cell=2, tx_antennas=4, rx_antennas=2)


@pytest.fixture
def scalar_network():
    return NetworkConfig.uniform(1, tx_antennas=1, rx_antennas=1)


@pytest.fixture
def small_channel_model(small_network):
    return build_channel_model(small_network, RngStream(5).generator())


@pytest.fixture
def point_mass_network():
    """Every link estimated with zero error, so every draw is the estimate."""
    csi = CsiParams(eta_db=1000.0, gamma_csi=math.inf)
    return NetworkConfig.uniform(2, csi=csi)


@pytest.fixture
def point_mass_model(point_mass_network):
    return build_channel_model(
        point_mass_network, RngStream(8).generator(), path_loss=np.ones((2, 2))
    )


@pytest.fixture
def random_precoders_for():
    def make(network, seed=0):
        return random_precoders(network, RngStream(seed).generator())

    return make


@pytest.fixture
def scalar_channel():
    def make(h=1.0):
        return ChannelRealization.from_lists([[np.array([[h]])]], [0])

    return make


@pytest.fixture
def random_hpd():
    """Random Hermitian positive definite n x n matrices."""

    def make(gen, n, shift=0.5):
        R = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
        return R @ R.conj().T / n + shift * np.eye(n)

    return make
