"""
Channel generation for the interfering broadcast network.

Base stations sit on a hexagonal grid; users are dropped uniformly in a disk
around their serving station. Each user estimates its direct link and every
interfering link within ``eta_db`` of it; estimated links fluctuate around a
fixed estimate, the others are pure Rayleigh fading scaled by path loss.
"""

import logging
from typing import Optional

import numpy as np

from ssumkit.errors import DimensionMismatch
from ssumkit.linalg import complex_gaussian
from ssumkit.models.network import (
    ChannelModel,
    ChannelRealization,
    MeanChannelVariant,
    NetworkConfig,
    Precoders,
)

logger = logging.getLogger(__name__)

# axial neighbour directions, walked in order to trace one hexagonal ring
_HEX_DIRECTIONS = ((1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1))


def hex_axial_spiral(n: int) -> list[tuple[int, int]]:
    """First n cells of a hexagonal spiral in axial coordinates, centre first."""
    cells = [(0, 0)]
    ring = 1
    while len(cells) < n:
        q, r = -ring, ring
        for dq, dr in _HEX_DIRECTIONS:
            for _ in range(ring):
                cells.append((q, r))
                q, r = q + dq, r + dr
        ring += 1
    return cells[:n]


def _axial_to_xy(q: float, r: float) -> np.ndarray:
    return np.array([q + 0.5 * r, 0.5 * np.sqrt(3.0) * r])


def hex_cell_centers(n_cells: int) -> np.ndarray:
    """Cartesian cell centres for a unit inter-site distance, shape K x 2."""
    return np.array([_axial_to_xy(q, r) for q, r in hex_axial_spiral(n_cells)])


def wrap_shifts(n_cells: int) -> np.ndarray:
    """
    Translations of the cluster used for wrap-around distances.

    For a cluster of n complete rings the images sit at (n+1) e1 + n e2 and
    its five rotations by 60 degrees. Partial clusters use the next full ring
    count.
    """
    rings = 0
    while 1 + 3 * rings * (rings + 1) < n_cells:
        rings += 1
    if rings == 0:
        return np.zeros((1, 2))
    base = _axial_to_xy(rings + 1, rings)
    shifts = [np.zeros(2)]
    for i in range(6):
        angle = i * np.pi / 3.0
        c, s = np.cos(angle), np.sin(angle)
        shifts.append(np.array([[c, -s], [s, c]]) @ base)
    return np.array(shifts)


def drop_users(
    network: NetworkConfig, centers: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """User positions, uniform in a disk of radius 1/2 around the serving cell."""
    d0 = network.path_loss.reference_distance
    radius = 0.5
    positions = np.empty((network.n_users, 2))
    for u, k in enumerate(network.user_cell):
        dist = np.sqrt(rng.uniform(d0 * d0, radius * radius))
        angle = rng.uniform(0.0, 2.0 * np.pi)
        positions[u] = centers[k] + dist * np.array([np.cos(angle), np.sin(angle)])
    return positions


def path_loss_matrix(network: NetworkConfig, rng: np.random.Generator) -> np.ndarray:
    """
    Per-link path loss sigma^2, shape users x cells.

    sigma^2 = (d / d0)^-exponent with wrap-around distances, scaled so that
    the median direct-link SNR at full power equals the configured SNR.
    """
    params = network.path_loss
    centers = hex_cell_centers(network.n_cells)
    users = drop_users(network, centers, rng)
    shifts = wrap_shifts(network.n_cells) if params.wrap_around else np.zeros((1, 2))

    gains = np.empty((network.n_users, network.n_cells))
    for u in range(network.n_users):
        for j in range(network.n_cells):
            images = centers[j] + shifts
            d = np.min(np.linalg.norm(images - users[u], axis=1))
            d = max(d, params.reference_distance)
            gains[u, j] = (d / params.reference_distance) ** (-params.exponent)

    direct_snr = np.array(
        [
            network.power[k] * gains[u, k] / network.noise[u]
            for u, k in enumerate(network.user_cell)
        ]
    )
    scale = network.csi.snr_linear / float(np.median(direct_snr))
    return gains * scale


def estimated_links(path_loss: np.ndarray, serving, eta_db: float) -> np.ndarray:
    """
    Links whose average power is within eta_db of the direct link.

    The direct link is always estimated; eta_db = -inf keeps only direct links.
    """
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(path_loss)
    mask = np.zeros(path_loss.shape, dtype=bool)
    for u, k in enumerate(serving):
        mask[u] = power_db[u] >= power_db[u, k] - eta_db
        mask[u, k] = True
    return mask


def build_channel_model(
    network: NetworkConfig,
    rng: np.random.Generator,
    path_loss: Optional[np.ndarray] = None,
) -> ChannelModel:
    """
    Fix path losses, the estimated-link set and the channel estimates.

    Args:
        network: Network configuration
        rng: Random generator
        path_loss: Explicit users x cells path-loss matrix; generated from the
            hexagonal layout when omitted

    Returns:
        ChannelModel with hat-H ~ CN(0, sigma^2 (1 - err)) on estimated links
    """
    if path_loss is None:
        path_loss = path_loss_matrix(network, rng)
    path_loss = np.asarray(path_loss, dtype=float)
    if path_loss.shape != (network.n_users, network.n_cells):
        raise DimensionMismatch(
            f"path loss must be {network.n_users} x {network.n_cells}, "
            f"got {path_loss.shape}"
        )
    serving = network.user_cell
    mask = estimated_links(path_loss, serving, network.csi.eta_db)
    err = network.csi.error_fraction

    estimates = []
    for u in range(network.n_users):
        row = []
        for j in range(network.n_cells):
            if mask[u, j]:
                shape = (network.rx_antennas[u], network.tx_antennas[j])
                variance = path_loss[u, j] * (1.0 - err)
                row.append(complex_gaussian(rng, shape, variance))
            else:
                row.append(None)
        estimates.append(tuple(row))

    model = ChannelModel(
        path_loss=path_loss,
        estimated=mask,
        estimates=tuple(estimates),
        error_fraction=err,
        serving=serving,
        rx_antennas=network.rx_antennas,
        tx_antennas=network.tx_antennas,
    )
    logger.debug(
        f"Channel model built, {model.estimated_share:.0%} of links estimated"
    )
    return model


def sample_channels(
    model: ChannelModel, rng: np.random.Generator
) -> ChannelRealization:
    """
    Draw every link once.

    Estimated links are CN(hat-H, sigma^2 err) around their estimate; the
    rest are CN(0, sigma^2).
    """
    links = []
    for u, N in enumerate(model.rx_antennas):
        row = []
        for j, M in enumerate(model.tx_antennas):
            sigma2 = model.path_loss[u, j]
            if model.estimated[u, j]:
                H = complex_gaussian(
                    rng, (N, M), sigma2 * model.error_fraction, model.estimates[u][j]
                )
            else:
                H = complex_gaussian(rng, (N, M), sigma2)
            row.append(H)
        links.append(tuple(row))
    return ChannelRealization(links=tuple(links), serving=model.serving)


def mean_channels(
    model: ChannelModel,
    variant: MeanChannelVariant = MeanChannelVariant.PATH_LOSS,
) -> ChannelRealization:
    """
    Mean channel used by the mean-WMMSE baseline.

    Estimated links use their estimate. Rayleigh-only links are zero under
    STRICT and sigma * ones under PATH_LOSS, matching the per-entry second
    moment of the fading they replace.
    """
    links = []
    for u, N in enumerate(model.rx_antennas):
        row = []
        for j, M in enumerate(model.tx_antennas):
            if model.estimated[u, j]:
                H = np.array(model.estimates[u][j], dtype=complex)
            elif variant == MeanChannelVariant.STRICT:
                H = np.zeros((N, M), dtype=complex)
            else:
                sigma = np.sqrt(model.path_loss[u, j])
                H = sigma * np.ones((N, M), dtype=complex)
            row.append(H)
        links.append(tuple(row))
    return ChannelRealization(links=tuple(links), serving=model.serving)


def random_precoders(network: NetworkConfig, rng: np.random.Generator) -> Precoders:
    """Gaussian precoders scaled so each cell transmits at exactly full power."""
    V = [
        complex_gaussian(rng, network.precoder_shape(u))
        for u in range(network.n_users)
    ]
    for k in range(network.n_cells):
        users = network.users_of(k)
        power = sum(float(np.real(np.vdot(V[u], V[u]))) for u in users)
        scale = np.sqrt(network.power[k] / power)
        for u in users:
            V[u] = V[u] * scale
    return V


def cell_powers(V: Precoders, network: NetworkConfig) -> list[float]:
    """sum_i Tr(V_i V_i^H) per cell."""
    return [
        sum(float(np.real(np.vdot(V[u], V[u]))) for u in network.users_of(k))
        for k in range(network.n_cells)
    ]
