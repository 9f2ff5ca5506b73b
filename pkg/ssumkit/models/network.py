"""
Network models for the expected sum-rate instance.

Users are indexed flat (u = 0..U-1) in cell order; ``user_cell[u]`` names the
base station serving user u. Precoders are a list of per-user matrices
V_u of shape M_{cell(u)} x d_u.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ssumkit.config import (
    DEFAULT_PATH_LOSS_EXPONENT,
    DEFAULT_REFERENCE_DISTANCE,
    DEFAULT_RHO_SCALE,
)
from ssumkit.errors import DimensionMismatch, NonFinite

Precoders = list[np.ndarray]


class MeanChannelVariant(str, Enum):
    """How the mean-channel baseline treats zero-mean Rayleigh links."""

    STRICT = "strict_mean"
    PATH_LOSS = "path_loss_magnitude"


@dataclass(frozen=True)
class CsiParams:
    """Partial-CSI model: which links are estimated and how well."""

    eta_db: float = 6.0  # interferers within eta dB of the direct link are estimated
    gamma_csi: float = 1.0  # effective SNR coefficient (dimensionless, linear)
    snr_db: float = 15.0

    @property
    def snr_linear(self) -> float:
        return float(10.0 ** (self.snr_db / 10.0))

    @property
    def error_fraction(self) -> float:
        """1 / (1 + gamma * SNR): share of the path loss left as estimation error."""
        return float(1.0 / (1.0 + self.gamma_csi * self.snr_linear))


@dataclass(frozen=True)
class PathLossParams:
    """Hexagonal-grid path-loss generator settings."""

    exponent: float = DEFAULT_PATH_LOSS_EXPONENT
    reference_distance: float = DEFAULT_REFERENCE_DISTANCE
    wrap_around: bool = True


@dataclass
class NetworkConfig:
    """
    Cells, antennas, budgets and noise of an interfering broadcast network.

    Attributes:
        users_per_cell: L_k for every cell k
        tx_antennas: M_k for every cell k
        power: P_k (linear watts) for every cell k
        rx_antennas: N_u for every user (flat order)
        streams: d_u for every user
        noise: sigma^2_u for every user
        rho: Proximal weight of the surrogate, rho > 0
        csi: Partial-CSI parameters
        path_loss: Path-loss generator parameters
    """

    users_per_cell: tuple[int, ...]
    tx_antennas: tuple[int, ...]
    power: tuple[float, ...]
    rx_antennas: tuple[int, ...]
    streams: tuple[int, ...]
    noise: tuple[float, ...]
    rho: float
    csi: CsiParams = field(default_factory=CsiParams)
    path_loss: PathLossParams = field(default_factory=PathLossParams)

    def __post_init__(self):
        self.users_per_cell = tuple(int(v) for v in self.users_per_cell)
        self.tx_antennas = tuple(int(v) for v in self.tx_antennas)
        self.power = tuple(float(v) for v in self.power)
        self.rx_antennas = tuple(int(v) for v in self.rx_antennas)
        self.streams = tuple(int(v) for v in self.streams)
        self.noise = tuple(float(v) for v in self.noise)

        K = len(self.users_per_cell)
        if K == 0:
            raise ValueError("network needs at least one cell")
        if len(self.tx_antennas) != K or len(self.power) != K:
            raise DimensionMismatch("per-cell fields must have one entry per cell")
        U = sum(self.users_per_cell)
        if not (len(self.rx_antennas) == len(self.streams) == len(self.noise) == U):
            raise DimensionMismatch("per-user fields must have one entry per user")
        if any(p <= 0 for p in self.power):
            raise ValueError("power budgets must be positive")
        if any(s <= 0 for s in self.noise):
            raise ValueError("noise powers must be positive")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        for u in range(U):
            M = self.tx_antennas[self.user_cell[u]]
            if not 1 <= self.streams[u] <= min(M, self.rx_antennas[u]):
                raise ValueError(
                    f"user {u}: d={self.streams[u]} exceeds min(M={M}, "
                    f"N={self.rx_antennas[u]})"
                )

    @classmethod
    def uniform(
        cls,
        n_cells: int,
        users_per_cell: int = 1,
        tx_antennas: int = 2,
        rx_antennas: int = 2,
        streams: Optional[int] = None,
        power: float = 1.0,
        noise: float = 1.0,
        rho: Optional[float] = None,
        csi: Optional[CsiParams] = None,
        path_loss: Optional[PathLossParams] = None,
    ) -> "NetworkConfig":
        """Build a network where every cell and user looks the same."""
        if streams is None:
            streams = min(tx_antennas, rx_antennas)
        if rho is None:
            rho = DEFAULT_RHO_SCALE * power / tx_antennas
        U = n_cells * users_per_cell
        return cls(
            users_per_cell=(users_per_cell,) * n_cells,
            tx_antennas=(tx_antennas,) * n_cells,
            power=(power,) * n_cells,
            rx_antennas=(rx_antennas,) * U,
            streams=(streams,) * U,
            noise=(noise,) * U,
            rho=rho,
            csi=csi or CsiParams(),
            path_loss=path_loss or PathLossParams(),
        )

    @property
    def n_cells(self) -> int:
        return len(self.users_per_cell)

    @property
    def n_users(self) -> int:
        return sum(self.users_per_cell)

    @property
    def user_cell(self) -> tuple[int, ...]:
        return tuple(k for k, L in enumerate(self.users_per_cell) for _ in range(L))

    def users_of(self, k: int) -> list[int]:
        """Flat indices of the users served by cell k."""
        start = sum(self.users_per_cell[:k])
        return list(range(start, start + self.users_per_cell[k]))

    def precoder_shape(self, u: int) -> tuple[int, int]:
        return (self.tx_antennas[self.user_cell[u]], self.streams[u])

    def to_dict(self) -> dict:
        """Convert to dictionary representation."""
        return {
            "users_per_cell": list(self.users_per_cell),
            "tx_antennas": list(self.tx_antennas),
            "power": list(self.power),
            "rx_antennas": list(self.rx_antennas),
            "streams": list(self.streams),
            "noise": list(self.noise),
            "rho": self.rho,
            "eta_db": self.csi.eta_db,
            "gamma_csi": self.csi.gamma_csi,
            "snr_db": self.csi.snr_db,
            "path_loss_exponent": self.path_loss.exponent,
            "reference_distance": self.path_loss.reference_distance,
            "wrap_around": self.path_loss.wrap_around,
        }


@dataclass(frozen=True)
class ChannelRealization:
    """
    One draw of every channel matrix.

    ``links[u][j]`` is H_{u j}, the N_u x M_j channel from transmitter j to
    user u; ``serving[u]`` is the transmitter that serves user u.
    """

    links: tuple[tuple[np.ndarray, ...], ...]
    serving: tuple[int, ...]

    def __post_init__(self):
        if len(self.links) != len(self.serving):
            raise DimensionMismatch("one row of links per user is required")
        n_tx = {len(row) for row in self.links}
        if len(n_tx) != 1:
            raise DimensionMismatch("every user needs a link from every transmitter")
        for row in self.links:
            for H in row:
                if not np.all(np.isfinite(H)):
                    raise NonFinite("channel matrices must be finite")

    @classmethod
    def from_lists(
        cls, links: Sequence[Sequence[np.ndarray]], serving: Sequence[int]
    ) -> "ChannelRealization":
        return cls(
            links=tuple(
                tuple(np.atleast_2d(np.asarray(H, dtype=complex)) for H in row)
                for row in links
            ),
            serving=tuple(int(k) for k in serving),
        )

    @property
    def n_users(self) -> int:
        return len(self.links)

    @property
    def n_tx(self) -> int:
        return len(self.links[0])

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        u, j = key
        return self.links[u][j]

    def direct(self, u: int) -> np.ndarray:
        """H_{u, serving(u)}."""
        return self.links[u][self.serving[u]]

    def users_of(self, j: int) -> list[int]:
        return [u for u, k in enumerate(self.serving) if k == j]


@dataclass(frozen=True)
class ChannelModel:
    """
    Statistical model of every link.

    Attributes:
        path_loss: sigma_l^2 for every (user, transmitter) pair, shape U x K
        estimated: Mask of links that carry a channel estimate
        estimates: hat-H for estimated links, None elsewhere
        error_fraction: Estimation error variance relative to path loss
        serving: Serving transmitter of every user
        rx_antennas: N_u per user
        tx_antennas: M_k per transmitter
    """

    path_loss: np.ndarray
    estimated: np.ndarray
    estimates: tuple[tuple[Optional[np.ndarray], ...], ...]
    error_fraction: float
    serving: tuple[int, ...]
    rx_antennas: tuple[int, ...]
    tx_antennas: tuple[int, ...]

    @property
    def estimated_share(self) -> float:
        """Fraction of links that carry an estimate."""
        return float(np.mean(self.estimated))


@dataclass
class AuxVars:
    """Auxiliary variables P = (W, U, Z) of the WMMSE surrogate, per user."""

    W: list[np.ndarray]
    U: list[np.ndarray]
    Z: list[np.ndarray]


@dataclass
class BeamformerState:
    """
    Accumulated statistics of the stochastic WMMSE iteration.

    A is stored once per cell because the A-increment depends only on the
    cell; ``A_user(u)`` returns the matrix shared by the users of a cell.

    Attributes:
        V: Current precoders
        A: Per-cell accumulated M_k x M_k Hermitian PSD matrices
        B: Per-user accumulated M_k x d_u matrices
        offset: Accumulated constant terms of the aggregate surrogate
        r: Number of accumulated samples
        user_cell: Serving cell of every user
    """

    V: Precoders
    A: list[np.ndarray]
    B: list[np.ndarray]
    user_cell: tuple[int, ...]
    offset: float = 0.0
    r: int = 0

    @classmethod
    def initial(cls, network: NetworkConfig, V0: Precoders) -> "BeamformerState":
        """Zero statistics at r = 0 around the starting precoders."""
        return cls(
            V=[np.array(V, dtype=complex) for V in V0],
            A=[np.zeros((M, M), dtype=complex) for M in network.tx_antennas],
            B=[
                np.zeros(network.precoder_shape(u), dtype=complex)
                for u in range(network.n_users)
            ],
            user_cell=network.user_cell,
        )

    def A_user(self, u: int) -> np.ndarray:
        return self.A[self.user_cell[u]]
