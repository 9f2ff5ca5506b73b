"""
Stochastic WMMSE: the SSUM surrogate for expected sum-rate maximization.

Every observed channel adds rho I + X_k to the per-cell matrix A_k and
rho Z_u + H^H U W to the per-user matrix B_u; the aggregate surrogate is then
minimized in closed form up to one Lagrange multiplier per cell.
"""

import logging
import math
from typing import Any, Optional

import numpy as np

from ssumkit.core.engine import Callback, run_ssum
from ssumkit.core.surrogate import SurrogateModel
from ssumkit.errors import DimensionMismatch
from ssumkit.linalg import chol_logdet, hermitian_part, power_bisection
from ssumkit.models.network import (
    AuxVars,
    BeamformerState,
    ChannelModel,
    ChannelRealization,
    NetworkConfig,
    Precoders,
)
from ssumkit.models.trace import RunTrace
from ssumkit.services.wmmse.channels import sample_channels
from ssumkit.services.wmmse.formulas import big_g1, g1, surrogate_p_update

logger = logging.getLogger(__name__)


def weighted_receive_covariances(
    P: AuxVars, H: ChannelRealization
) -> list[np.ndarray]:
    """X_k = sum over every user l of H_lk^H U_l W_l U_l^H H_lk."""
    X = []
    for k in range(H.n_tx):
        M = H[0, k].shape[1]
        Xk = np.zeros((M, M), dtype=complex)
        for u in range(H.n_users):
            T = H[u, k].conj().T @ P.U[u]
            Xk += T @ P.W[u] @ T.conj().T
        X.append(hermitian_part(Xk))
    return X


def accumulate(
    state: BeamformerState,
    P: AuxVars,
    H: ChannelRealization,
    network: NetworkConfig,
) -> BeamformerState:
    """
    Fold one surrogate into the accumulated statistics.

    A_k += rho I + X_k, B_u += rho Z_u + H_{u,k}^H U_u W_u and r += 1. The
    offset collects the constant part of the surrogate so that the aggregate
    can be evaluated, not only minimized.

    Returns:
        New BeamformerState; the input is left untouched
    """
    if len(P.W) != H.n_users or H.n_users != network.n_users:
        raise DimensionMismatch("auxiliary variables, channel and network disagree")
    rho = network.rho
    X = weighted_receive_covariances(P, H)
    A = [
        state.A[k] + rho * np.eye(state.A[k].shape[0]) + X[k]
        for k in range(network.n_cells)
    ]
    B = []
    constants = []
    for u in range(network.n_users):
        U, W, Z = P.U[u], P.W[u], P.Z[u]
        B.append(state.B[u] + rho * Z + H.direct(u).conj().T @ U @ W)
        constants.append(
            -chol_logdet(W)
            + float(np.real(np.trace(W)))
            + network.noise[u] * float(np.real(np.trace(W @ U.conj().T @ U)))
            - W.shape[0]
            + rho * float(np.real(np.vdot(Z, Z)))
        )
    return BeamformerState(
        V=state.V,
        A=A,
        B=B,
        user_cell=state.user_cell,
        offset=state.offset + math.fsum(constants),
        r=state.r + 1,
    )


def v_update(
    state: BeamformerState, network: NetworkConfig, tol: Optional[float] = None
) -> tuple[Precoders, list[float]]:
    """
    Exact minimizer of the aggregate surrogate under per-cell power budgets.

    Returns:
        Tuple of (precoders, per-cell Lagrange multipliers)
    """
    if state.r < 1:
        raise ValueError("v_update needs at least one accumulated sample")
    V: Precoders = [None] * network.n_users
    mus = []
    for k in range(network.n_cells):
        users = network.users_of(k)
        if not users:
            mus.append(0.0)
            continue
        B = np.hstack([state.B[u] for u in users])
        mu, Vk = power_bisection(state.A[k], B, network.power[k], tol)
        mus.append(mu)
        start = 0
        for u in users:
            d = state.B[u].shape[1]
            V[u] = Vk[:, start : start + d]
            start += d
    return V, mus


def aggregate_value(state: BeamformerState, V: Precoders) -> float:
    """(1/r) sum_i G1(V, P^i, H^i) from the accumulated statistics."""
    if state.r < 1:
        raise ValueError("aggregate is undefined before the first sample")
    terms = [state.offset]
    for u, Vu in enumerate(V):
        terms.append(float(np.real(np.vdot(Vu, state.A_user(u) @ Vu))))
        terms.append(-2.0 * float(np.real(np.vdot(Vu, state.B[u]))))
    return math.fsum(terms) / state.r


def beamformer_gradient(
    V: Precoders, H: ChannelRealization, noise
) -> list[np.ndarray]:
    """
    Conjugate gradient dg1/dV* = X_k V_u - H_{u,k}^H U_u W_u per user.

    U and W are the MMSE receiver and weight at V, so this is also the
    gradient of the surrogate at its anchor.
    """
    P = surrogate_p_update(V, H, noise)
    X = weighted_receive_covariances(P, H)
    return [
        X[H.serving[u]] @ V[u] - H.direct(u).conj().T @ P.U[u] @ P.W[u]
        for u in range(H.n_users)
    ]


def project_power(V: Precoders, network: NetworkConfig) -> Precoders:
    """Scale every over-budget cell back onto its power sphere."""
    out = [np.array(Vu, dtype=complex) for Vu in V]
    for k in range(network.n_cells):
        users = network.users_of(k)
        power = sum(float(np.real(np.vdot(out[u], out[u]))) for u in users)
        if power > network.power[k]:
            scale = np.sqrt(network.power[k] / power)
            for u in users:
                out[u] = out[u] * scale
    return out


def precoders_to_vector(V: Precoders) -> np.ndarray:
    """Real coordinates [Re V_0, ..., Re V_{U-1}, Im V_0, ..., Im V_{U-1}]."""
    flat = np.concatenate([np.asarray(Vu, dtype=complex).ravel() for Vu in V])
    return np.concatenate([flat.real, flat.imag])


def precoders_from_vector(v: np.ndarray, like: Precoders) -> Precoders:
    half = len(v) // 2
    flat = np.asarray(v[:half]) + 1j * np.asarray(v[half:])
    out = []
    start = 0
    for Vu in like:
        size = Vu.size
        out.append(flat[start : start + size].reshape(Vu.shape))
        start += size
    return out


class PrecoderSpace:
    """Point-space helpers shared by the beamforming models."""

    network: NetworkConfig

    def project(self, x: Precoders) -> Precoders:
        return project_power(x, self.network)

    def to_vector(self, x: Precoders) -> np.ndarray:
        return precoders_to_vector(x)

    def from_vector(self, v: np.ndarray, like: Precoders) -> Precoders:
        return precoders_from_vector(v, like)


class WMMSESurrogateModel(PrecoderSpace, SurrogateModel):
    """
    SSUM model of expected sum-rate maximization.

    Samples are ChannelRealization draws; points are per-user precoders.
    """

    def __init__(self, network: NetworkConfig, V0: Precoders):
        self.network = network
        self.noise = network.noise
        self.strong_convexity = network.rho
        self.state = BeamformerState.initial(network, V0)
        self.multipliers: list[float] = [0.0] * network.n_cells

    @property
    def n_observed(self) -> int:
        return self.state.r

    def eval_g(self, x: Precoders, xi: ChannelRealization) -> float:
        return g1(x, xi, self.noise)

    def eval_ghat(self, x: Precoders, y: Precoders, xi: ChannelRealization) -> float:
        P = surrogate_p_update(y, xi, self.noise)
        return big_g1(x, P, xi, self.noise, self.network.rho)

    def grad_g1(self, x: Precoders, xi: ChannelRealization) -> np.ndarray:
        grads = beamformer_gradient(x, xi, self.noise)
        return self.to_vector([2.0 * G for G in grads])

    def observe(self, y: Precoders, xi: ChannelRealization) -> None:
        P = surrogate_p_update(y, xi, self.noise)
        self.state = accumulate(self.state, P, xi, self.network)

    def minimize_aggregate(self) -> Precoders:
        V, self.multipliers = v_update(self.state, self.network)
        self.state.V = V
        return V

    def eval_aggregate(self, x: Precoders) -> float:
        return aggregate_value(self.state, x)


def stochastic_wmmse(
    network: NetworkConfig,
    channel_model: ChannelModel,
    V0: Precoders,
    r_max: int,
    rng: Any = 0,
    trace_every: int = 1,
    track_gap: bool = False,
    keep_iterates: bool = False,
    callback: Optional[Callback] = None,
) -> RunTrace:
    """
    Run SSUM on the expected sum rate with channels drawn from channel_model.

    The sampled objective recorded in the trace is minus the instantaneous
    sum rate at the previous iterate.

    Raises:
        InfeasibleStart: If V0 violates a power budget
    """
    model = WMMSESurrogateModel(network, V0)
    logger.info(
        f"Stochastic WMMSE: {network.n_cells} cells, {network.n_users} users, "
        f"{r_max} iterations"
    )
    return run_ssum(
        model,
        lambda gen: sample_channels(channel_model, gen),
        V0,
        r_max,
        trace_every=trace_every,
        rng=rng,
        track_gap=track_gap,
        keep_iterates=keep_iterates,
        callback=callback,
    )
