"""
Closed-form rate, MSE and MMSE expressions for the interfering broadcast channel.

All rates are in nats. ``noise`` arguments are per-user sequences at the
network level and scalars in the per-user helpers.
"""

import math
from typing import Optional, Sequence

import numpy as np

from ssumkit.errors import DimensionMismatch, NotPositiveDefinite, SingularW
from ssumkit.linalg import chol_logdet, hermitian_part, hermitian_solve
from ssumkit.models.network import AuxVars, ChannelRealization, Precoders


def _check_precoders(V: Precoders, H: ChannelRealization) -> None:
    if len(V) != H.n_users:
        raise DimensionMismatch(f"{len(V)} precoders for {H.n_users} users")
    for u, Vu in enumerate(V):
        M = H.direct(u).shape[1]
        if Vu.shape[0] != M:
            raise DimensionMismatch(
                f"precoder of user {u} has {Vu.shape[0]} rows, transmitter has {M}"
            )


def transmit_covariances(V: Precoders, H: ChannelRealization) -> list[np.ndarray]:
    """sum_{l served by j} V_l V_l^H for every transmitter j."""
    covs = []
    for j in range(H.n_tx):
        M = H[0, j].shape[1]
        C = np.zeros((M, M), dtype=complex)
        for other in H.users_of(j):
            C += V[other] @ V[other].conj().T
        covs.append(C)
    return covs


def received_covariance(
    V: Precoders,
    H: ChannelRealization,
    u: int,
    noise: float,
    covs: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """J_u = sum_j H_uj (sum_l V_l V_l^H) H_uj^H + noise * I."""
    if covs is None:
        covs = transmit_covariances(V, H)
    N = H.direct(u).shape[0]
    J = noise * np.eye(N, dtype=complex)
    for j in range(H.n_tx):
        Huj = H[u, j]
        J += Huj @ covs[j] @ Huj.conj().T
    return hermitian_part(J)


def mse_matrix(
    V: Precoders,
    U: np.ndarray,
    H: ChannelRealization,
    u: int,
    noise: float,
    covs: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """
    MSE matrix of user u under receiver U.

    E = (I - U^H H V_u)(I - U^H H V_u)^H + interference + noise U^H U,
    evaluated as I - G - G^H + U^H J U with G = U^H H_{u,serving} V_u.

    Raises:
        DimensionMismatch: If U does not match the user's antennas and streams
    """
    _check_precoders(V, H)
    N, d = H.direct(u).shape[0], V[u].shape[1]
    if U.shape != (N, d):
        raise DimensionMismatch(
            f"receiver of user {u} must be {N} x {d}, got {U.shape}"
        )
    J = received_covariance(V, H, u, noise, covs)
    G = U.conj().T @ H.direct(u) @ V[u]
    E = np.eye(d, dtype=complex) - G - G.conj().T + U.conj().T @ J @ U
    return hermitian_part(E)


def rate(
    U: np.ndarray,
    V: Precoders,
    H: ChannelRealization,
    u: int,
    noise: float,
    covs: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """
    log det(E_u^-1) in nats.

    Raises:
        NotPositiveDefinite: If the MSE matrix is singular
    """
    return -chol_logdet(mse_matrix(V, U, H, u, noise, covs))


def mmse_receiver(
    V: Precoders,
    H: ChannelRealization,
    u: int,
    noise: float,
    covs: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """U_u = J_u^-1 H_{u,serving} V_u."""
    _check_precoders(V, H)
    J = received_covariance(V, H, u, noise, covs)
    return hermitian_solve(J, H.direct(u) @ V[u])


def user_rates(
    V: Precoders, H: ChannelRealization, noise: Sequence[float]
) -> list[float]:
    """Per-user rates with MMSE receivers."""
    covs = transmit_covariances(V, H)
    rates = []
    for u in range(H.n_users):
        U = mmse_receiver(V, H, u, noise[u], covs)
        rates.append(rate(U, V, H, u, noise[u], covs))
    return rates


def sum_rate(V: Precoders, H: ChannelRealization, noise: Sequence[float]) -> float:
    """Instantaneous sum rate with per-user MMSE receivers."""
    return math.fsum(user_rates(V, H, noise))


def g1(V: Precoders, H: ChannelRealization, noise: Sequence[float]) -> float:
    """Sampled objective: minus the sum rate."""
    return -sum_rate(V, H, noise)


def surrogate_p_update(
    V_bar: Precoders, H: ChannelRealization, noise: Sequence[float]
) -> AuxVars:
    """
    Auxiliary variables that make the WMMSE surrogate tight at V_bar.

    U is the MMSE receiver, W = (I - U^H H V_bar)^-1 made exactly Hermitian,
    and Z = V_bar.

    Raises:
        SingularW: If I - U^H H V_bar cannot be inverted to a PD matrix
    """
    covs = transmit_covariances(V_bar, H)
    Us, Ws, Zs = [], [], []
    for u in range(H.n_users):
        U = mmse_receiver(V_bar, H, u, noise[u], covs)
        d = V_bar[u].shape[1]
        E = np.eye(d, dtype=complex) - U.conj().T @ H.direct(u) @ V_bar[u]
        try:
            W = hermitian_part(np.linalg.solve(E, np.eye(d, dtype=complex)))
        except np.linalg.LinAlgError as e:
            raise SingularW(f"user {u}: I - U^H H V is singular") from e
        if not np.all(np.isfinite(W)):
            raise SingularW(f"user {u}: weight matrix is not finite")
        Us.append(U)
        Ws.append(W)
        Zs.append(np.array(V_bar[u], dtype=complex))
    return AuxVars(W=Ws, U=Us, Z=Zs)


def big_g1(
    V: Precoders,
    P: AuxVars,
    H: ChannelRealization,
    noise: Sequence[float],
    rho: float,
) -> float:
    """
    Weighted-MSE upper bound of g1 with a proximal term.

    sum_u [-log det W_u + Re Tr(W_u E_u(U_u, V)) + rho ||V_u - Z_u||^2 - d_u].
    Equals g1(V) when P is the update at V and lies above g1 elsewhere.

    Raises:
        SingularW: If some W_u is not positive definite
    """
    covs = transmit_covariances(V, H)
    terms = []
    for u in range(H.n_users):
        W = P.W[u]
        try:
            logdet_w = chol_logdet(W)
        except NotPositiveDefinite as e:
            raise SingularW(f"user {u}: weight matrix is not PD") from e
        E = mse_matrix(V, P.U[u], H, u, noise[u], covs)
        diff = V[u] - P.Z[u]
        terms.append(
            -logdet_w
            + float(np.real(np.trace(W @ E)))
            + rho * float(np.real(np.vdot(diff, diff)))
            - W.shape[0]
        )
    return math.fsum(terms)
