"""
Online sparse dictionary learning as an SSUM instance.

The sampled loss is g(D, y) = min_a 0.5||y - D a||^2 + lam ||a||_1. Its
surrogate freezes the sparse code a computed at the previous dictionary and
adds a proximal term (gamma/2)||D - D_prev||_F^2, so the aggregate is a
quadratic in D described by three matrices.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional, Union

import numpy as np

from ssumkit.config import (
    DICT_UPDATE_MAX_SWEEPS,
    DICT_UPDATE_TOL,
    LASSO_MAX_SWEEPS,
    LASSO_TOL,
)
from ssumkit.core.engine import Callback, run_ssum
from ssumkit.core.parallel import ordered_map
from ssumkit.core.rng import as_generator
from ssumkit.core.surrogate import SurrogateModel
from ssumkit.errors import DegenerateStats, DimensionMismatch, NonFinite
from ssumkit.models.dictionary import DictionaryState
from ssumkit.models.trace import RunTrace

logger = logging.getLogger(__name__)


def _soft(value: float, tau: float) -> float:
    if value > tau:
        return value - tau
    if value < -tau:
        return value + tau
    return 0.0


def lasso_kkt_residual(
    D: np.ndarray, y: np.ndarray, alpha: np.ndarray, lam: float
) -> float:
    """
    Largest violation of the lasso optimality conditions.

    On active coordinates D_j^T (D a - y) must equal -lam sign(a_j); on zero
    coordinates its magnitude must not exceed lam.
    """
    grad = D.T @ (D @ alpha - y)
    active = alpha != 0
    res_active = np.abs(grad[active] + lam * np.sign(alpha[active]))
    res_zero = np.maximum(np.abs(grad[~active]) - lam, 0.0)
    worst = max(np.max(res_active, initial=0.0), np.max(res_zero, initial=0.0))
    return float(worst)


def lasso(
    D: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = LASSO_TOL,
    max_sweeps: int = LASSO_MAX_SWEEPS,
) -> np.ndarray:
    """
    Solve min_a 0.5||y - D a||^2 + lam ||a||_1 by cyclic coordinate descent.

    Args:
        D: Dictionary (n x k)
        y: Signal (n,)
        lam: Sparsity weight, >= 0
        tol: Stop once the KKT residual is at most tol
        max_sweeps: Maximum number of passes over the coordinates

    Returns:
        Sparse code a (k,)

    Raises:
        NonFinite: If D or y contain NaN or infinite values
        DimensionMismatch: If y does not have D.shape[0] entries
    """
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(y))):
        raise NonFinite("lasso inputs must be finite")
    if y.shape[0] != D.shape[0]:
        raise DimensionMismatch(
            f"signal has {y.shape[0]} entries, D has {D.shape[0]} rows"
        )
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")

    G = D.T @ D
    c = D.T @ y
    k = D.shape[1]
    alpha = np.zeros(k)
    grad = -c.copy()  # G alpha - c
    for _ in range(max_sweeps):
        for j in range(k):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = alpha[j]
            new = _soft(old * gjj - grad[j], lam) / gjj
            if new != old:
                grad += G[:, j] * (new - old)
                alpha[j] = new
        if lasso_kkt_residual(D, y, alpha, lam) <= tol:
            return alpha
    logger.warning(
        f"Lasso stopped after {max_sweeps} sweeps, "
        f"KKT residual {lasso_kkt_residual(D, y, alpha, lam):.3g}"
    )
    return alpha


def fitting_loss(
    D: np.ndarray, y: np.ndarray, lam: float, alpha: Optional[np.ndarray] = None
) -> float:
    """g(D, y) = 0.5||y - D a||^2 + lam ||a||_1 at the lasso solution a."""
    if alpha is None:
        alpha = lasso(D, y, lam)
    residual = np.asarray(y, dtype=float).ravel() - D @ alpha
    return float(0.5 * residual @ residual + lam * np.sum(np.abs(alpha)))


def project_columns(D: np.ndarray) -> np.ndarray:
    """Scale every column with norm above one back onto the unit sphere."""
    D = np.array(D, dtype=float)
    norms = np.linalg.norm(D, axis=0)
    return D / np.maximum(norms, 1.0)


def observe_signal(
    state: DictionaryState, y: np.ndarray, alpha: Optional[np.ndarray] = None
) -> DictionaryState:
    """
    Add one signal to the sufficient statistics.

    A_s += a a^T, B_s += y a^T, C_prox += D and r += 1 with a the lasso code
    of y under the current dictionary.

    Returns:
        New DictionaryState
    """
    y = np.asarray(y, dtype=float).ravel()
    if alpha is None:
        alpha = lasso(state.D, y, state.lam)
    constant = (
        0.5 * float(y @ y)
        + state.lam * float(np.sum(np.abs(alpha)))
        + 0.5 * state.gamma_prox * float(np.sum(state.D * state.D))
    )
    return replace(
        state,
        A_s=state.A_s + np.outer(alpha, alpha),
        B_s=state.B_s + np.outer(y, alpha),
        C_prox=state.C_prox + state.D,
        offset=state.offset + constant,
        r=state.r + 1,
    )


def dict_update(
    state: DictionaryState,
    tol: float = DICT_UPDATE_TOL,
    max_sweeps: int = DICT_UPDATE_MAX_SWEEPS,
) -> np.ndarray:
    """
    Minimize 0.5 Tr(D^T D M) - Tr(D^T N) over unit-norm-ball columns.

    M = A_s + gamma r I and N = B_s + gamma C_prox. Block coordinate descent
    over columns, warm-started at the current dictionary; a column whose
    curvature M_jj is zero is left unchanged.

    Raises:
        DegenerateStats: If M has a negative or non-finite diagonal entry
    """
    if state.r < 1:
        raise ValueError("dict_update needs at least one observed signal")
    k = state.n_atoms
    M = state.A_s + state.gamma_prox * state.r * np.eye(k)
    N = state.B_s + state.gamma_prox * state.C_prox
    diag = np.diag(M)
    finite = np.all(np.isfinite(M)) and np.all(np.isfinite(N))
    if not finite or np.any(diag < 0):
        raise DegenerateStats("dictionary statistics are not finite or not PSD")
    if np.any(diag == 0):
        logger.debug(f"{int(np.sum(diag == 0))} unused atoms kept unchanged")

    D = np.array(state.D, dtype=float)
    for _ in range(max_sweeps):
        change = 0.0
        for j in range(k):
            mjj = diag[j]
            if mjj == 0.0:
                continue
            u = (N[:, j] - D @ M[:, j] + D[:, j] * mjj) / mjj
            norm = np.linalg.norm(u)
            if norm > 1.0:
                u = u / norm
            change = max(change, float(np.max(np.abs(u - D[:, j]))))
            D[:, j] = u
        if change < tol:
            break
    else:
        logger.warning(f"Dictionary update did not settle in {max_sweeps} sweeps")
    return D


def aggregate_loss(state: DictionaryState, D: np.ndarray) -> float:
    """(1/r) sum_i ghat(D, D^{i-1}, y^i) from the statistics."""
    if state.r < 1:
        raise ValueError("aggregate is undefined before the first signal")
    g = state.gamma_prox
    terms = [
        0.5 * float(np.sum((D.T @ D) * state.A_s)),
        -float(np.sum(D * state.B_s)),
        0.5 * g * state.r * float(np.sum(D * D)),
        -g * float(np.sum(D * state.C_prox)),
        state.offset,
    ]
    return math.fsum(terms) / state.r


def random_dictionary(n: int, k: int, rng: Any = 0) -> np.ndarray:
    """Gaussian atoms normalized to unit norm."""
    gen = as_generator(rng)
    D = gen.standard_normal((n, k))
    return D / np.linalg.norm(D, axis=0)


@dataclass
class PlantedSource:
    """
    Signals y = D* a* + noise with sparse Gaussian codes.

    Attributes:
        n: Signal dimension
        k: Number of planted atoms
        sparsity: Nonzeros per code
        noise_std: Standard deviation of additive Gaussian noise
        seed: Seed of the planted dictionary
        max_norm: Signals are clipped to this norm so the support is bounded
    """

    n: int
    k: int
    sparsity: int
    noise_std: float = 0.01
    seed: int = 0
    max_norm: float = 10.0
    dictionary: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.sparsity <= self.k:
            raise ValueError(
                f"sparsity must lie in [1, {self.k}], got {self.sparsity}"
            )
        self.dictionary = random_dictionary(self.n, self.k, self.seed)

    def sample(self, gen: np.random.Generator) -> np.ndarray:
        support = gen.choice(self.k, size=self.sparsity, replace=False)
        code = np.zeros(self.k)
        code[support] = gen.standard_normal(self.sparsity)
        y = self.dictionary @ code + self.noise_std * gen.standard_normal(self.n)
        norm = np.linalg.norm(y)
        if norm > self.max_norm:
            y = y * (self.max_norm / norm)
        return y

    def __call__(self, gen: np.random.Generator) -> np.ndarray:
        return self.sample(gen)

    def draw(self, count: int, rng: Any = 0) -> np.ndarray:
        """count signals as rows of an array."""
        gen = as_generator(rng)
        return np.array([self.sample(gen) for _ in range(count)])


def expected_loss(
    D: np.ndarray, signals: np.ndarray, lam: float, threads: int = 1
) -> tuple[float, float]:
    """
    Mean fitting loss over held-out signals.

    Returns:
        Tuple of (mean, standard error)
    """
    losses = ordered_map(lambda y: fitting_loss(D, y, lam), list(signals), threads)
    mean = math.fsum(losses) / len(losses)
    if len(losses) < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in losses) / (len(losses) - 1)
    return mean, math.sqrt(var / len(losses))


class DictionaryModel(SurrogateModel):
    """SSUM model of online dictionary learning; points are dictionaries."""

    def __init__(self, D0: np.ndarray, lam: float, gamma_prox: float):
        self.state = DictionaryState.initial(D0, lam, gamma_prox)
        self.strong_convexity = gamma_prox
        self._code_cache: Optional[tuple[Any, Any, np.ndarray]] = None

    @property
    def n_observed(self) -> int:
        return self.state.r

    def _code(self, D: np.ndarray, y: np.ndarray) -> np.ndarray:
        cached = self._code_cache
        if cached is not None and cached[0] is D and cached[1] is y:
            return cached[2]
        alpha = lasso(D, y, self.state.lam)
        self._code_cache = (D, y, alpha)
        return alpha

    def eval_g(self, x, xi) -> float:
        return fitting_loss(x, xi, self.state.lam, self._code(x, xi))

    def eval_ghat(self, x, y, xi) -> float:
        alpha = self._code(y, xi)
        residual = np.asarray(xi, dtype=float) - x @ alpha
        diff = x - y
        return float(
            0.5 * residual @ residual
            + self.state.lam * np.sum(np.abs(alpha))
            + 0.5 * self.state.gamma_prox * np.sum(diff * diff)
        )

    def observe(self, y, xi) -> None:
        if y is not self.state.D:
            self.state = replace(self.state, D=np.array(y, dtype=float))
        self.state = observe_signal(self.state, xi, self._code(y, xi))

    def minimize_aggregate(self) -> np.ndarray:
        D = dict_update(self.state)
        self.state.D = D
        return D

    def eval_aggregate(self, x) -> float:
        return aggregate_loss(self.state, np.asarray(x, dtype=float))

    def project(self, x) -> np.ndarray:
        return project_columns(x)


SignalSource = Union[PlantedSource, Callable[[np.random.Generator], np.ndarray]]


def online_dictionary_learning(
    source: SignalSource,
    D0: np.ndarray,
    lam: float,
    gamma_prox: float,
    r_max: int,
    rng: Any = 0,
    trace_every: int = 1,
    track_gap: bool = False,
    keep_iterates: bool = False,
    callback: Optional[Callback] = None,
) -> RunTrace:
    """
    Learn a dictionary online with SSUM.

    The trace records the sampled fitting loss g(D^{r-1}, y^r). gamma_prox = 0
    gives the classical online dictionary learning update.

    Raises:
        InfeasibleStart: If some column of D0 has norm above one
    """
    model = DictionaryModel(D0, lam, gamma_prox)
    logger.info(
        f"Online dictionary learning: {D0.shape[0]} x {D0.shape[1]}, "
        f"lam={lam}, gamma={gamma_prox}, {r_max} signals"
    )
    return run_ssum(
        model,
        source,
        np.asarray(D0, dtype=float),
        r_max,
        trace_every=trace_every,
        rng=rng,
        track_gap=track_gap,
        keep_iterates=keep_iterates,
        callback=callback,
    )
