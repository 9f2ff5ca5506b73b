from dataclasses import dataclass

import numpy as np


@dataclass
class DictionaryState:
    """
    Dictionary plus the sufficient statistics of the proximal surrogate.

    Attributes:
        D: Dictionary, n x k, columns in the unit ball
        A_s: sum of alpha alpha^T over observed signals (k x k)
        B_s: sum of y alpha^T (n x k)
        C_prox: sum of the dictionaries the signals were coded against (n x k)
        offset: sum of 0.5||y||^2 + lam ||alpha||_1 + (gamma/2)||D_prev||_F^2
        r: Number of observed signals
        lam: Sparsity weight, >= 0
        gamma_prox: Proximal weight, >= 0
    """

    D: np.ndarray
    A_s: np.ndarray
    B_s: np.ndarray
    C_prox: np.ndarray
    lam: float
    gamma_prox: float
    offset: float = 0.0
    r: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.gamma_prox < 0:
            raise ValueError(f"gamma_prox must be nonnegative, got {self.gamma_prox}")

    @classmethod
    def initial(
        cls, D0: np.ndarray, lam: float, gamma_prox: float
    ) -> "DictionaryState":
        n, k = D0.shape
        return cls(
            D=np.array(D0, dtype=float),
            A_s=np.zeros((k, k)),
            B_s=np.zeros((n, k)),
            C_prox=np.zeros((n, k)),
            lam=lam,
            gamma_prox=gamma_prox,
        )

    @property
    def n_atoms(self) -> int:
        return self.D.shape[1]
