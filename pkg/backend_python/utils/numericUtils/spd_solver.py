import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from utils.errors import SolveError

logger = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 64
# Relative jitter tried in order, scaled by the mean diagonal
JITTER_STEPS = (1e-12, 1e-10, 1e-8)
PIVOT_FLOOR = 1e-12


@dataclass(frozen=True)
class SpdSystem:
    """
    Dense symmetric positive definite system A x = b.

    time_index names the symbol the system was built for so a failure can be
    traced back; None means a time-invariant design.
    """
    A: np.ndarray
    b: np.ndarray
    time_index: Optional[int] = None
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if b.shape != (n,):
            raise ValueError(f"b must have length {n}, got shape {b.shape}")
        if n > self.max_dim:
            raise ValueError(f"System dimension {n} exceeds cap {self.max_dim}")
        scale = max(1.0, float(np.max(np.abs(A))) if n else 1.0)
        if n and np.max(np.abs(A - A.T)) > 1e-12 * scale:
            raise ValueError("A is not symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def _factor_checked(A: np.ndarray):
    """Cholesky with the pivot floor; returns None when A is not usable"""
    n = A.shape[0]
    try:
        factor = cho_factor(A, lower=True, check_finite=True)
    except (LinAlgError, ValueError):
        return None
    pivots = np.diag(factor[0]) ** 2
    floor = PIVOT_FLOOR * np.trace(A) / n
    if np.any(pivots <= floor):
        return None
    return factor


def solve_spd_with_jitter(system: SpdSystem) -> Tuple[np.ndarray, float]:
    """
    Solve the system, adding diagonal jitter only when the plain factorization
    fails. Returns the solution and the absolute jitter that was applied.
    """
    A, b = system.A, system.b
    if system.dim == 0:
        return np.zeros(0), 0.0

    factor = _factor_checked(A)
    if factor is not None:
        return cho_solve(factor, b), 0.0

    mean_diag = float(np.mean(np.diag(A)))
    eye = np.eye(system.dim)
    for rel in JITTER_STEPS:
        jitter = rel * abs(mean_diag)
        factor = _factor_checked(A + jitter * eye)
        if factor is not None:
            logger.warning(f"⚠️ SPD rescue: jitter {jitter:.2e} applied at time index {system.time_index}")
            return cho_solve(factor, b), jitter

    raise SolveError("Matrix not positive definite after maximum jitter", system.time_index)


def solve_spd(system: SpdSystem) -> np.ndarray:
    """Solve a small SPD system via Cholesky; see solve_spd_with_jitter"""
    x, _ = solve_spd_with_jitter(system)
    return x
