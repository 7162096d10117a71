# Numeric utilities: SPD solves and spectral factorization

from .spd_solver import SpdSystem, solve_spd, solve_spd_with_jitter
from .spectral_factorizer import DEFAULT_GRID_SIZE, SpectralFactorization, spectral_factorize

__all__ = [
    'SpdSystem',
    'solve_spd',
    'solve_spd_with_jitter',
    'DEFAULT_GRID_SIZE',
    'SpectralFactorization',
    'spectral_factorize',
]
