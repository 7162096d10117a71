"""
FFT-grid spectral factorization of the folded channel spectrum

    R_ss(e^jθ) = Px |H(e^jθ)|^2 + N0 = P0 |G(e^jθ)|^2

with G monic and minimum phase. The factor comes from the causal half of the
real cepstrum of log R_ss, which stays stable for spectral nulls close to the
unit circle.
"""

import logging
from dataclasses import dataclass

import numpy as np

from utils.errors import SpectralFactorizationError

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 4096
TRUNCATION_TOL = 1e-12


@dataclass(frozen=True)
class SpectralFactorization:
    P0: float
    g: np.ndarray
    grid_size: int
    # Sampled responses on the same grid, reused by the zero-lag extractions
    g_response: np.ndarray
    rss: np.ndarray

    def reconstruct_rss_lags(self, max_lag: int) -> np.ndarray:
        """P0 * (g convolved with its reversal), lags 0..max_lag"""
        full = self.P0 * np.correlate(self.g, self.g, mode="full")
        center = len(self.g) - 1
        lags = full[center:center + max_lag + 1]
        return np.pad(lags, (0, max(0, max_lag + 1 - len(lags))))


def validate_grid(grid: int, channel_length: int) -> None:
    if grid <= 0 or grid & (grid - 1):
        raise ValueError(f"grid must be a power of two, got {grid}")
    if grid < 8 * channel_length:
        raise ValueError(f"grid {grid} is smaller than 8 * L_h = {8 * channel_length}")


def spectral_factorize(channel, Px: float, N0: float, grid: int = DEFAULT_GRID_SIZE) -> SpectralFactorization:
    """
    Factor Px*R_hh + N0 on an FFT grid. channel is an IsiChannel or a raw tap vector.

    log P0 is the grid mean of log R_ss; g is exp of the causal cepstrum,
    truncated after the last coefficient with |g_k| >= 1e-12.
    """
    h = np.asarray(getattr(channel, "taps", channel), dtype=float)
    if N0 <= 0:
        raise ValueError(f"N0 must be positive, got {N0}")
    validate_grid(grid, len(h))

    H = np.fft.fft(h, grid)
    rss = Px * np.abs(H) ** 2 + N0
    if np.any(rss <= 0.0) or not np.all(np.isfinite(rss)):
        raise SpectralFactorizationError("R_ss is not strictly positive on the frequency grid")

    cepstrum = np.fft.ifft(np.log(rss)).real
    log_p0 = cepstrum[0]

    causal = np.zeros(grid)
    half = grid // 2
    causal[1:half] = cepstrum[1:half]
    causal[half] = 0.5 * cepstrum[half]

    G = np.exp(np.fft.fft(causal))
    g_full = np.fft.ifft(G).real[:half]
    significant = np.nonzero(np.abs(g_full) >= TRUNCATION_TOL)[0]
    g = g_full[: significant[-1] + 1] if len(significant) else np.ones(1)

    P0 = float(np.exp(log_p0))
    logger.debug(f"📊 Spectral factorization: P0={P0:.6f}, {len(g)} taps retained on grid {grid}")
    return SpectralFactorization(P0=P0, g=g, grid_size=grid, g_response=G, rss=rss)
