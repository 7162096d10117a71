"""
Infinite-length figures of merit: unbiased DFE / time-reversed DFE / BiDFE
output SNR, the limiting noise correlation between the two DFEs, the matched
filter bound, and the rho-sensitivity of the two LLR combiners.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Tuple

import numpy as np
import pandas as pd

from component.bidfe_service import Combiner
from component.signal_service import IsiChannel
from utils.numericUtils.spectral_factorizer import DEFAULT_GRID_SIZE, SpectralFactorization, spectral_factorize

logger = logging.getLogger(__name__)


def to_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def noise_from_snr_db(ch: IsiChannel, snr_db: float, Px: float = 1.0) -> float:
    """N0 such that Px * sum h_k^2 / N0 equals snr_db"""
    return Px * ch.energy * 10.0 ** (-snr_db / 10.0)


@dataclass(frozen=True)
class IdealSnrReport:
    snr_udfe: float
    snr_urdfe: float
    snr_ubidfe: float
    rho_inf: float
    snr_mfb: float
    mse_udfe: float
    mse_ubidfe: float

    @property
    def snr_udfe_db(self) -> float:
        return to_db(self.snr_udfe)

    @property
    def snr_urdfe_db(self) -> float:
        return to_db(self.snr_urdfe)

    @property
    def snr_ubidfe_db(self) -> float:
        return to_db(self.snr_ubidfe)

    @property
    def snr_mfb_db(self) -> float:
        return to_db(self.snr_mfb)


def _factorize(ch: IsiChannel, Px: float, N0: float, grid: int) -> SpectralFactorization:
    if N0 <= 0:
        raise ValueError(f"N0 must be positive, got {N0}")
    return spectral_factorize(ch, Px, N0, grid)


def ideal_dfe_snr(ch: IsiChannel, Px: float, N0: float, grid: int = DEFAULT_GRID_SIZE) -> float:
    """(P0 - N0) / N0; the time-reversed DFE has the same value"""
    sf = _factorize(ch, Px, N0, grid)
    return (sf.P0 - N0) / N0


def _rho_inf(ch: IsiChannel, Px: float, N0: float, sf: SpectralFactorization) -> float:
    """
    Px / (P0 - N0) * [R_hh(D) / g*(D^-*)^2]_0, the zero lag taken as the grid
    mean; real channels give a real coefficient.
    """
    H = np.fft.fft(ch.taps, sf.grid_size)
    zero_lag = np.mean(np.abs(H) ** 2 / np.conj(sf.g_response) ** 2)
    return float(Px * zero_lag.real / (sf.P0 - N0))


def ideal_bidfe_snr(ch: IsiChannel, Px: float, N0: float, grid: int = DEFAULT_GRID_SIZE) -> Tuple[float, float]:
    """(rho_inf, 2 (P0 - N0) / ((1 + rho) N0))"""
    sf = _factorize(ch, Px, N0, grid)
    rho = _rho_inf(ch, Px, N0, sf)
    return rho, 2.0 * (sf.P0 - N0) / ((1.0 + rho) * N0)


def mfb_snr(ch: IsiChannel, Px: float, N0: float) -> float:
    if N0 <= 0:
        raise ValueError(f"N0 must be positive, got {N0}")
    return Px * ch.energy / N0


def ideal_snr_report(ch: IsiChannel, Px: float, N0: float, grid: int = DEFAULT_GRID_SIZE) -> IdealSnrReport:
    sf = _factorize(ch, Px, N0, grid)
    snr_udfe = (sf.P0 - N0) / N0
    rho = _rho_inf(ch, Px, N0, sf)
    mse_udfe = Px / snr_udfe
    return IdealSnrReport(
        snr_udfe=snr_udfe,
        snr_urdfe=snr_udfe,
        snr_ubidfe=2.0 * (sf.P0 - N0) / ((1.0 + rho) * N0),
        rho_inf=rho,
        snr_mfb=mfb_snr(ch, Px, N0),
        mse_udfe=mse_udfe,
        mse_ubidfe=0.5 * (1.0 + rho) * mse_udfe,
    )


def snr_table(ch: IsiChannel, snr_db_grid: Iterable[float], Px: float = 1.0,
              grid: int = DEFAULT_GRID_SIZE) -> pd.DataFrame:
    """Rows of snr_db, snr_udfe_db, snr_ubidfe_db, rho_inf, snr_mfb_db"""
    rows = []
    for snr_db in snr_db_grid:
        report = ideal_snr_report(ch, Px, noise_from_snr_db(ch, snr_db, Px), grid)
        rows.append({
            "snr_db": float(snr_db),
            "snr_udfe_db": report.snr_udfe_db,
            "snr_ubidfe_db": report.snr_ubidfe_db,
            "rho_inf": report.rho_inf,
            "snr_mfb_db": report.snr_mfb_db,
        })
    logger.info(f"📊 Ideal SNR table computed for {len(rows)} points on channel {ch.name}")
    return pd.DataFrame(rows, columns=["snr_db", "snr_udfe_db", "snr_ubidfe_db", "rho_inf", "snr_mfb_db"])


def combiner_sensitivity(variant: Combiner, rho: float, Nf: float, Nb: float, Lef: float, Leb: float) -> float:
    """|dL_e/drho| of the whitened or the equal-variance combiner"""
    variant = Combiner(variant)
    if variant is Combiner.EQUAL_VARIANCE:
        return abs((Lef + Leb) / (1.0 + rho) ** 2)
    if variant is Combiner.WHITENED:
        if abs(rho) >= 1.0:
            raise ValueError("Whitened combiner sensitivity needs |rho| < 1")
        root = math.sqrt(Nf * Nb)
        scale = (1.0 - rho ** 2) ** 2
        wf = (2.0 * rho * Nb - (1.0 + rho ** 2) * root) / (scale * Nb)
        wb = (2.0 * rho * Nf - (1.0 + rho ** 2) * root) / (scale * Nf)
        return abs(wf * Lef + wb * Leb)
    raise ValueError("The mean combiner does not depend on rho")


def report_as_dict(report: IdealSnrReport) -> dict:
    data = asdict(report)
    data.update(
        snr_udfe_db=report.snr_udfe_db,
        snr_ubidfe_db=report.snr_ubidfe_db,
        snr_mfb_db=report.snr_mfb_db,
    )
    return data
