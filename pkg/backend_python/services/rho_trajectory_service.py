import logging
from typing import Dict, List

import numpy as np
import pandas as pd

from component.analysis_service import ideal_bidfe_snr, noise_from_snr_db
from component.bidfe_service import RhoMode, analytic_rho
from component.signal_service import build_convolution_matrices, time_reverse_channel
from services.ber_sweep_service import run_blocks
from services.experiment_config import ExperimentConfig

logger = logging.getLogger(__name__)

RHO_COLUMNS = [
    "snr_db", "iteration", "rho_hat_mean", "rho_hat_std", "valid_blocks", "blocks",
    "rho_no_apriori", "rho_perfect_tv", "rho_perfect_tiv", "rho_inf",
]


def analytic_references(cfg: ExperimentConfig, snr_db: float) -> Dict[str, float]:
    ch = cfg.resolve_channel()
    N0 = noise_from_snr_db(ch, snr_db)
    L_c, L_d = cfg.dfe_ff_taps - 1, cfg.dfe_fb_taps
    fwd = build_convolution_matrices(ch, L_c, L_d)
    bwd = build_convolution_matrices(time_reverse_channel(ch), L_c, L_d)
    rho_inf, _ = ideal_bidfe_snr(ch, 1.0, N0, cfg.grid_size)
    return {
        "rho_no_apriori": analytic_rho(RhoMode.NO_APRIORI, fwd, bwd, N0),
        "rho_perfect_tv": analytic_rho(RhoMode.PERFECT_TV, fwd, bwd, N0),
        "rho_perfect_tiv": analytic_rho(RhoMode.PERFECT_TIV, fwd, bwd, N0),
        "rho_inf": rho_inf,
    }


def run_rho_trajectory(cfg: ExperimentConfig) -> pd.DataFrame:
    """Per-iteration statistics of the estimated rho across blocks, next to the closed forms"""
    if cfg.variant.family != "bidfe":
        raise ValueError(f"rho trajectories need a BiDFE variant, got {cfg.variant.value}")
    rows: List[Dict] = []
    for snr_db in cfg.snr_db:
        logger.info(f"🔄 rho trajectory at {snr_db:g} dB for {cfg.variant.value}, {cfg.blocks} blocks")
        results = run_blocks(cfg, snr_db)
        refs = analytic_references(cfg, snr_db)
        for it in range(cfg.iterations):
            values = np.array([r.records[it].rho_hat for r in results if r.records[it].rho_valid])
            rows.append({
                "snr_db": float(snr_db),
                "iteration": it + 1,
                "rho_hat_mean": float(values.mean()) if len(values) else float("nan"),
                "rho_hat_std": float(values.std()) if len(values) else float("nan"),
                "valid_blocks": int(len(values)),
                "blocks": len(results),
                **refs,
            })
    return pd.DataFrame(rows, columns=RHO_COLUMNS)
