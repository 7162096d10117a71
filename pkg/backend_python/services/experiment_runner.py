"""Dispatch of an experiment kind to its service, plus CSV emission and storage of the result."""

import logging
import uuid
from typing import List, Optional, Tuple

import pandas as pd

from component.analysis_service import snr_table
from services.ber_sweep_service import run_ber_sweep
from services.csv_service import CSVService
from services.exit_chart_service import EXIT_AXIS_NOTE, run_exit_chart
from services.experiment_config import ExperimentConfig
from services.rho_trajectory_service import run_rho_trajectory
from services.selftest_service import run_selftest

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("ber", "exit", "rho", "snr", "selftest")

_COLUMN_NOTES = {
    "ber": "ber = bit_errors / bits_counted over message bits after each decoder pass",
    "exit": EXIT_AXIS_NOTE,
    "rho": "rho_hat statistics use only blocks with a valid estimate; rho_* columns are closed forms",
    "snr": "snr_db = Px*sum(h^2)/N0; snr_*_db are infinite-length unbiased figures, rho_inf is linear",
    "selftest": "each row compares an engine with an independent oracle",
}


def run_kind(kind: str, cfg: ExperimentConfig) -> pd.DataFrame:
    if kind == "ber":
        return run_ber_sweep(cfg)
    if kind == "exit":
        return run_exit_chart(cfg)
    if kind == "rho":
        return run_rho_trajectory(cfg)
    if kind == "snr":
        return snr_table(cfg.resolve_channel(), cfg.snr_db, grid=cfg.grid_size)
    if kind == "selftest":
        return run_selftest(cfg.base_seed, quick=cfg.selftest_quick)
    raise ValueError(f"Unknown experiment kind '{kind}', expected one of {EXPERIMENT_KINDS}")


def csv_notes(kind: str, cfg: ExperimentConfig) -> List[str]:
    notes = [
        f"channel={cfg.channel} variant={cfg.variant.value} iterations={cfg.iterations} "
        f"message_bits={cfg.message_bits} blocks={cfg.blocks} base_seed={cfg.base_seed}",
        f"filters: dfe_ff_taps={cfg.dfe_ff_taps} dfe_fb_taps={cfg.dfe_fb_taps} le_taps={cfg.le_taps} "
        f"interleaver={cfg.interleaver} ideal_feedback={cfg.ideal_feedback}",
    ]
    notes.append(_COLUMN_NOTES[kind])
    return notes


def run_experiment(kind: str, cfg: ExperimentConfig) -> Tuple[pd.DataFrame, str]:
    """Run one experiment and return its table and the versioned CSV text"""
    logger.info(f"🚀 Running '{kind}' on channel {cfg.channel}")
    df = run_kind(kind, cfg)
    text = CSVService().to_csv_text(df, kind, csv_notes(kind, cfg))
    logger.info(f"✅ '{kind}' finished with {len(df)} rows")
    return df, text


def new_run_id(kind: str) -> str:
    return f"{kind}_{uuid.uuid4().hex[:12]}"


def store_result(kind: str, cfg: ExperimentConfig, df: pd.DataFrame, text: str,
                 run_id: Optional[str] = None) -> str:
    """Persist a finished run in the results database"""
    from sql_db.db_methods.database_manager import DatabaseManager

    run_id = run_id or new_run_id(kind)
    with DatabaseManager() as db:
        db.initialize_database()
        repo = db.experiment_repo
        if repo.get_run(run_id) is None:
            repo.create_run(run_id, kind, cfg.model_dump(mode="json"))
        repo.complete_run(run_id, text, len(df))
        if kind == "ber" and len(df):
            repo.add_ber_points(run_id, df)
    logger.info(f"💾 Stored run {run_id}")
    return run_id
