import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional

import pandas as pd

from services.experiment_config import ExperimentConfig
from services.turbo_service import TurboBlockResult, block_seed, build_equalizer, run_turbo_block

logger = logging.getLogger(__name__)

BER_COLUMNS = ["snr_db", "iteration", "bit_errors", "bits_counted", "ber", "blocks"]


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    iteration: int
    bit_errors: int
    bits_counted: int
    ber: float
    blocks: int


def _run_block_job(cfg_data: Dict, snr_db: float, block: int) -> TurboBlockResult:
    """Process-pool entry point; rebuilds everything from plain data"""
    cfg = ExperimentConfig(**cfg_data)
    return run_turbo_block(cfg, snr_db, block_seed(cfg.base_seed, block), block=block)


def run_blocks(cfg: ExperimentConfig, snr_db: float,
               stop: Optional[Callable[[List[TurboBlockResult]], bool]] = None,
               executor: Optional[ProcessPoolExecutor] = None) -> List[TurboBlockResult]:
    """
    Run blocks 0, 1, ... in fixed batches of cfg.batch_size until cfg.blocks
    or until stop(results) holds after a batch. Batches are the only stopping
    points, so the block set never depends on how many workers ran them.
    """
    results: List[TurboBlockResult] = []
    equalizer = None if executor else build_equalizer(cfg)
    cfg_data = cfg.model_dump(mode="json")
    next_block = 0
    while next_block < cfg.blocks:
        batch = list(range(next_block, min(next_block + cfg.batch_size, cfg.blocks)))
        if executor is not None:
            futures = [executor.submit(_run_block_job, cfg_data, snr_db, b) for b in batch]
            results.extend(f.result() for f in futures)
        else:
            results.extend(
                run_turbo_block(cfg, snr_db, block_seed(cfg.base_seed, b), equalizer=equalizer, block=b)
                for b in batch
            )
        next_block = batch[-1] + 1
        if stop is not None and stop(results):
            break
    return results


def summarize_ber(snr_db: float, results: List[TurboBlockResult], iterations: int) -> List[BerPoint]:
    points = []
    blocks = len(results)
    bits = sum(r.message_bits for r in results)
    for it in range(iterations):
        errors = sum(r.records[it].bit_errors for r in results)
        points.append(BerPoint(
            snr_db=float(snr_db),
            iteration=it + 1,
            bit_errors=errors,
            bits_counted=bits,
            ber=errors / bits if bits else 0.0,
            blocks=blocks,
        ))
    return points


def _target_reached(target: Optional[int]) -> Optional[Callable[[List[TurboBlockResult]], bool]]:
    if target is None:
        return None
    return lambda results: sum(r.final_errors for r in results) >= target


def run_ber_sweep(cfg: ExperimentConfig) -> pd.DataFrame:
    """
    BER per SNR point and per turbo iteration. Each SNR point accumulates
    blocks until cfg.blocks or cfg.target_errors final-iteration errors.
    """
    rows: List[Dict] = []
    executor = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for snr_db in cfg.snr_db:
            logger.info(f"🔄 BER point {snr_db:g} dB: variant={cfg.variant.value}, channel={cfg.channel}")
            results = run_blocks(cfg, snr_db, stop=_target_reached(cfg.target_errors), executor=executor)
            points = summarize_ber(snr_db, results, cfg.iterations)
            final = points[-1]
            logger.info(
                f"📊 {snr_db:g} dB: {final.bit_errors} errors / {final.bits_counted} bits "
                f"(BER {final.ber:.3e}) over {final.blocks} blocks"
            )
            rows.extend(asdict(p) for p in points)
    finally:
        if executor is not None:
            executor.shutdown()
    return pd.DataFrame(rows, columns=BER_COLUMNS)
