"""
EXIT curves of the equalizer and of the decoder.

Both curves are measured on fresh random frames with Gaussian-consistent a
priori LLRs. In the emitted table the decoder curve is placed on swapped axes
(chart_x = its output MI, chart_y = its input MI) so both curves share one
chart whose x axis is the equalizer input.
"""

import logging
from typing import Dict, List

import numpy as np
import pandas as pd

from component.analysis_service import noise_from_snr_db
from component.trellis_service import LlrRole, RscCode, bcjr_decode, rsc_encode
from component.signal_service import apply_channel, bpsk_modulate
from services.experiment_config import ExperimentConfig
from services.mutual_information_service import generate_apriori_for_exit, measure_mi
from services.turbo_service import build_equalizer, run_turbo_block, block_seed

logger = logging.getLogger(__name__)

EXIT_COLUMNS = ["role", "snr_db", "i_in", "i_out", "chart_x", "chart_y"]
EXIT_AXIS_NOTE = (
    "equalizer rows: chart_x=i_in (a priori MI), chart_y=i_out (extrinsic MI); "
    "decoder rows: chart_x=i_out, chart_y=i_in (axes swapped); "
    "trajectory rows: chart_x=equalizer extrinsic MI, chart_y=decoder extrinsic MI"
)

# spawn_key prefixes keep EXIT streams apart from the BER block streams
_EQUALIZER_STREAM = 1
_DECODER_STREAM = 2


def ia_grid(step: float) -> List[float]:
    n = int(round(1.0 / step))
    return [round(min(1.0, k * step), 10) for k in range(n + 1)]


def _rng(base_seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(base_seed, spawn_key=key)))


def equalizer_exit_curve(cfg: ExperimentConfig, snr_db: float, equalizer=None) -> List[Dict]:
    ch = cfg.resolve_channel()
    equalizer = equalizer or build_equalizer(cfg)
    N0 = noise_from_snr_db(ch, snr_db)
    n_symbols = RscCode().coded_length(cfg.message_bits)
    rows = []
    for k, I_A in enumerate(ia_grid(cfg.exit_step)):
        measured_in, measured_out = [], []
        for f in range(cfg.exit_frames):
            rng = _rng(cfg.base_seed, _EQUALIZER_STREAM, k, f)
            frame = bpsk_modulate(rng.integers(0, 2, n_symbols), cfg.guard_len, cfg.guard_len)
            rx = apply_channel(ch, frame, N0, rng)
            La = generate_apriori_for_exit(I_A, frame, rng)
            Le = equalizer.equalize(rx, La, truth=frame, ideal_feedback=cfg.ideal_feedback)
            measured_in.append(measure_mi(La, frame))
            measured_out.append(measure_mi(Le, frame))
        i_out = float(np.mean(measured_out))
        rows.append({"role": "equalizer", "snr_db": float(snr_db), "i_in": I_A, "i_out": i_out,
                     "chart_x": I_A, "chart_y": i_out})
        logger.debug(f"📊 EXIT equalizer {snr_db:g} dB: I_A={I_A:.2f} (measured {np.mean(measured_in):.3f}) -> I_E={i_out:.4f}")
    return rows


def decoder_exit_curve(cfg: ExperimentConfig) -> List[Dict]:
    """Depends only on the code and the seed, never on the channel or SNR"""
    code = RscCode()
    rows = []
    for k, I_A in enumerate(ia_grid(cfg.exit_step)):
        measured = []
        for f in range(cfg.exit_frames):
            rng = _rng(cfg.base_seed, _DECODER_STREAM, k, f)
            coded = rsc_encode(rng.integers(0, 2, cfg.message_bits), code)
            symbols = 1.0 - 2.0 * coded
            La = generate_apriori_for_exit(I_A, symbols, rng)
            Le, _ = bcjr_decode(code, La.with_role(LlrRole.A_PRIORI))
            measured.append(measure_mi(Le, symbols))
        i_out = float(np.mean(measured))
        rows.append({"role": "decoder", "i_in": I_A, "i_out": i_out, "chart_x": i_out, "chart_y": I_A})
    return rows


def run_exit_chart(cfg: ExperimentConfig) -> pd.DataFrame:
    equalizer = build_equalizer(cfg)
    decoder_rows = decoder_exit_curve(cfg)
    rows: List[Dict] = []
    for snr_db in cfg.snr_db:
        logger.info(f"🔄 EXIT curves at {snr_db:g} dB for {cfg.variant.value}")
        rows.extend(equalizer_exit_curve(cfg, snr_db, equalizer))
        rows.extend({**r, "snr_db": float(snr_db)} for r in decoder_rows)
        if cfg.exit_trajectory:
            result = run_turbo_block(cfg, snr_db, block_seed(cfg.base_seed, 0), block=0)
            for rec in result.records:
                rows.append({"role": "trajectory", "snr_db": float(snr_db), "i_in": rec.mi_equalizer,
                             "i_out": rec.mi_decoder, "chart_x": rec.mi_equalizer, "chart_y": rec.mi_decoder})
    return pd.DataFrame(rows, columns=EXIT_COLUMNS)
