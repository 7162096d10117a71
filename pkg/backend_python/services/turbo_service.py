"""
Turbo equalization loop for one coded block:

    bits -> RSC encode -> interleave -> BPSK (+guards) -> ISI channel + AWGN
    repeat: equalize(a priori) -> deinterleave -> BCJR decode -> interleave -> a priori
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from component.bidfe_service import BiDfeEqualizer, Combiner
from component.dfe_service import DfeEqualizer, LinearEqualizer, LlrMode
from component.analysis_service import noise_from_snr_db
from component.signal_service import (
    apply_channel,
    bpsk_modulate,
    build_convolution_matrices,
    build_le_matrices,
    time_reverse_channel,
)
from component.trellis_service import (
    Interleaver,
    LlrFrame,
    LlrRole,
    MapEqualizer,
    RscCode,
    bcjr_decode,
    deinterleave,
    interleave,
    rsc_encode,
)
from services.experiment_config import ExperimentConfig, Variant
from services.mutual_information_service import measure_mi
from utils.errors import BlockProcessingError

logger = logging.getLogger(__name__)


def build_equalizer(cfg: ExperimentConfig):
    """Equalizer object for cfg.variant; all of them expose equalize(rx, La_payload, ...)"""
    ch = cfg.resolve_channel()
    variant = cfg.variant
    family = variant.family
    if family == "map":
        return MapEqualizer(ch)
    if family == "le":
        return LinearEqualizer(build_le_matrices(ch, cfg.le_taps), variant.filter_mode)

    L_c, L_d = cfg.dfe_ff_taps - 1, cfg.dfe_fb_taps
    mats = build_convolution_matrices(ch, L_c, L_d)
    llr_mode = LlrMode.PROPOSED if variant.value.endswith("_proposed") else LlrMode.CONVENTIONAL
    if family == "dfe":
        return DfeEqualizer(mats, variant.filter_mode, llr_mode)

    mats_bwd = build_convolution_matrices(time_reverse_channel(ch), L_c, L_d)
    combiner = Combiner.MEAN if variant.value.endswith("_mean") else cfg.combiner
    return BiDfeEqualizer(mats, mats_bwd, variant.filter_mode, llr_mode, combiner=combiner,
                          rho_window=cfg.rho_window)


def block_seed(base_seed: int, block: int) -> np.random.SeedSequence:
    """Seed of block `block`; independent of the variant so comparisons see the same noise"""
    return np.random.SeedSequence(base_seed, spawn_key=(block,))


def _generator(seed: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class IterationRecord:
    iteration: int
    bit_errors: int
    mi_equalizer: float
    mi_decoder: float
    rho_hat: Optional[float] = None
    rho_valid: Optional[bool] = None


@dataclass
class TurboBlockResult:
    snr_db: float
    block: Optional[int]
    message_bits: int
    records: List[IterationRecord] = field(default_factory=list)

    @property
    def final_errors(self) -> int:
        return self.records[-1].bit_errors if self.records else 0


def run_turbo_block(cfg: ExperimentConfig, snr_db: float, seed: Union[int, np.random.SeedSequence],
                    equalizer=None, block: Optional[int] = None) -> TurboBlockResult:
    """
    Simulate one block through cfg.iterations turbo iterations and count
    message bit errors after every decoder pass.
    """
    ch = cfg.resolve_channel()
    code = RscCode()
    equalizer = equalizer or build_equalizer(cfg)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    bits_seed, perm_seed, noise_seed = ss.spawn(3)

    bits = _generator(bits_seed).integers(0, 2, cfg.message_bits)
    coded = rsc_encode(bits, code)
    pi = Interleaver.random(len(coded), perm_seed) if cfg.interleaver else Interleaver.identity(len(coded))
    frame = bpsk_modulate(interleave(coded, pi), cfg.guard_len, cfg.guard_len)
    N0 = noise_from_snr_db(ch, snr_db)
    rx = apply_channel(ch, frame, N0, _generator(noise_seed))

    coded_symbols = 1.0 - 2.0 * coded
    result = TurboBlockResult(snr_db=snr_db, block=block, message_bits=cfg.message_bits)
    La = LlrFrame.zeros(len(coded))

    for it in range(1, cfg.iterations + 1):
        try:
            Le_eq = equalizer.equalize(rx, La, truth=frame, ideal_feedback=cfg.ideal_feedback)
            decoder_in = deinterleave(Le_eq, pi).with_role(LlrRole.A_PRIORI)
            Le_dec, posterior = bcjr_decode(code, decoder_in)
        except Exception as e:
            logger.error(f"❌ Turbo block {block} failed at {snr_db:g} dB, iteration {it}: {e}")
            raise BlockProcessingError(e, snr_db, -1 if block is None else block, it) from e

        decoded = (posterior.values < 0.0).astype(np.int64)
        diag = equalizer.diagnostics()
        result.records.append(IterationRecord(
            iteration=it,
            bit_errors=int(np.sum(decoded != bits)),
            mi_equalizer=measure_mi(decoder_in, coded_symbols),
            mi_decoder=measure_mi(Le_dec, coded_symbols),
            rho_hat=diag.get("rho_hat"),
            rho_valid=diag.get("rho_valid"),
        ))
        La = interleave(Le_dec, pi).with_role(LlrRole.A_PRIORI)

    return result
