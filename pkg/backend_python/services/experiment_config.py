import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, Field, field_validator, model_validator

from component.bidfe_service import Combiner
from component.signal_service import IsiChannel
from utils.numericUtils.spectral_factorizer import DEFAULT_GRID_SIZE, validate_grid

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    TV_LE = "tv_le"
    TIV_LE = "tiv_le"
    TV_DFE = "tv_dfe"
    TIV_DFE = "tiv_dfe"
    TV_DFE_PROPOSED = "tv_dfe_proposed"
    TIV_DFE_PROPOSED = "tiv_dfe_proposed"
    TV_BIDFE_MEAN = "tv_bidfe_mean"
    TIV_BIDFE_MEAN = "tiv_bidfe_mean"
    TV_BIDFE_PROPOSED = "tv_bidfe_proposed"
    TIV_BIDFE_PROPOSED = "tiv_bidfe_proposed"
    MAP = "map"

    @property
    def family(self) -> str:
        if self is Variant.MAP:
            return "map"
        if self.value.endswith("_le"):
            return "le"
        return "bidfe" if "bidfe" in self.value else "dfe"

    @property
    def filter_mode(self) -> Optional[str]:
        if self is Variant.MAP:
            return None
        return "tiv" if self.value.startswith("tiv_") else "tv"


# (DFE feedforward taps, DFE feedback taps, LE taps)
FILTER_DEFAULTS = {
    "h1": (17, 4, 21),
    "h2": (21, 6, 27),
}


def default_filter_lengths(ch: IsiChannel) -> Tuple[int, int, int]:
    if ch.name in FILTER_DEFAULTS:
        return FILTER_DEFAULTS[ch.name]
    mem = ch.length - 1
    # the LE window is symmetric, so its length must stay odd
    le = 5 * mem + 1 if mem % 2 == 0 else 5 * mem + 2
    return 4 * mem + 1, mem, le


def parse_snr_grid(value: Any) -> List[float]:
    """Accept a list, a comma separated list, or start:stop:step (stop included)"""
    if value is None:
        return []
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        text = value.strip()
        if not text:
            return []
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) == 2:
                start, stop, step = parts[0], parts[1], 1.0
            elif len(parts) == 3:
                start, stop, step = parts
            else:
                raise ValueError(f"Bad SNR range '{value}', expected start:stop[:step]")
            if step <= 0:
                raise ValueError("SNR range step must be positive")
            return [round(float(x), 10) for x in np.arange(start, stop + step / 2.0, step)]
        return [float(tok) for tok in text.split(",") if tok.strip()]
    return [float(v) for v in value]


class ExperimentConfig(BaseModel):
    """
    One experiment: channel, equalizer variant, SNR grid and Monte-Carlo controls.

    Filter lengths left unset resolve from the channel (h1: 17/4 DFE, 21 LE;
    h2: 21/6 DFE, 27 LE; other channels scale with the memory).
    """
    channel: str = "h1"
    variant: Variant = Variant.TV_DFE_PROPOSED
    snr_db: List[float] = Field(default_factory=lambda: [6.0])
    iterations: int = Field(default=20, ge=1)
    message_bits: int = Field(default=2048, ge=1)
    blocks: int = Field(default=200, ge=1)
    target_errors: Optional[int] = Field(default=100, ge=1)
    batch_size: int = Field(default=8, ge=1)
    workers: int = Field(default_factory=lambda: int(os.getenv("TURBO_WORKERS", "1")), ge=1)
    base_seed: int = 2024
    interleaver: bool = True
    ideal_feedback: bool = False
    combiner: Combiner = Combiner.EQUAL_VARIANCE
    rho_window: Optional[int] = Field(default=None, ge=1)
    dfe_ff_taps: Optional[int] = Field(default=None, ge=1)
    dfe_fb_taps: Optional[int] = Field(default=None, ge=0)
    le_taps: Optional[int] = Field(default=None, ge=1)
    grid_size: int = Field(default_factory=lambda: int(os.getenv("TURBO_GRID_SIZE", str(DEFAULT_GRID_SIZE))))
    exit_step: float = Field(default=0.1, gt=0.0, le=1.0)
    exit_frames: int = Field(default=4, ge=1)
    exit_trajectory: bool = False
    selftest_quick: bool = False
    output: Optional[str] = None

    @field_validator("snr_db", mode="before")
    @classmethod
    def _parse_snr(cls, value):
        return parse_snr_grid(value)

    @field_validator("channel")
    @classmethod
    def _check_channel(cls, value: str) -> str:
        IsiChannel.from_spec(value)
        return value.strip()

    @field_validator("le_taps")
    @classmethod
    def _odd_le(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value % 2 == 0:
            raise ValueError("le_taps must be odd (symmetric window)")
        return value

    @model_validator(mode="after")
    def _resolve_lengths(self) -> "ExperimentConfig":
        ch = self.resolve_channel()
        ff, fb, le = default_filter_lengths(ch)
        if self.dfe_ff_taps is None:
            self.dfe_ff_taps = ff
        if self.dfe_fb_taps is None:
            self.dfe_fb_taps = fb
        if self.le_taps is None:
            self.le_taps = le
        if self.dfe_fb_taps < ch.length - 1:
            raise ValueError(f"dfe_fb_taps={self.dfe_fb_taps} must cover the channel memory {ch.length - 1}")
        validate_grid(self.grid_size, ch.length)
        return self

    def resolve_channel(self) -> IsiChannel:
        return IsiChannel.from_spec(self.channel)

    @property
    def guard_len(self) -> int:
        return max(self.dfe_ff_taps, self.dfe_fb_taps, self.le_taps) + self.resolve_channel().length


def load_config_file(path: str) -> Dict[str, Any]:
    """Flat key=value file; keys mirror ExperimentConfig fields, empty values are dropped"""
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    raw = dotenv_values(file_path)
    unknown = set(raw) - set(ExperimentConfig.model_fields)
    if unknown:
        raise ValueError(f"Unknown config keys: {sorted(unknown)}")
    logger.info(f"🔧 Loaded {len(raw)} keys from {file_path}")
    return {k: v for k, v in raw.items() if v not in (None, "")}


def build_config(config_file: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Model defaults < environment < config file < explicit overrides (CLI flags, request body)"""
    values: Dict[str, Any] = {}
    if config_file:
        values.update(load_config_file(config_file))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return ExperimentConfig(**values)
