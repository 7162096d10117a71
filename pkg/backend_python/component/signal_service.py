import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

logger = logging.getLogger(__name__)

# Known value of guard symbols and of every symbol outside the frame
GUARD_SYMBOL = 1.0

CHANNEL_PRESETS = {
    "h1": np.array([1.0, 2.0, 3.0, 2.0, 1.0]) / np.sqrt(19.0),
    "h2": np.array([1.0, 2.0, 3.0, 4.0, 3.0, 2.0, 1.0]) / np.sqrt(44.0),
}


@dataclass(frozen=True)
class IsiChannel:
    """Real ISI channel impulse response h_0 .. h_{L_h-1}"""
    taps: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=float))
        if taps.ndim != 1 or len(taps) < 1:
            raise ValueError("Channel needs at least one tap")
        if not np.all(np.isfinite(taps)):
            raise ValueError("Channel taps must be finite")
        if not np.sum(taps ** 2) > 0.0:
            raise ValueError("Channel energy must be positive")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def length(self) -> int:
        return len(self.taps)

    @property
    def energy(self) -> float:
        return float(np.sum(self.taps ** 2))

    def autocorrelation(self) -> np.ndarray:
        """R_hh at lags -(L_h-1) .. L_h-1"""
        return np.correlate(self.taps, self.taps, mode="full")

    @classmethod
    def from_spec(cls, spec: Union[str, "IsiChannel"]) -> "IsiChannel":
        """Resolve a preset name ("h1", "h2") or a comma separated tap list"""
        if isinstance(spec, IsiChannel):
            return spec
        key = spec.strip()
        if key.lower() in CHANNEL_PRESETS:
            return cls(CHANNEL_PRESETS[key.lower()], name=key.lower())
        try:
            taps = [float(tok) for tok in key.split(",") if tok.strip()]
        except ValueError as e:
            raise ValueError(f"Unknown channel '{spec}': not a preset and not a tap list") from e
        return cls(np.array(taps), name="custom")


def time_reverse_channel(ch: IsiChannel) -> IsiChannel:
    """h~_n = h_{L_h-1-n}"""
    name = ch.name[:-9] if ch.name.endswith("_reversed") else f"{ch.name}_reversed"
    return IsiChannel(ch.taps[::-1].copy(), name=name)


@dataclass(frozen=True)
class FrameLayout:
    guard_prefix: int
    guard_suffix: int
    payload_len: int

    def __post_init__(self):
        if min(self.guard_prefix, self.guard_suffix, self.payload_len) < 0:
            raise ValueError("Frame layout counts must be non-negative")

    @property
    def total_len(self) -> int:
        return self.guard_prefix + self.payload_len + self.guard_suffix

    @property
    def payload_slice(self) -> slice:
        return slice(self.guard_prefix, self.guard_prefix + self.payload_len)

    def known_mask(self) -> np.ndarray:
        """True on guard positions"""
        mask = np.ones(self.total_len, dtype=bool)
        mask[self.payload_slice] = False
        return mask

    def reversed(self) -> "FrameLayout":
        return FrameLayout(self.guard_suffix, self.guard_prefix, self.payload_len)


@dataclass(frozen=True)
class SymbolFrame:
    """BPSK symbols of a whole frame, guards included"""
    symbols: np.ndarray
    layout: FrameLayout

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=float)
        if len(symbols) != self.layout.total_len:
            raise ValueError(f"Frame has {len(symbols)} symbols, layout expects {self.layout.total_len}")
        if not np.all(np.abs(symbols) == 1.0):
            raise ValueError("Every symbol must be exactly +1 or -1")
        object.__setattr__(self, "symbols", symbols)

    @property
    def payload(self) -> np.ndarray:
        return self.symbols[self.layout.payload_slice]

    def reversed(self) -> "SymbolFrame":
        return SymbolFrame(self.symbols[::-1].copy(), self.layout.reversed())


@dataclass(frozen=True)
class ReceivedFrame:
    """
    Channel output r_m = sum_k h_k x_{m-k} + w_m for m = 0 .. T+L_h-2,
    where T is the frame length and x outside the frame equals GUARD_SYMBOL.
    """
    samples: np.ndarray
    noise_variance: float
    layout: FrameLayout
    channel_length: int

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise ValueError(f"Noise variance must be positive, got {self.noise_variance}")
        expected = self.layout.total_len + self.channel_length - 1
        if len(self.samples) != expected:
            raise ValueError(f"Received frame has {len(self.samples)} samples, expected {expected}")

    def reversed(self) -> "ReceivedFrame":
        """
        Received frame of the time-reversed symbols through the time-reversed channel.
        Reversing the whole sample vector is exact because the tail of L_h-1
        samples is kept; guard sides swap.
        """
        return ReceivedFrame(
            samples=self.samples[::-1].copy(),
            noise_variance=self.noise_variance,
            layout=self.layout.reversed(),
            channel_length=self.channel_length,
        )


@dataclass(frozen=True)
class ConvolutionMatrices:
    """
    Band matrices relating a sample window to a symbol window.

    Symbol window at time n: x_{n-cursor} .. x_{n-cursor+L_c+L_d}
    Sample window at time n: r_{n+offset} .. r_{n+offset+L_c}, offset = L_d - cursor
    H[i, j] = h_{i-j+L_d}; s is the column of x_n; the first n_feedback
    window positions are fed back through d = M H^T c.
    """
    H: np.ndarray
    s: np.ndarray
    M: np.ndarray
    H1: np.ndarray
    L_c: int
    L_d: int
    cursor: int
    n_feedback: int
    channel: Optional[IsiChannel] = field(default=None, compare=False)

    @property
    def window_len(self) -> int:
        return self.L_c + self.L_d + 1

    @property
    def sample_offset(self) -> int:
        return self.L_d - self.cursor

    def feedback_gain(self, c: np.ndarray) -> np.ndarray:
        return self.M @ (self.H.T @ c)

    def min_guards(self) -> tuple:
        """(prefix, suffix) guard counts needed so every window stays inside the frame"""
        return self.cursor, self.L_c + self.L_d - self.cursor


def _band_matrix(taps: np.ndarray, L_c: int, L_d: int) -> np.ndarray:
    L_h = len(taps)
    rows, cols = L_c + 1, L_c + L_d + 1
    H = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            k = i - j + L_d
            if 0 <= k < L_h:
                H[i, j] = taps[k]
    return H


def build_convolution_matrices(ch: IsiChannel, L_c: int, L_d: int) -> ConvolutionMatrices:
    """DFE geometry: x_n sits right after the L_d fed-back symbols"""
    if L_c < 0 or L_d < 0:
        raise ValueError(f"L_c and L_d must be non-negative, got {L_c}, {L_d}")
    H = _band_matrix(ch.taps, L_c, L_d)
    cols = H.shape[1]
    M = np.eye(L_d, cols)
    return ConvolutionMatrices(
        H=H,
        s=H[:, L_d].copy(),
        M=M,
        H1=H[:, L_d:].copy(),
        L_c=L_c,
        L_d=L_d,
        cursor=L_d,
        n_feedback=L_d,
        channel=ch,
    )


def build_le_matrices(ch: IsiChannel, n_taps: int) -> ConvolutionMatrices:
    """
    Linear equalizer geometry with a symmetric window N1 = N2 = (N-1)/2 around x_n.
    No symbol is fed back, so every window position carries its prior.
    """
    if n_taps < 1 or n_taps % 2 == 0:
        raise ValueError(f"LE tap count must be odd and positive, got {n_taps}")
    n_side = (n_taps - 1) // 2
    L_c = n_taps - 1
    L_d = ch.length - 1
    H = _band_matrix(ch.taps, L_c, L_d)
    cursor = L_d + n_side
    return ConvolutionMatrices(
        H=H,
        s=H[:, cursor].copy(),
        M=np.zeros((0, H.shape[1])),
        H1=H[:, L_d:].copy(),
        L_c=L_c,
        L_d=L_d,
        cursor=cursor,
        n_feedback=0,
        channel=ch,
    )


def bpsk_modulate(bits, guard_prefix: int = 0, guard_suffix: int = 0) -> SymbolFrame:
    """Bit 0 -> +1, bit 1 -> -1; guards of +1 on both sides"""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("bits must be 0 or 1")
    payload = 1.0 - 2.0 * bits
    layout = FrameLayout(guard_prefix, guard_suffix, len(payload))
    symbols = np.concatenate([
        np.full(guard_prefix, GUARD_SYMBOL),
        payload,
        np.full(guard_suffix, GUARD_SYMBOL),
    ])
    return SymbolFrame(symbols, layout)


def noiseless_convolution(ch: IsiChannel, symbols: np.ndarray) -> np.ndarray:
    """sum_k h_k x_{m-k} over m = 0 .. T+L_h-2 with out-of-frame x = GUARD_SYMBOL"""
    pad = np.full(ch.length - 1, GUARD_SYMBOL)
    padded = np.concatenate([pad, np.asarray(symbols, dtype=float), pad])
    return np.convolve(padded, ch.taps, mode="valid")


def apply_channel(ch: IsiChannel, frame: SymbolFrame, N0: float,
                  rng: Optional[np.random.Generator] = None) -> ReceivedFrame:
    """
    Pass a frame through the channel and add white Gaussian noise of variance N0.
    rng should be a per-block substream; None gives the noiseless output.
    """
    if not N0 > 0:
        raise ValueError(f"N0 must be positive, got {N0}")
    clean = noiseless_convolution(ch, frame.symbols)
    noise = rng.standard_normal(len(clean)) * np.sqrt(N0) if rng is not None else 0.0
    return ReceivedFrame(
        samples=clean + noise,
        noise_variance=float(N0),
        layout=frame.layout,
        channel_length=ch.length,
    )
