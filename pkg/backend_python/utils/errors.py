"""
Exception hierarchy for the turbo equalization engines.

Plain argument problems (length mismatch, N0 <= 0, bad grid sizes) raise
ValueError. Numerical breakdowns raise one of the classes below so callers
can tell "bad input" apart from "the math gave out".
"""

from typing import Optional


class TurboEqualizationError(Exception):
    """Base class for numerical failures inside the simulator"""


class SolveError(TurboEqualizationError):
    """A filter-design linear system stayed non positive definite after jitter"""

    def __init__(self, message: str, time_index: Optional[int] = None):
        self.time_index = time_index
        where = "invariant" if time_index is None else f"n={time_index}"
        super().__init__(f"{message} ({where})")


class SpectralFactorizationError(TurboEqualizationError):
    """The folded spectrum R_ss was not strictly positive on the FFT grid"""


class StateCapError(TurboEqualizationError):
    """Channel trellis would need more states than the configured cap"""

    def __init__(self, states: int, cap: int):
        self.states = states
        self.cap = cap
        super().__init__(f"Channel trellis needs {states} states, cap is {cap}")


class FilterDesignError(TurboEqualizationError):
    """Designed filter has a non-positive desired-symbol gain p0"""

    def __init__(self, p0: float, time_index: Optional[int] = None):
        self.p0 = p0
        self.time_index = time_index
        where = "invariant" if time_index is None else f"n={time_index}"
        super().__init__(f"Filter bias p0={p0:.3e} is not positive ({where})")


class BlockProcessingError(TurboEqualizationError):
    """Wraps a component failure with the Monte-Carlo coordinates it happened at"""

    def __init__(self, cause: Exception, snr_db: float, block: int, iteration: Optional[int] = None):
        self.cause = cause
        self.snr_db = snr_db
        self.block = block
        self.iteration = iteration
        it = "" if iteration is None else f", iteration {iteration}"
        super().__init__(f"Block {block} at {snr_db:g} dB{it} failed: {cause}")
