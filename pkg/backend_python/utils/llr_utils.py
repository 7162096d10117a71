"""LLR helpers shared by the equalizers, the BCJR engines and the EXIT tools."""

import numpy as np

# Every LLR leaving a component is clamped to +-L_MAX
L_MAX = 50.0


def clamp_llr(values):
    """Clamp LLRs to [-L_MAX, L_MAX]; NaN is treated as no information"""
    arr = np.nan_to_num(np.asarray(values, dtype=float), nan=0.0, posinf=L_MAX, neginf=-L_MAX)
    return np.clip(arr, -L_MAX, L_MAX)


def soft_mean(llr):
    """E(x) = tanh(L/2). Works for +-inf and saturates cleanly"""
    return np.tanh(0.5 * np.asarray(llr, dtype=float))


def soft_variance(llr):
    """1 - tanh(L/2)^2 written as 1/cosh^2 so large |L| underflows to 0 instead of cancelling"""
    half = 0.5 * np.abs(np.asarray(llr, dtype=float))
    with np.errstate(over="ignore"):
        return 1.0 / np.cosh(half) ** 2


def log_sigmoid(x):
    """log(1/(1+e^-x)) via logaddexp"""
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


def hard_decision(llr):
    """+1 when L >= 0, else -1"""
    return np.where(np.asarray(llr) >= 0.0, 1.0, -1.0)


def bits_to_llr_sign(bits):
    """Bit 0 maps to symbol +1, bit 1 to -1"""
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)
