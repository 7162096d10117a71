"""
SISO MMSE decision feedback and linear equalizers.

Filter design follows the usual turbo MMSE construction: the prior of the
symbol being estimated is suppressed through the (1 - z_n) s s^T term so the
output is extrinsic. The DFE feeds hard decisions back through d = M H^T c
and can map its output either with the conventional Gaussian LLR or with the
error-propagation-aware two-case mapping.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import logsumexp

from component.signal_service import ConvolutionMatrices, FrameLayout, ReceivedFrame, SymbolFrame
from component.trellis_service import LlrFrame, LlrRole
from utils.errors import FilterDesignError
from utils.llr_utils import L_MAX, log_sigmoid, soft_mean, soft_variance
from utils.numericUtils.spd_solver import SpdSystem, solve_spd_with_jitter

logger = logging.getLogger(__name__)

P0_FLOOR = 1e-12
MAX_ENUMERATED_FEEDBACK = 12


class FilterMode(str, Enum):
    TV = "tv"
    TIV = "tiv"


class LlrMode(str, Enum):
    CONVENTIONAL = "conventional"
    PROPOSED = "proposed"
    ENUMERATED = "enumerated"


class Direction(str, Enum):
    FORWARD = "forward"
    REVERSED = "reversed"


@dataclass(frozen=True)
class AprioriFrame:
    """Decoder prior over the whole frame; guards are known +1 (mean 1, z 0)"""
    La: LlrFrame
    mean: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if not (len(self.La) == len(self.mean) == len(self.z)):
            raise ValueError("A priori arrays must have equal lengths")
        if np.any(np.abs(self.mean) > 1.0) or np.any(self.z < 0.0) or np.any(self.z > 1.0):
            raise ValueError("A priori mean must lie in [-1,1] and z in [0,1]")
        if np.max(np.abs(self.z - (1.0 - self.mean ** 2)), initial=0.0) > 1e-9:
            raise ValueError("A priori z is inconsistent with the mean")

    @classmethod
    def from_llr(cls, La: LlrFrame, layout: FrameLayout) -> "AprioriFrame":
        if len(La) != layout.total_len:
            raise ValueError(f"A priori has {len(La)} values, frame has {layout.total_len}")
        known = layout.known_mask()
        values = np.where(known, L_MAX, La.values)
        mean = np.where(known, 1.0, soft_mean(values))
        z = np.where(known, 0.0, soft_variance(values))
        return cls(LlrFrame(values, LlrRole.A_PRIORI), mean, z)

    @classmethod
    def from_payload(cls, La_payload: LlrFrame, layout: FrameLayout) -> "AprioriFrame":
        full = np.zeros(layout.total_len)
        full[layout.payload_slice] = La_payload.values
        return cls.from_llr(LlrFrame(full, LlrRole.A_PRIORI), layout)

    @classmethod
    def uninformative(cls, layout: FrameLayout) -> "AprioriFrame":
        return cls.from_llr(LlrFrame.zeros(layout.total_len), layout)

    def reversed(self) -> "AprioriFrame":
        return AprioriFrame(LlrFrame(self.La.values[::-1].copy(), LlrRole.A_PRIORI),
                            self.mean[::-1].copy(), self.z[::-1].copy())


@dataclass(frozen=True)
class DfeFilters:
    c: np.ndarray
    d: np.ndarray
    p: np.ndarray
    p0: float
    time_index: Optional[int] = None
    # Only set for time-varying taps; TIV noise variance depends on the priors at n
    var_v: Optional[float] = None
    jittered: bool = False

    @property
    def is_invariant(self) -> bool:
        return self.time_index is None


@dataclass(frozen=True)
class DfeFilterBank:
    """Filters for a run of symbol indices, one row per index"""
    indices: np.ndarray
    C: np.ndarray
    D: np.ndarray
    p0: np.ndarray
    var_v: np.ndarray
    jittered: np.ndarray

    def at(self, k: int) -> DfeFilters:
        return DfeFilters(c=self.C[k], d=self.D[k], p=np.empty(0), p0=float(self.p0[k]),
                          time_index=int(self.indices[k]), var_v=float(self.var_v[k]),
                          jittered=bool(self.jittered[k]))


class PosteriorFrame:
    """
    Current-pass a posteriori state of already equalized symbols.

    Known symbols (guards) carry L = +inf so they count as certain.
    """

    def __init__(self, L: np.ndarray, decisions: np.ndarray):
        self.L = np.asarray(L, dtype=float)
        self.decisions = np.asarray(decisions, dtype=float)

    @classmethod
    def initial(cls, layout: FrameLayout) -> "PosteriorFrame":
        known = layout.known_mask()
        return cls(np.where(known, np.inf, 0.0), np.ones(layout.total_len))

    @classmethod
    def from_truth(cls, symbols: np.ndarray) -> "PosteriorFrame":
        return cls(np.asarray(symbols, dtype=float) * np.inf, np.asarray(symbols, dtype=float).copy())

    @property
    def z_acute(self) -> np.ndarray:
        return soft_variance(self.L)

    def causal(self, n: int, L_d: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.L[n - L_d:n], self.decisions[n - L_d:n]

    def update(self, n: int, L_n: float, decision: float) -> None:
        self.L[n] = L_n
        self.decisions[n] = decision

    def as_llr_frame(self) -> LlrFrame:
        return LlrFrame(self.L, LlrRole.POSTERIOR)


@dataclass(frozen=True)
class DfeStepOutput:
    y: float
    p0: float
    var_v: float
    mean_i: float
    var_i: float
    prob_i_zero: float
    phi: float

    def __post_init__(self):
        if not self.var_v > 0:
            raise ValueError(f"var_v must be positive, got {self.var_v}")
        if not 0.0 <= self.prob_i_zero <= 1.0:
            raise ValueError(f"prob_i_zero outside [0,1]: {self.prob_i_zero}")

    @classmethod
    def from_statistics(cls, y: float, p0: float, var_v: float, mean_i: float = 0.0,
                        var_i: float = 0.0, prob_i_zero: float = 1.0) -> "DfeStepOutput":
        """Step output with the error-corrected statistic phi derived from the feedback error moments"""
        return cls(y=y, p0=p0, var_v=var_v, mean_i=mean_i, var_i=var_i, prob_i_zero=prob_i_zero,
                   phi=_phi(y, p0, var_v, mean_i, prob_i_zero))


@dataclass(frozen=True)
class UnbiasedTrace:
    """Per-payload-symbol unbiased outputs Y = y/p0 and the matching error statistics"""
    Y: np.ndarray
    meanI: np.ndarray
    decisions: np.ndarray
    varV_unb: np.ndarray

    def __post_init__(self):
        n = len(self.Y)
        if not (len(self.meanI) == len(self.decisions) == len(self.varV_unb) == n):
            raise ValueError("Trace arrays must have equal lengths")
        if not np.all(np.isfinite(self.Y)):
            raise ValueError("Unbiased outputs must be finite")

    def reversed(self) -> "UnbiasedTrace":
        return UnbiasedTrace(self.Y[::-1].copy(), self.meanI[::-1].copy(),
                             self.decisions[::-1].copy(), self.varV_unb[::-1].copy())


def _check_window(mats: ConvolutionMatrices, n: int, total_len: int) -> None:
    start = n - mats.cursor
    if start < 0 or start + mats.window_len > total_len:
        raise ValueError(f"Symbol window of n={n} leaves the frame; guards are too short")


def _window_sigma(mats: ConvolutionMatrices, z: np.ndarray, n: int) -> np.ndarray:
    start = n - mats.cursor
    sigma = z[start:start + mats.window_len].copy()
    sigma[:mats.n_feedback] = 0.0
    return sigma


def noise_variance_quadratic(c: np.ndarray, mats: ConvolutionMatrices, ap: AprioriFrame,
                             n: int, N0: float) -> float:
    """Var(v_n) = c^T (H Sigma_n H^T - z_n s s^T + N0 I) c"""
    sigma = _window_sigma(mats, ap.z, n)
    q = mats.H.T @ c
    p0 = float(c @ mats.s)
    return float(np.sum(q ** 2 * sigma) - ap.z[n] * p0 ** 2 + N0 * (c @ c))


def _finish_filters(c: np.ndarray, mats: ConvolutionMatrices, time_index: Optional[int],
                    var_v: Optional[float], jittered: bool) -> DfeFilters:
    p0 = float(c @ mats.s)
    if p0 <= P0_FLOOR:
        raise FilterDesignError(p0, time_index)
    return DfeFilters(
        c=c,
        d=mats.feedback_gain(c),
        p=c @ mats.H1,
        p0=p0,
        time_index=time_index,
        var_v=var_v,
        jittered=jittered,
    )


def compute_tv_filters(mats: ConvolutionMatrices, ap: AprioriFrame, n: int, N0: float) -> DfeFilters:
    """c_n = (H Sigma_n H^T + (1 - z_n) s s^T + N0 I)^-1 s"""
    _check_window(mats, n, len(ap.z))
    sigma = _window_sigma(mats, ap.z, n)
    s = mats.s
    A = (mats.H * sigma) @ mats.H.T + (1.0 - ap.z[n]) * np.outer(s, s) + N0 * np.eye(len(s))
    c, jitter = solve_spd_with_jitter(SpdSystem(0.5 * (A + A.T), s, time_index=n))
    p0 = float(c @ s)
    if jitter > 0.0:
        var_v = noise_variance_quadratic(c, mats, ap, n, N0)
    else:
        var_v = p0 * (1.0 - p0)
    return _finish_filters(c, mats, n, var_v, jitter > 0.0)


def compute_tiv_filters(mats: ConvolutionMatrices, N0: float) -> DfeFilters:
    """c = (H Sigma H^T + N0 I)^-1 s with Sigma = Diag(0_fb, 1, ..., 1)"""
    sigma = np.ones(mats.window_len)
    sigma[:mats.n_feedback] = 0.0
    s = mats.s
    A = (mats.H * sigma) @ mats.H.T + N0 * np.eye(len(s))
    c, jitter = solve_spd_with_jitter(SpdSystem(0.5 * (A + A.T), s))
    return _finish_filters(c, mats, None, None, jitter > 0.0)


def _symbol_windows(mats: ConvolutionMatrices, indices: np.ndarray) -> np.ndarray:
    return (indices - mats.cursor)[:, None] + np.arange(mats.window_len)[None, :]


def compute_tv_filter_bank(mats: ConvolutionMatrices, ap: AprioriFrame, indices, N0: float) -> DfeFilterBank:
    """
    compute_tv_filters for many indices at once with one batched Cholesky.
    If the batch does not factor cleanly every index is redone through the
    jittered scalar path.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if len(indices) == 0:
        L = len(mats.s)
        return DfeFilterBank(indices, np.zeros((0, L)), np.zeros((0, mats.n_feedback)),
                             np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool))
    _check_window(mats, int(indices.min()), len(ap.z))
    _check_window(mats, int(indices.max()), len(ap.z))

    H, s = mats.H, mats.s
    sigma = ap.z[_symbol_windows(mats, indices)]
    sigma[:, :mats.n_feedback] = 0.0
    zn = ap.z[indices]
    A = np.einsum("iw,pw,jw->pij", H, sigma, H)
    A += (1.0 - zn)[:, None, None] * np.outer(s, s)[None]
    A += N0 * np.eye(len(s))[None]

    C = None
    try:
        chol = np.linalg.cholesky(A)
        pivots = np.diagonal(chol, axis1=1, axis2=2) ** 2
        floor = 1e-12 * np.trace(A, axis1=1, axis2=2) / len(s)
        if np.all(pivots > floor[:, None]):
            C = np.stack([cho_solve((factor, True), s, check_finite=False) for factor in chol])
    except np.linalg.LinAlgError:
        C = None

    if C is not None:
        p0 = C @ s
        if np.any(p0 <= P0_FLOOR):
            k = int(np.argmin(p0))
            raise FilterDesignError(float(p0[k]), int(indices[k]))
        D = (C @ H)[:, :mats.n_feedback]
        return DfeFilterBank(indices, C, D, p0, p0 * (1.0 - p0), np.zeros(len(indices), dtype=bool))

    logger.warning("⚠️ Batched filter design did not factor, falling back to per-symbol solves")
    rows = [compute_tv_filters(mats, ap, int(n), N0) for n in indices]
    return DfeFilterBank(
        indices=indices,
        C=np.stack([f.c for f in rows]),
        D=np.stack([f.d for f in rows]) if mats.n_feedback else np.zeros((len(rows), 0)),
        p0=np.array([f.p0 for f in rows]),
        var_v=np.array([f.var_v for f in rows]),
        jittered=np.array([f.jittered for f in rows]),
    )


def compute_tiv_filter_bank(mats: ConvolutionMatrices, ap: AprioriFrame, indices, N0: float) -> DfeFilterBank:
    """One TIV filter broadcast over the indices, with the prior-dependent Var(v_n) per index"""
    indices = np.asarray(indices, dtype=np.int64)
    f = compute_tiv_filters(mats, N0)
    P = len(indices)
    if P:
        _check_window(mats, int(indices.min()), len(ap.z))
        _check_window(mats, int(indices.max()), len(ap.z))
    sigma = ap.z[_symbol_windows(mats, indices)] if P else np.zeros((0, mats.window_len))
    sigma[:, :mats.n_feedback] = 0.0
    q2 = (mats.H.T @ f.c) ** 2
    var_v = sigma @ q2 - ap.z[indices] * f.p0 ** 2 + N0 * (f.c @ f.c)
    return DfeFilterBank(
        indices=indices,
        C=np.broadcast_to(f.c, (P, len(f.c))),
        D=np.broadcast_to(f.d, (P, len(f.d))),
        p0=np.full(P, f.p0),
        var_v=var_v,
        jittered=np.full(P, f.jittered),
    )


def feedforward_outputs(bank: DfeFilterBank, mats: ConvolutionMatrices, rx: ReceivedFrame,
                        ap: AprioriFrame) -> np.ndarray:
    """
    c_n^T (r_n - H xbar_n + E(x_n) s) with the fed-back positions left out;
    the DFE subtracts d_n^T xhat later, once the decisions exist.
    """
    idx = bank.indices
    sample_idx = (idx + mats.sample_offset)[:, None] + np.arange(mats.L_c + 1)[None, :]
    R = rx.samples[sample_idx]
    E = ap.mean[_symbol_windows(mats, idx)]
    E[:, :mats.n_feedback] = 0.0
    E[:, mats.cursor] = 0.0
    return np.einsum("pi,pi->p", bank.C, R - E @ mats.H.T)


def error_prop_stats(d: np.ndarray, causal_llr: np.ndarray, causal_decisions: np.ndarray) -> Tuple[float, float, float]:
    """
    Statistics of the feedback error term i_n = d^T (x^c - xhat^c):
    mean, variance and Pr(i_n = 0), the last accumulated in the log domain.
    """
    d = np.asarray(d, dtype=float)
    if len(d) == 0:
        return 0.0, 0.0, 1.0
    L = np.asarray(causal_llr, dtype=float)
    mean_i = float(d @ (soft_mean(L) - causal_decisions))
    var_i = float((d ** 2) @ soft_variance(L))
    log_pz = float(np.sum(log_sigmoid(np.abs(L))))
    return mean_i, var_i, math.exp(log_pz)


def _phi(y: float, p0: float, var_v: float, mean_i: float, prob_i_zero: float) -> float:
    prob_nonzero = 1.0 - prob_i_zero
    correction = mean_i / prob_nonzero if prob_nonzero > 0.0 else 0.0
    return p0 * (y - correction) / var_v


def _clamp(x: float) -> float:
    return min(L_MAX, max(-L_MAX, x))


def _log_sigmoid(x: float) -> float:
    return -np.logaddexp(0.0, -x)


def conventional_llr(out: DfeStepOutput) -> float:
    """L_e = 2 p0 y / Var(v)"""
    return _clamp(2.0 * out.p0 * out.y / out.var_v)


def proposed_llr(out: DfeStepOutput) -> float:
    """
    Two-case mapping: if the fed-back decisions are all right the output is
    Gaussian around p0 x_n; otherwise the error-corrected statistic phi goes
    through the saturating map 2 phi / (1 + |phi|). The two conditional LLRs
    are mixed with weights Pr(i=0) and Pr(i!=0).
    """
    le_clean = 2.0 * out.p0 * out.y / out.var_v
    if out.prob_i_zero >= 1.0:
        return _clamp(le_clean)
    le_err = 2.0 * out.phi / (1.0 + abs(out.phi))
    if out.prob_i_zero <= 0.0:
        return _clamp(le_err)
    log_w0 = math.log(out.prob_i_zero)
    log_w1 = math.log1p(-out.prob_i_zero)
    num = np.logaddexp(log_w0 + _log_sigmoid(le_clean), log_w1 + _log_sigmoid(le_err))
    den = np.logaddexp(log_w0 + _log_sigmoid(-le_clean), log_w1 + _log_sigmoid(-le_err))
    return _clamp(float(num - den))


def enumerated_llr(out: DfeStepOutput, d: np.ndarray, causal_llr: np.ndarray,
                   causal_decisions: np.ndarray) -> float:
    """
    Reference LLR summing over all 2^L_d feedback error patterns, each pattern
    weighted by the product of the causal decision reliabilities.
    """
    d = np.asarray(d, dtype=float)
    L_d = len(d)
    if L_d > MAX_ENUMERATED_FEEDBACK:
        raise ValueError(f"Cannot enumerate 2^{L_d} error patterns (max L_d={MAX_ENUMERATED_FEEDBACK})")
    xhat = np.asarray(causal_decisions, dtype=float)
    reliability = xhat * np.asarray(causal_llr, dtype=float)

    wrong = ((np.arange(1 << L_d)[:, None] >> np.arange(L_d)[None, :]) & 1).astype(bool)
    log_w = np.where(wrong, log_sigmoid(-reliability)[None, :], log_sigmoid(reliability)[None, :]).sum(axis=1)
    errors = np.where(wrong, -2.0 * xhat[None, :], 0.0)
    le = 2.0 * out.p0 * (out.y - errors @ d) / out.var_v

    num = logsumexp(log_w + log_sigmoid(le))
    den = logsumexp(log_w + log_sigmoid(-le))
    return _clamp(float(num - den))


def slice_decision(Le: float, La: float) -> float:
    """+1 iff Le + La >= 0"""
    return 1.0 if Le + La >= 0.0 else -1.0


def _step_output(y: float, d: np.ndarray, p0: float, var_v: float,
                 history: np.ndarray, causal_llr: np.ndarray) -> DfeStepOutput:
    mean_i, var_i, prob_i_zero = error_prop_stats(d, causal_llr, history)
    return DfeStepOutput.from_statistics(y, p0, var_v, mean_i, var_i, prob_i_zero)


def dfe_equalize_step(f: DfeFilters, mats: ConvolutionMatrices, rx: ReceivedFrame,
                      history: np.ndarray, ap: AprioriFrame, n: int,
                      posterior: Optional[PosteriorFrame] = None) -> DfeStepOutput:
    """
    y_n = c^T (r_n - H xbar_n + E(x_n) s) for one symbol, where xbar_n holds
    the fed-back decisions followed by the prior means. history is the L_d
    decisions x_{n-L_d} .. x_{n-1}; posterior (current pass) drives the
    error statistics and defaults to trusting history completely.
    """
    _check_window(mats, n, len(ap.z))
    history = np.asarray(history, dtype=float)
    if len(history) != mats.n_feedback:
        raise ValueError(f"history needs {mats.n_feedback} decisions, got {len(history)}")
    start = n + mats.sample_offset
    r = rx.samples[start:start + mats.L_c + 1]
    xbar = ap.mean[n - mats.cursor:n - mats.cursor + mats.window_len].copy()
    xbar[:mats.n_feedback] = history
    y = float(f.c @ (r - mats.H @ xbar + ap.mean[n] * mats.s))

    var_v = f.var_v if f.var_v is not None else noise_variance_quadratic(f.c, mats, ap, n, rx.noise_variance)
    if posterior is None:
        causal_llr = history * np.inf
    else:
        causal_llr, _ = posterior.causal(n, mats.n_feedback)
    return _step_output(y, f.d, f.p0, var_v, history, causal_llr)


def _filter_bank(filter_mode: FilterMode, mats: ConvolutionMatrices, ap: AprioriFrame,
                 indices: np.ndarray, N0: float) -> DfeFilterBank:
    if FilterMode(filter_mode) is FilterMode.TV:
        return compute_tv_filter_bank(mats, ap, indices, N0)
    return compute_tiv_filter_bank(mats, ap, indices, N0)


def _check_guards(mats: ConvolutionMatrices, layout: FrameLayout) -> None:
    need_pre, need_suf = mats.min_guards()
    if layout.guard_prefix < need_pre or layout.guard_suffix < need_suf:
        raise ValueError(
            f"Guards ({layout.guard_prefix}, {layout.guard_suffix}) shorter than the "
            f"equalizer windows need ({need_pre}, {need_suf})"
        )


def le_run_block(filter_mode: FilterMode, mats: ConvolutionMatrices, rx: ReceivedFrame,
                 ap: AprioriFrame) -> LlrFrame:
    """SISO MMSE linear equalizer over the payload; extrinsic LLR = 2 p0 y / Var(v)"""
    if mats.n_feedback:
        raise ValueError("le_run_block needs LE matrices (no feedback taps)")
    _check_guards(mats, rx.layout)
    idx = np.arange(rx.layout.total_len)[rx.layout.payload_slice]
    bank = _filter_bank(filter_mode, mats, ap, idx, rx.noise_variance)
    y = feedforward_outputs(bank, mats, rx, ap)
    return LlrFrame(2.0 * bank.p0 * y / bank.var_v, LlrRole.EXTRINSIC)


def dfe_run_block(filter_mode: FilterMode, llr_mode: LlrMode, direction: Direction,
                  mats: ConvolutionMatrices, rx: ReceivedFrame, ap: AprioriFrame,
                  ideal_feedback: Optional[SymbolFrame] = None) -> Tuple[LlrFrame, UnbiasedTrace]:
    """
    One left-to-right DFE pass over the payload.

    For Direction.REVERSED the frame, the prior and the truth are reversed
    first (mats must then describe the time-reversed channel) and the outputs
    are flipped back, so both directions index payload symbols the same way.
    ideal_feedback, when given, forces the true symbols into the feedback
    history and marks them certain.
    """
    llr_mode = LlrMode(llr_mode)
    direction = Direction(direction)
    if direction is Direction.REVERSED:
        rx, ap = rx.reversed(), ap.reversed()
        ideal_feedback = ideal_feedback.reversed() if ideal_feedback is not None else None

    layout = rx.layout
    _check_guards(mats, layout)
    idx = np.arange(layout.total_len)[layout.payload_slice]
    bank = _filter_bank(filter_mode, mats, ap, idx, rx.noise_variance)
    ff = feedforward_outputs(bank, mats, rx, ap)
    if np.any(bank.jittered):
        logger.debug(f"🔧 {int(np.sum(bank.jittered))} jittered filter solves in this block")

    if ideal_feedback is not None:
        posterior = PosteriorFrame.from_truth(ideal_feedback.symbols)
    else:
        posterior = PosteriorFrame.initial(layout)

    La = ap.La.values
    L_d = mats.n_feedback
    P = len(idx)
    Le = np.zeros(P)
    Y = np.zeros(P)
    meanI = np.zeros(P)
    decisions = np.zeros(P)

    for k, n in enumerate(idx):
        causal_llr, history = posterior.causal(n, L_d)
        d = bank.D[k]
        y = ff[k] - float(d @ history) if L_d else ff[k]
        out = _step_output(y, d, float(bank.p0[k]), float(bank.var_v[k]), history, causal_llr)
        if llr_mode is LlrMode.CONVENTIONAL:
            le = conventional_llr(out)
        elif llr_mode is LlrMode.PROPOSED:
            le = proposed_llr(out)
        else:
            le = enumerated_llr(out, d, causal_llr, history)

        Le[k] = le
        Y[k] = out.y / out.p0
        meanI[k] = out.mean_i / out.p0
        if ideal_feedback is None:
            posterior.update(n, La[n] + le, slice_decision(le, La[n]))
        decisions[k] = posterior.decisions[n]

    trace = UnbiasedTrace(Y=Y, meanI=meanI, decisions=decisions, varV_unb=bank.var_v / bank.p0 ** 2)
    extrinsic = LlrFrame(Le, LlrRole.EXTRINSIC)
    if direction is Direction.REVERSED:
        extrinsic = LlrFrame(Le[::-1].copy(), LlrRole.EXTRINSIC)
        trace = trace.reversed()
    return extrinsic, trace


class LinearEqualizer:
    """SISO MMSE-LE (TV or TIV) with a symmetric window of n_taps"""

    def __init__(self, mats: ConvolutionMatrices, filter_mode: FilterMode):
        self.mats = mats
        self.filter_mode = FilterMode(filter_mode)
        logger.debug(f"🔧 LinearEqualizer initialized: {self.filter_mode.value}, {mats.L_c + 1} taps")

    def equalize(self, rx: ReceivedFrame, apriori_payload: LlrFrame, **_) -> LlrFrame:
        ap = AprioriFrame.from_payload(apriori_payload, rx.layout)
        return le_run_block(self.filter_mode, self.mats, rx, ap)

    def diagnostics(self) -> dict:
        return {}


class DfeEqualizer:
    """Forward SISO MMSE-DFE with conventional or error-propagation-aware LLRs"""

    def __init__(self, mats: ConvolutionMatrices, filter_mode: FilterMode, llr_mode: LlrMode):
        self.mats = mats
        self.filter_mode = FilterMode(filter_mode)
        self.llr_mode = LlrMode(llr_mode)
        logger.debug(
            f"🔧 DfeEqualizer initialized: {self.filter_mode.value}/{self.llr_mode.value}, "
            f"L_c+1={mats.L_c + 1}, L_d={mats.L_d}"
        )

    def equalize(self, rx: ReceivedFrame, apriori_payload: LlrFrame,
                 truth: Optional[SymbolFrame] = None, ideal_feedback: bool = False) -> LlrFrame:
        ap = AprioriFrame.from_payload(apriori_payload, rx.layout)
        Le, _ = dfe_run_block(self.filter_mode, self.llr_mode, Direction.FORWARD, self.mats, rx, ap,
                              ideal_feedback=truth if ideal_feedback else None)
        return Le

    def diagnostics(self) -> dict:
        return {}
