"""
Bidirectional DFE: a forward and a time-reversed DFE pass over the same block,
whose extrinsic LLRs are merged according to the correlation of the two
residual noise streams.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from component.dfe_service import (
    AprioriFrame,
    Direction,
    FilterMode,
    LlrMode,
    UnbiasedTrace,
    compute_tiv_filters,
    compute_tv_filters,
    dfe_run_block,
    noise_variance_quadratic,
)
from component.signal_service import ConvolutionMatrices, ReceivedFrame, SymbolFrame
from component.trellis_service import LlrFrame, LlrRole
from utils.llr_utils import clamp_llr

logger = logging.getLogger(__name__)

RHO_EPS = 1e-6
RHO_FLOOR = -1.0 + RHO_EPS


class Combiner(str, Enum):
    MEAN = "mean"
    EQUAL_VARIANCE = "equal_variance"
    WHITENED = "whitened"


class RhoMode(str, Enum):
    TV = "tv"
    TIV = "tiv"
    NO_APRIORI = "no_apriori"
    PERFECT_TV = "perfect_tv"
    PERFECT_TIV = "perfect_tiv"


@dataclass(frozen=True)
class CorrelationEstimate:
    rho_hat: float
    sample_count: int
    agreement_fraction: float
    valid: bool = True

    @property
    def rho(self) -> float:
        """Value the combiner should use; invalid estimates fall back to 0"""
        return self.rho_hat if self.valid else 0.0


@dataclass(frozen=True)
class NoiseCorrelationModel:
    """
    2x2 residual covariance R = [[Nf, rho*sqrt(Nf Nb)], [rho*sqrt(Nf Nb), Nb]]
    and its closed-form eigendecomposition. Rows of A are the unit
    eigenvectors, so A R A^T = diag(lambda1, lambda2).
    """
    Nf: float
    Nb: float
    rho: float

    def __post_init__(self):
        if self.Nf <= 0 or self.Nb <= 0:
            raise ValueError("Branch noise variances must be positive")
        if abs(self.rho) > 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")

    @property
    def covariance(self) -> np.ndarray:
        off = self.rho * math.sqrt(self.Nf * self.Nb)
        return np.array([[self.Nf, off], [off, self.Nb]])

    @property
    def eigen(self) -> Tuple[float, float, np.ndarray]:
        """(lambda1, lambda2, A) with lambda1 >= lambda2 >= 0"""
        off = self.rho * math.sqrt(self.Nf * self.Nb)
        half_trace = 0.5 * (self.Nf + self.Nb)
        radius = math.sqrt(0.25 * (self.Nf - self.Nb) ** 2 + off ** 2)
        lam1, lam2 = half_trace + radius, max(half_trace - radius, 0.0)
        if abs(off) <= 1e-15 * half_trace:
            A = np.eye(2) if self.Nf >= self.Nb else np.array([[0.0, 1.0], [1.0, 0.0]])
            return lam1, lam2, A
        g1 = np.array([off, lam1 - self.Nf])
        g1 /= np.linalg.norm(g1)
        g2 = np.array([-g1[1], g1[0]])
        return lam1, lam2, np.vstack([g1, g2])

    def whiten(self, Yf, Yb) -> Tuple[np.ndarray, np.ndarray]:
        """Rotate the two unbiased streams onto the eigenvectors"""
        _, _, A = self.eigen
        U = A @ np.vstack([np.asarray(Yf, dtype=float), np.asarray(Yb, dtype=float)])
        return U[0], U[1]

    def llr_from_outputs(self, Yf, Yb) -> np.ndarray:
        """
        Sum of the per-branch Gaussian LLRs of the whitened streams,
        2 (a_i1 + a_i2) U_i / lambda_i. A zero-variance branch carries no
        symbol gain and is skipped.
        """
        lam1, lam2, A = self.eigen
        U1, U2 = self.whiten(Yf, Yb)
        total = 2.0 * A[0].sum() * U1 / lam1
        if lam2 > 1e-12 * lam1:
            total = total + 2.0 * A[1].sum() * U2 / lam2
        return clamp_llr(total)


def estimate_rho(fwd: UnbiasedTrace, bwd: UnbiasedTrace, window: Optional[int] = None) -> CorrelationEstimate:
    """
    Time-averaged correlation of the residuals Y - Xhat - E(I) of the two
    passes, using only symbols where both passes decided the same way.
    window limits the average to the first `window` agreeing symbols.
    """
    if len(fwd.Y) != len(bwd.Y):
        raise ValueError("Forward and backward traces must be aligned")
    agree = fwd.decisions == bwd.decisions
    n_total = len(fwd.Y)
    fraction = float(np.mean(agree)) if n_total else 0.0
    idx = np.nonzero(agree)[0]
    if window is not None:
        idx = idx[:window]
    if len(idx) == 0:
        logger.warning("⚠️ No agreeing decisions between passes, rho falls back to 0")
        return CorrelationEstimate(0.0, 0, fraction, valid=False)

    xhat = fwd.decisions[idx]
    ef = fwd.Y[idx] - xhat - fwd.meanI[idx]
    eb = bwd.Y[idx] - xhat - bwd.meanI[idx]
    denom = math.sqrt(float(ef @ ef)) * math.sqrt(float(eb @ eb))
    if denom <= 0.0:
        logger.warning("⚠️ Zero residual energy, rho falls back to 0")
        return CorrelationEstimate(0.0, len(idx), fraction, valid=False)
    rho = float(ef @ eb) / denom
    return CorrelationEstimate(float(np.clip(rho, RHO_FLOOR, 1.0)), len(idx), fraction)


def combine_mean(Lef, Leb) -> np.ndarray:
    return clamp_llr(0.5 * (np.asarray(Lef, dtype=float) + np.asarray(Leb, dtype=float)))


def combine_whitened(Lef, Leb, model: NoiseCorrelationModel) -> np.ndarray:
    """
    Whitening combiner written in terms of the branch LLRs. At rho = +1 the
    covariance is singular and the combiner reduces to the mean.
    """
    Lef = np.asarray(Lef, dtype=float)
    Leb = np.asarray(Leb, dtype=float)
    rho = model.rho
    if rho >= 1.0 - 1e-12:
        return combine_mean(Lef, Leb)
    det = (1.0 - rho) * (1.0 + rho)
    wf = (1.0 - rho * math.sqrt(model.Nf / model.Nb)) / det
    wb = (1.0 - rho * math.sqrt(model.Nb / model.Nf)) / det
    return clamp_llr(wf * Lef + wb * Leb)


def combine_equal_variance(Lef, Leb, rho: float) -> np.ndarray:
    """(Lef + Leb) / (1 + rho)"""
    if rho < RHO_FLOOR - 1e-15 or rho > 1.0:
        raise ValueError(f"rho must lie in [-1+{RHO_EPS:g}, 1], got {rho}")
    return clamp_llr((np.asarray(Lef, dtype=float) + np.asarray(Leb, dtype=float)) / (1.0 + rho))


def _overlap_kernel(c: np.ndarray, c_rev: np.ndarray, channel_length: int) -> float:
    """sum_j c_j c~_{L_h-1-j}: both filters see the same noise sample when j + k = L_h - 1"""
    total = 0.0
    for j in range(len(c)):
        k = channel_length - 1 - j
        if 0 <= k < len(c_rev):
            total += c[j] * c_rev[k]
    return total


def analytic_rho(mode: RhoMode, mats_fwd: ConvolutionMatrices, mats_bwd: ConvolutionMatrices,
                 N0: float, ap: Optional[AprioriFrame] = None, n: Optional[int] = None) -> float:
    """
    Closed-form noise correlation between the forward and the time-reversed DFE.

    tv / tiv need the frame prior ap and the forward symbol index n; the
    backward filters are designed at the mirrored index of the reversed frame.
    no_apriori and perfect_tiv use the time-invariant taps; perfect_tv is 1.
    """
    mode = RhoMode(mode)
    if mats_fwd.L_c != mats_bwd.L_c:
        raise ValueError("Forward and backward filters must have the same length")
    if mode is RhoMode.PERFECT_TV:
        return 1.0
    if mats_fwd.channel is None:
        raise ValueError("analytic_rho needs matrices built from a channel")
    L_h = mats_fwd.channel.length

    if mode in (RhoMode.TV, RhoMode.TIV):
        if ap is None or n is None:
            raise ValueError(f"analytic_rho({mode.value}) needs the prior frame and a symbol index")
        ap_rev = ap.reversed()
        n_rev = len(ap.z) - 1 - n
        if mode is RhoMode.TV:
            f = compute_tv_filters(mats_fwd, ap, n, N0)
            fb = compute_tv_filters(mats_bwd, ap_rev, n_rev, N0)
            # p0 (1 - p0) unless a jittered solve switched to the quadratic form
            var_f, var_b = f.var_v, fb.var_v
        else:
            f = compute_tiv_filters(mats_fwd, N0)
            fb = compute_tiv_filters(mats_bwd, N0)
            var_f = noise_variance_quadratic(f.c, mats_fwd, ap, n, N0)
            var_b = noise_variance_quadratic(fb.c, mats_bwd, ap_rev, n_rev, N0)
        return N0 * _overlap_kernel(f.c, fb.c, L_h) / math.sqrt(var_f * var_b)

    f = compute_tiv_filters(mats_fwd, N0)
    fb = compute_tiv_filters(mats_bwd, N0)
    kernel = _overlap_kernel(f.c, fb.c, L_h)
    if mode is RhoMode.NO_APRIORI:
        return N0 * kernel / math.sqrt(f.p0 * (1.0 - f.p0) * fb.p0 * (1.0 - fb.p0))
    return kernel / math.sqrt(float(f.c @ f.c) * float(fb.c @ fb.c))


@dataclass(frozen=True)
class BiDfeBlockResult:
    extrinsic: LlrFrame
    forward: LlrFrame
    backward: LlrFrame
    estimate: CorrelationEstimate
    trace_fwd: UnbiasedTrace
    trace_bwd: UnbiasedTrace


def bidfe_run_block(filter_mode: FilterMode, llr_mode: LlrMode, mats_fwd: ConvolutionMatrices,
                    mats_bwd: ConvolutionMatrices, rx: ReceivedFrame, ap: AprioriFrame,
                    combiner: Combiner = Combiner.EQUAL_VARIANCE, rho_window: Optional[int] = None,
                    ideal_feedback: Optional[SymbolFrame] = None) -> BiDfeBlockResult:
    """
    Forward DFE on rx, time-reversed DFE on the reversed frame with the
    reversed channel, then combine. The reversed pass comes back already
    re-reversed, so both traces index the same payload symbols.
    """
    combiner = Combiner(combiner)
    Lef, trace_f = dfe_run_block(filter_mode, llr_mode, Direction.FORWARD, mats_fwd, rx, ap, ideal_feedback)
    Leb, trace_b = dfe_run_block(filter_mode, llr_mode, Direction.REVERSED, mats_bwd, rx, ap, ideal_feedback)
    estimate = estimate_rho(trace_f, trace_b, window=rho_window)

    if combiner is Combiner.MEAN:
        combined = combine_mean(Lef.values, Leb.values)
    elif combiner is Combiner.EQUAL_VARIANCE:
        combined = combine_equal_variance(Lef.values, Leb.values, estimate.rho)
    else:
        model = NoiseCorrelationModel(float(np.mean(trace_f.varV_unb)), float(np.mean(trace_b.varV_unb)),
                                      estimate.rho)
        combined = combine_whitened(Lef.values, Leb.values, model)

    return BiDfeBlockResult(
        extrinsic=LlrFrame(combined, LlrRole.EXTRINSIC),
        forward=Lef,
        backward=Leb,
        estimate=estimate,
        trace_fwd=trace_f,
        trace_bwd=trace_b,
    )


class BiDfeEqualizer:
    """Forward plus time-reversed DFE with per-block rho estimation"""

    def __init__(self, mats_fwd: ConvolutionMatrices, mats_bwd: ConvolutionMatrices,
                 filter_mode: FilterMode, llr_mode: LlrMode,
                 combiner: Combiner = Combiner.EQUAL_VARIANCE, rho_window: Optional[int] = None):
        self.mats_fwd = mats_fwd
        self.mats_bwd = mats_bwd
        self.filter_mode = FilterMode(filter_mode)
        self.llr_mode = LlrMode(llr_mode)
        self.combiner = Combiner(combiner)
        self.rho_window = rho_window
        self.last_estimate: Optional[CorrelationEstimate] = None
        self.fallback_count = 0
        logger.debug(
            f"🔧 BiDfeEqualizer initialized: {self.filter_mode.value}/{self.llr_mode.value}, "
            f"combiner={self.combiner.value}"
        )

    def equalize(self, rx: ReceivedFrame, apriori_payload: LlrFrame,
                 truth: Optional[SymbolFrame] = None, ideal_feedback: bool = False) -> LlrFrame:
        ap = AprioriFrame.from_payload(apriori_payload, rx.layout)
        result = bidfe_run_block(self.filter_mode, self.llr_mode, self.mats_fwd, self.mats_bwd, rx, ap,
                                 combiner=self.combiner, rho_window=self.rho_window,
                                 ideal_feedback=truth if ideal_feedback else None)
        self.last_estimate = result.estimate
        if not result.estimate.valid:
            self.fallback_count += 1
        return result.extrinsic

    def diagnostics(self) -> dict:
        if self.last_estimate is None:
            return {}
        return {
            "rho_hat": self.last_estimate.rho_hat,
            "rho_valid": self.last_estimate.valid,
            "agreement_fraction": self.last_estimate.agreement_fraction,
        }
