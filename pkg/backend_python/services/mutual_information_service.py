"""Mutual information between LLRs and known symbols, and the Gaussian a priori model used for EXIT curves."""

import logging
import math
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from component.trellis_service import LlrFrame, LlrRole
from utils.llr_utils import L_MAX

logger = logging.getLogger(__name__)

_HERMITE_POINTS = 80
_SIGMA_MAX = 60.0
_BISECTION_TOL = 1e-6


@lru_cache(maxsize=1)
def _hermite_rule():
    nodes, weights = hermegauss(_HERMITE_POINTS)
    return nodes, weights / math.sqrt(2.0 * math.pi)


def j_function(sigma: float) -> float:
    """MI of a consistent Gaussian LLR, L ~ N(sigma^2/2, sigma^2) given x = +1"""
    if sigma <= 0.0:
        return 0.0
    nodes, weights = _hermite_rule()
    L = 0.5 * sigma ** 2 + sigma * nodes
    return float(1.0 - weights @ (np.logaddexp(0.0, -L) / math.log(2.0)))


def sigma_for_mi(target: float) -> float:
    """Invert j_function by bisection; 1 maps to +inf"""
    if target <= 0.0:
        return 0.0
    if target >= 1.0:
        return math.inf
    lo, hi = 0.0, _SIGMA_MAX
    while hi - lo > _BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if j_function(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_apriori_for_exit(I_A: float, truth, rng: np.random.Generator) -> LlrFrame:
    """L_a = (sigma^2/2) x + sigma n with J(sigma) = I_A"""
    if not 0.0 <= I_A <= 1.0:
        raise ValueError(f"I_A must lie in [0, 1], got {I_A}")
    x = np.asarray(getattr(truth, "payload", truth), dtype=float)
    sigma = sigma_for_mi(I_A)
    if math.isinf(sigma):
        return LlrFrame(L_MAX * x, LlrRole.A_PRIORI)
    if sigma == 0.0:
        return LlrFrame.zeros(len(x))
    values = 0.5 * sigma ** 2 * x + sigma * rng.standard_normal(len(x))
    return LlrFrame(values, LlrRole.A_PRIORI)


def measure_mi(Le, truth) -> float:
    """1 - mean(log2(1 + exp(-x L))) clamped to [0, 1]"""
    L = np.asarray(getattr(Le, "values", Le), dtype=float)
    x = np.asarray(getattr(truth, "payload", truth), dtype=float)
    if len(L) != len(x):
        raise ValueError(f"LLR frame ({len(L)}) and truth ({len(x)}) are not aligned")
    if len(L) == 0:
        return 0.0
    raw = 1.0 - float(np.mean(np.logaddexp(0.0, -x * L))) / math.log(2.0)
    return min(1.0, max(0.0, raw))
