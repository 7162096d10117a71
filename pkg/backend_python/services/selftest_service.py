"""
Oracle checks behind the `selftest` subcommand.

Every check compares an engine against an independent slow evaluation
(exhaustive enumeration, plain elimination, finite differences or a closed
form) and reports pass/fail with the worst deviation it saw.
"""

import itertools
import logging
import math
import time
from typing import Callable, Dict, List, Tuple

import numpy as np
import pandas as pd

from component.analysis_service import combiner_sensitivity, ideal_snr_report, noise_from_snr_db
from component.bidfe_service import (
    Combiner,
    NoiseCorrelationModel,
    RhoMode,
    analytic_rho,
    combine_equal_variance,
    combine_whitened,
)
from component.dfe_service import (
    AprioriFrame,
    DfeStepOutput,
    compute_tv_filters,
    conventional_llr,
    enumerated_llr,
    error_prop_stats,
    proposed_llr,
)
from component.signal_service import (
    FrameLayout,
    IsiChannel,
    ReceivedFrame,
    build_convolution_matrices,
    noiseless_convolution,
    time_reverse_channel,
)
from component.trellis_service import LlrFrame, LlrRole, RscCode, bcjr_decode, bcjr_equalize, rsc_encode
from utils.numericUtils.spd_solver import SpdSystem, solve_spd

logger = logging.getLogger(__name__)

SELFTEST_COLUMNS = ["check", "passed", "detail", "seconds"]

ENUMERATED_INSTANCES = 10_000
COMBINER_TRIPLES = 100_000
QUICK_ENUMERATED_INSTANCES = 2_000
QUICK_COMBINER_TRIPLES = 10_000
QUICK_CHECKS = ("enumerated_llr_vs_brute_force", "enumerated_vs_proposed_spread", "combiner_identities")


def naive_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting, no LAPACK"""
    n = len(b)
    M = np.hstack([np.array(A, dtype=float), np.array(b, dtype=float)[:, None]])
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(M[col:, col])))
        M[[col, pivot]] = M[[pivot, col]]
        for row in range(col + 1, n):
            M[row] -= M[row, col] / M[col, col] * M[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (M[row, n] - M[row, row + 1:n] @ x[row + 1:]) / M[row, row]
    return x


def brute_force_decoder_app(coded_llr: np.ndarray, message_len: int) -> np.ndarray:
    """Message-bit posterior LLRs by summing over every terminated codeword"""
    log_num = np.full(message_len, -np.inf)
    log_den = np.full(message_len, -np.inf)
    for msg in itertools.product((0, 1), repeat=message_len):
        coded = rsc_encode(np.array(msg))
        weight = 0.5 * float(np.sum(coded_llr * (1.0 - 2.0 * coded)))
        for k, bit in enumerate(msg):
            if bit == 0:
                log_num[k] = np.logaddexp(log_num[k], weight)
            else:
                log_den[k] = np.logaddexp(log_den[k], weight)
    return log_num - log_den


def brute_force_channel_app(ch: IsiChannel, samples: np.ndarray, N0: float, apriori: np.ndarray) -> np.ndarray:
    """Symbol posterior LLRs over every input sequence of an unguarded frame"""
    T = len(apriori)
    log_num = np.full(T, -np.inf)
    log_den = np.full(T, -np.inf)
    for seq in itertools.product((1.0, -1.0), repeat=T):
        x = np.array(seq)
        clean = noiseless_convolution(ch, x)
        weight = -float(np.sum((samples - clean) ** 2)) / (2.0 * N0) + 0.5 * float(apriori @ x)
        for k in range(T):
            if x[k] > 0:
                log_num[k] = np.logaddexp(log_num[k], weight)
            else:
                log_den[k] = np.logaddexp(log_den[k], weight)
    return log_num - log_den


def brute_force_enumerated_llr(y: float, p0: float, var_v: float, d: np.ndarray,
                               causal_llr: np.ndarray, decisions: np.ndarray) -> float:
    """Same quantity as enumerated_llr, written as a direct probability sum"""
    num = den = 0.0
    for pattern in itertools.product((False, True), repeat=len(d)):
        weight, shift = 1.0, 0.0
        for wrong, L, xhat, dj in zip(pattern, causal_llr, decisions, d):
            p_right = 1.0 / (1.0 + math.exp(-xhat * L))
            weight *= (1.0 - p_right) if wrong else p_right
            if wrong:
                shift += dj * (-2.0 * xhat)
        le = 2.0 * p0 * (y - shift) / var_v
        num += weight / (1.0 + math.exp(-le))
        den += weight / (1.0 + math.exp(le))
    return math.log(num) - math.log(den)


def _check_spd(rng: np.random.Generator) -> Tuple[bool, str]:
    worst = 0.0
    for n in range(1, 17):
        B = rng.standard_normal((n, n))
        A = B @ B.T + n * np.eye(n)
        b = rng.standard_normal(n)
        worst = max(worst, float(np.max(np.abs(solve_spd(SpdSystem(A, b)) - naive_solve(A, b)))))
    return worst < 1e-9, f"max |x - x_naive| = {worst:.2e}"


def _check_matched_filter() -> Tuple[bool, str]:
    worst = 0.0
    for name, (L_c, L_d) in (("h1", (16, 4)), ("h2", (20, 6))):
        ch = IsiChannel.from_spec(name)
        N0 = 0.1
        mats = build_convolution_matrices(ch, L_c, L_d)
        guard = mats.window_len
        layout = FrameLayout(guard, guard, 8)
        x = np.where(np.arange(layout.total_len) % 3 == 0, -1.0, 1.0)
        ap = AprioriFrame.from_llr(LlrFrame(50.0 * x, LlrRole.A_PRIORI), layout)
        f = compute_tv_filters(mats, ap, guard + 3, N0)
        expected = np.zeros(L_c + 1)
        expected[:ch.length] = ch.taps / (N0 + ch.energy)
        worst = max(worst, float(np.max(np.abs(f.c - expected))))
    return worst < 1e-9, f"max tap deviation {worst:.2e}"


def _check_analytic_rho() -> Tuple[bool, str]:
    ch = IsiChannel.from_spec("h1")
    N0 = noise_from_snr_db(ch, 6.0)
    fwd = build_convolution_matrices(ch, 16, 4)
    bwd = build_convolution_matrices(time_reverse_channel(ch), 16, 4)
    perfect = analytic_rho(RhoMode.PERFECT_TV, fwd, bwd, N0)
    no_prior = analytic_rho(RhoMode.NO_APRIORI, fwd, bwd, N0)
    rho_inf = ideal_snr_report(ch, 1.0, N0).rho_inf
    gap = abs(no_prior - rho_inf)
    return perfect == 1.0 and gap < 0.01, f"perfect_tv={perfect}, |no_apriori - rho_inf| = {gap:.4f}"


def _check_decoder(rng: np.random.Generator) -> Tuple[bool, str]:
    code = RscCode()
    K = 6
    worst = 0.0
    for _ in range(5):
        L = rng.normal(0.0, 2.0, code.coded_length(K))
        _, posterior = bcjr_decode(code, LlrFrame(L, LlrRole.A_PRIORI))
        worst = max(worst, float(np.max(np.abs(posterior.values - brute_force_decoder_app(L, K)))))
    return worst < 1e-8, f"max |L - L_oracle| = {worst:.2e}"


def _check_channel_equalizer(rng: np.random.Generator) -> Tuple[bool, str]:
    ch = IsiChannel(np.array([math.sqrt(0.5), math.sqrt(0.5)]))
    T, N0 = 8, 0.5
    layout = FrameLayout(0, 0, T)
    worst = 0.0
    for _ in range(3):
        x = rng.choice([-1.0, 1.0], T)
        samples = noiseless_convolution(ch, x) + math.sqrt(N0) * rng.standard_normal(T + 1)
        rx = ReceivedFrame(samples, N0, layout, ch.length)
        ext = bcjr_equalize(ch, rx, LlrFrame.zeros(T))
        oracle = brute_force_channel_app(ch, samples, N0, np.zeros(T))
        worst = max(worst, float(np.max(np.abs(ext.values - oracle))))
    return worst < 1e-8, f"max |L - L_oracle| = {worst:.2e}"


def _random_step(rng: np.random.Generator, L_d: int):
    d = rng.normal(0.0, 0.5, L_d)
    causal_llr = rng.normal(0.0, 4.0, L_d)
    decisions = np.where(causal_llr >= 0.0, 1.0, -1.0)
    mean_i, var_i, prob_i_zero = error_prop_stats(d, causal_llr, decisions)
    out = DfeStepOutput.from_statistics(y=float(rng.normal(0.0, 1.0)), p0=float(rng.uniform(0.2, 0.95)),
                                        var_v=float(rng.uniform(0.05, 0.5)), mean_i=mean_i,
                                        var_i=var_i, prob_i_zero=prob_i_zero)
    return out, d, causal_llr, decisions


def _check_enumerated(rng: np.random.Generator, instances: int = ENUMERATED_INSTANCES) -> Tuple[bool, str]:
    worst = 0.0
    for k in range(instances):
        out, d, L, xhat = _random_step(rng, 1 + k % 4)
        got = enumerated_llr(out, d, L, xhat)
        want = brute_force_enumerated_llr(out.y, out.p0, out.var_v, d, L, xhat)
        if abs(want) < 50.0:
            worst = max(worst, abs(got - want))
    return worst < 1e-9, f"max deviation {worst:.2e} over {instances} instances"


def _report_enumerated_spread(rng: np.random.Generator, instances: int = ENUMERATED_INSTANCES) -> Tuple[bool, str]:
    """Distribution of |enumerated - proposed|; informational, never fails"""
    gaps = np.empty(instances)
    for k in range(instances):
        out, d, L, xhat = _random_step(rng, 1 + k % 4)
        gaps[k] = abs(enumerated_llr(out, d, L, xhat) - proposed_llr(out))
    q50, q90, q99 = np.quantile(gaps, [0.5, 0.9, 0.99])
    detail = (f"|enumerated - proposed| over {instances} instances: "
              f"median {q50:.3g}, q90 {q90:.3g}, q99 {q99:.3g}, max {gaps.max():.3g}")
    return True, detail


def _check_proposed_reduction(rng: np.random.Generator) -> Tuple[bool, str]:
    mismatches = 0
    for _ in range(1000):
        out = DfeStepOutput(y=float(rng.normal()), p0=float(rng.uniform(0.2, 0.95)),
                            var_v=float(rng.uniform(0.05, 0.5)), mean_i=0.0, var_i=0.0,
                            prob_i_zero=1.0, phi=float(rng.normal()))
        if proposed_llr(out) != conventional_llr(out):
            mismatches += 1
    return mismatches == 0, f"{mismatches} mismatches"


def _check_combiners(rng: np.random.Generator, triples: int = COMBINER_TRIPLES) -> Tuple[bool, str]:
    rho = rng.uniform(-0.9, 0.99, triples)
    Lef, Leb = rng.normal(0.0, 5.0, triples), rng.normal(0.0, 5.0, triples)
    N = rng.uniform(0.1, 2.0, triples)
    worst = 0.0
    # whitened and equal-variance agree when both branches have the same variance
    for k in range(triples):
        w = combine_whitened(Lef[k], Leb[k], NoiseCorrelationModel(N[k], N[k], rho[k]))
        e = combine_equal_variance(Lef[k], Leb[k], rho[k])
        worst = max(worst, abs(float(w) - float(e)))
    additive = float(np.max(np.abs(combine_equal_variance(Lef, Leb, 0.0) - np.clip(Lef + Leb, -50, 50))))

    fd_worst, h = 0.0, 1e-6
    for _ in range(200):
        r, Nf, Nb = rng.uniform(-0.5, 0.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)
        lf, lb = rng.normal(0.0, 1.0, 2)
        m_hi, m_lo = NoiseCorrelationModel(Nf, Nb, r + h), NoiseCorrelationModel(Nf, Nb, r - h)
        fd = abs((combine_whitened(lf, lb, m_hi) - combine_whitened(lf, lb, m_lo)) / (2 * h))
        fd_worst = max(fd_worst, abs(fd - combiner_sensitivity(Combiner.WHITENED, r, Nf, Nb, lf, lb)))
        fd = abs((combine_equal_variance(lf, lb, r + h) - combine_equal_variance(lf, lb, r - h)) / (2 * h))
        fd_worst = max(fd_worst, abs(fd - combiner_sensitivity(Combiner.EQUAL_VARIANCE, r, Nf, Nb, lf, lb)))

    passed = worst < 1e-12 and additive == 0.0 and fd_worst < 1e-6
    return passed, (f"whitened vs equal-variance {worst:.2e} over {triples} triples; "
                    f"rho=0 additive {additive:.1e}; finite diff {fd_worst:.2e}")


def _check_snr_ordering() -> Tuple[bool, str]:
    ch = IsiChannel.from_spec("h1")
    violations = []
    for snr_db in range(0, 15):
        report = ideal_snr_report(ch, 1.0, noise_from_snr_db(ch, snr_db))
        if not report.snr_udfe <= report.snr_ubidfe <= report.snr_mfb:
            violations.append(snr_db)
    return not violations, "ordering holds" if not violations else f"violated at {violations} dB"


def selftest_checks(seed: int, quick: bool = False) -> Dict[str, Callable[[], Tuple[bool, str]]]:
    """
    quick cuts the enumerated-LLR instances and the combiner triples; the
    tolerances stay the same and the affected rows say so in their detail.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    instances = QUICK_ENUMERATED_INSTANCES if quick else ENUMERATED_INSTANCES
    triples = QUICK_COMBINER_TRIPLES if quick else COMBINER_TRIPLES
    return {
        "spd_solver_vs_elimination": lambda: _check_spd(rng),
        "matched_filter_limit": _check_matched_filter,
        "analytic_rho_chain": _check_analytic_rho,
        "bcjr_decoder_vs_enumeration": lambda: _check_decoder(rng),
        "bcjr_equalizer_vs_enumeration": lambda: _check_channel_equalizer(rng),
        "enumerated_llr_vs_brute_force": lambda: _check_enumerated(rng, instances),
        "enumerated_vs_proposed_spread": lambda: _report_enumerated_spread(rng, instances),
        "proposed_reduces_to_conventional": lambda: _check_proposed_reduction(rng),
        "combiner_identities": lambda: _check_combiners(rng, triples),
        "ideal_snr_ordering": _check_snr_ordering,
    }


def run_selftest(seed: int = 2024, quick: bool = False) -> pd.DataFrame:
    rows: List[Dict] = []
    if quick:
        logger.info("⚡ Quick self-test: reduced instance counts, full tolerances")
    for name, check in selftest_checks(seed, quick).items():
        started = time.perf_counter()
        try:
            passed, detail = check()
        except Exception as e:
            passed, detail = False, f"raised {type(e).__name__}: {e}"
        elapsed = time.perf_counter() - started
        if quick and name in QUICK_CHECKS:
            detail = f"{detail} (quick)"
        status = "✅" if passed else "❌"
        logger.info(f"{status} {name}: {detail} ({elapsed:.2f}s)")
        rows.append({"check": name, "passed": bool(passed), "detail": detail, "seconds": round(elapsed, 3)})
    return pd.DataFrame(rows, columns=SELFTEST_COLUMNS)
