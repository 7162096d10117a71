"""
Tests for SISO MMSE filter design, the LLR mappings and the DFE / LE block runs
"""

import math

import numpy as np
import pytest

from component.dfe_service import (
    AprioriFrame,
    DfeEqualizer,
    DfeStepOutput,
    Direction,
    FilterMode,
    LinearEqualizer,
    LlrMode,
    PosteriorFrame,
    compute_tiv_filter_bank,
    compute_tiv_filters,
    compute_tv_filter_bank,
    compute_tv_filters,
    conventional_llr,
    dfe_equalize_step,
    dfe_run_block,
    enumerated_llr,
    error_prop_stats,
    le_run_block,
    noise_variance_quadratic,
    proposed_llr,
    slice_decision,
)
from component.signal_service import (
    FrameLayout,
    IsiChannel,
    apply_channel,
    bpsk_modulate,
    build_convolution_matrices,
    build_le_matrices,
    time_reverse_channel,
)
from component.trellis_service import LlrFrame, LlrRole
from services.selftest_service import brute_force_enumerated_llr, naive_solve


def _random_prior(rng, layout: FrameLayout) -> AprioriFrame:
    La = rng.normal(0.0, 3.0, layout.total_len)
    return AprioriFrame.from_llr(LlrFrame(La, LlrRole.A_PRIORI), layout)


def _step(y=0.3, p0=0.6, var_v=0.2, mean_i=0.0, prob_i_zero=1.0, phi=0.0):
    return DfeStepOutput(y=y, p0=p0, var_v=var_v, mean_i=mean_i, var_i=0.0, prob_i_zero=prob_i_zero, phi=phi)


class TestAprioriFrame:
    def test_guards_are_known(self):
        layout = FrameLayout(2, 3, 4)
        ap = AprioriFrame.uninformative(layout)
        known = layout.known_mask()
        np.testing.assert_array_equal(ap.mean[known], 1.0)
        np.testing.assert_array_equal(ap.z[known], 0.0)
        np.testing.assert_array_equal(ap.mean[~known], 0.0)
        np.testing.assert_array_equal(ap.z[~known], 1.0)

    def test_inconsistent_variance_rejected(self):
        with pytest.raises(ValueError):
            AprioriFrame(LlrFrame.zeros(2), np.zeros(2), np.array([0.5, 1.0]))

    def test_reversal(self, rng):
        layout = FrameLayout(1, 2, 5)
        ap = _random_prior(rng, layout)
        rev = ap.reversed()
        np.testing.assert_array_equal(rev.mean, ap.mean[::-1])
        np.testing.assert_array_equal(rev.La.values, ap.La.values[::-1])


class TestFilterDesign:
    def test_tv_taps_match_naive_solve(self, h1):
        mats = build_convolution_matrices(h1, 16, 4)
        N0 = 10 ** -0.6
        layout = FrameLayout(mats.window_len, mats.window_len, 30)
        ap = AprioriFrame.uninformative(layout)
        n = mats.window_len + 12
        f = compute_tv_filters(mats, ap, n, N0)

        sigma = ap.z[n - mats.cursor:n - mats.cursor + mats.window_len].copy()
        sigma[:4] = 0.0
        A = mats.H @ np.diag(sigma) @ mats.H.T + (1 - ap.z[n]) * np.outer(mats.s, mats.s) + N0 * np.eye(17)
        np.testing.assert_allclose(f.c, naive_solve(A, mats.s), atol=1e-9)
        np.testing.assert_allclose(f.d, (mats.H.T @ f.c)[:4], atol=1e-12)

    def test_tiv_taps_match_naive_solve(self, h2):
        mats = build_convolution_matrices(h2, 20, 6)
        N0 = 0.1
        f = compute_tiv_filters(mats, N0)
        sigma = np.ones(mats.window_len)
        sigma[:6] = 0.0
        A = mats.H @ np.diag(sigma) @ mats.H.T + N0 * np.eye(21)
        np.testing.assert_allclose(f.c, naive_solve(A, mats.s), atol=1e-9)
        assert f.is_invariant
        assert 0.0 < f.p0 < 1.0

    @pytest.mark.parametrize("name,L_c,L_d", [("h1", 16, 4), ("h2", 20, 6)])
    def test_perfect_priors_give_matched_filter(self, name, L_c, L_d):
        ch = IsiChannel.from_spec(name)
        N0 = 0.1
        mats = build_convolution_matrices(ch, L_c, L_d)
        layout = FrameLayout(mats.window_len, mats.window_len, 10)
        x = np.where(np.arange(layout.total_len) % 2 == 0, 1.0, -1.0)
        ap = AprioriFrame.from_llr(LlrFrame(50.0 * x, LlrRole.A_PRIORI), layout)
        f = compute_tv_filters(mats, ap, mats.window_len + 4, N0)
        expected = np.zeros(L_c + 1)
        expected[:ch.length] = ch.taps / (N0 + ch.energy)
        np.testing.assert_allclose(f.c, expected, atol=1e-9)

    def test_tv_variance_identity(self, h1, rng):
        mats = build_convolution_matrices(h1, 16, 4)
        layout = FrameLayout(mats.window_len, mats.window_len, 40)
        ap = _random_prior(rng, layout)
        n = mats.window_len + 20
        f = compute_tv_filters(mats, ap, n, 0.2)
        assert not f.jittered
        assert f.var_v == pytest.approx(f.p0 * (1 - f.p0), rel=1e-12)
        assert noise_variance_quadratic(f.c, mats, ap, n, 0.2) == pytest.approx(f.var_v, rel=1e-9)

    def test_batched_bank_matches_per_symbol(self, h1, rng):
        mats = build_convolution_matrices(h1, 16, 4)
        layout = FrameLayout(mats.window_len, mats.window_len, 25)
        ap = _random_prior(rng, layout)
        idx = np.arange(layout.total_len)[layout.payload_slice]
        bank = compute_tv_filter_bank(mats, ap, idx, 0.3)
        for k, n in enumerate(idx):
            f = compute_tv_filters(mats, ap, int(n), 0.3)
            np.testing.assert_allclose(bank.C[k], f.c, atol=1e-10)
            np.testing.assert_allclose(bank.D[k], f.d, atol=1e-10)
            assert bank.p0[k] == pytest.approx(f.p0, abs=1e-10)

    def test_batched_bank_solves_design_system(self, h1, rng):
        mats = build_convolution_matrices(h1, 16, 4)
        layout = FrameLayout(mats.window_len, mats.window_len, 12)
        ap = _random_prior(rng, layout)
        idx = np.arange(mats.window_len, mats.window_len + 12)
        bank = compute_tv_filter_bank(mats, ap, idx, 0.3)
        assert not bank.jittered.any()
        for k, n in enumerate(idx):
            start = n - mats.cursor
            sigma = ap.z[start:start + mats.window_len].copy()
            sigma[:mats.n_feedback] = 0.0
            A = (mats.H * sigma) @ mats.H.T + (1.0 - ap.z[n]) * np.outer(mats.s, mats.s) + 0.3 * np.eye(len(mats.s))
            np.testing.assert_allclose(A @ bank.C[k], mats.s, atol=1e-10)
            assert bank.var_v[k] == pytest.approx(bank.p0[k] * (1.0 - bank.p0[k]))

    def test_tiv_bank_variance(self, h1, rng):
        mats = build_convolution_matrices(h1, 16, 4)
        layout = FrameLayout(mats.window_len, mats.window_len, 12)
        ap = _random_prior(rng, layout)
        idx = np.arange(layout.total_len)[layout.payload_slice]
        bank = compute_tiv_filter_bank(mats, ap, idx, 0.3)
        f = compute_tiv_filters(mats, 0.3)
        for k, n in enumerate(idx):
            assert bank.var_v[k] == pytest.approx(noise_variance_quadratic(f.c, mats, ap, int(n), 0.3), rel=1e-10)

    def test_window_outside_frame(self, h1):
        mats = build_convolution_matrices(h1, 16, 4)
        ap = AprioriFrame.uninformative(FrameLayout(2, 2, 10))
        with pytest.raises(ValueError):
            compute_tv_filters(mats, ap, 3, 0.1)


class TestErrorStatistics:
    def test_certain_history(self):
        assert error_prop_stats(np.array([0.4, -0.2]), np.array([np.inf, -np.inf]), np.array([1.0, -1.0])) == (0.0, 0.0, 1.0)

    def test_uninformative_history(self):
        mean_i, var_i, pz = error_prop_stats(np.array([0.5]), np.array([0.0]), np.array([1.0]))
        assert mean_i == pytest.approx(-0.5)
        assert var_i == pytest.approx(0.25)
        assert pz == pytest.approx(0.5)

    def test_no_feedback(self):
        assert error_prop_stats(np.zeros(0), np.zeros(0), np.zeros(0)) == (0.0, 0.0, 1.0)

    def test_probability_is_product(self):
        L = np.array([2.0, -1.0, 0.5])
        _, _, pz = error_prop_stats(np.ones(3), L, np.sign(L))
        expected = np.prod(1.0 / (1.0 + np.exp(-np.abs(L))))
        assert pz == pytest.approx(expected, rel=1e-12)


class TestLlrMappings:
    def test_conventional(self):
        assert conventional_llr(_step(y=0.3, p0=0.6, var_v=0.2)) == pytest.approx(1.8)

    def test_conventional_clamps(self):
        assert conventional_llr(_step(y=100.0, p0=0.9, var_v=0.01)) == 50.0

    def test_proposed_reduces_to_conventional(self, rng):
        for _ in range(100):
            out = _step(y=float(rng.normal()), p0=float(rng.uniform(0.1, 0.9)),
                        var_v=float(rng.uniform(0.05, 1.0)), phi=float(rng.normal()))
            assert proposed_llr(out) == conventional_llr(out)

    def test_proposed_with_certain_error_saturates(self):
        out = _step(y=5.0, prob_i_zero=0.0, phi=1e6)
        assert proposed_llr(out) == pytest.approx(2.0, abs=1e-5)

    def test_proposed_lies_between_cases(self):
        out = _step(y=0.8, p0=0.7, var_v=0.1, prob_i_zero=0.6, phi=0.5)
        clean = 2 * 0.7 * 0.8 / 0.1
        err = 2 * 0.5 / 1.5
        assert err < proposed_llr(out) < clean

    def test_proposed_hand_example(self):
        out = DfeStepOutput.from_statistics(y=3.0, p0=1.0, var_v=1.0, mean_i=0.0, prob_i_zero=0.0)
        assert out.phi == pytest.approx(3.0)
        assert proposed_llr(out) == pytest.approx(1.5)

    @pytest.mark.parametrize("prob_i_zero,mean_i", [(1.0, 0.0), (0.7, 0.0), (0.3, 0.15), (0.0, -0.2)])
    def test_mappings_are_monotone_in_y(self, prob_i_zero, mean_i):
        ys = np.linspace(-6.0, 6.0, 241)
        outs = [DfeStepOutput.from_statistics(float(y), 0.6, 0.2, mean_i=mean_i, prob_i_zero=prob_i_zero) for y in ys]
        assert np.all(np.diff([conventional_llr(o) for o in outs]) >= 0.0)
        assert np.all(np.diff([proposed_llr(o) for o in outs]) >= -1e-12)

    def test_proposed_is_odd_in_y(self, rng):
        for _ in range(200):
            y, p0, var_v = float(rng.normal(0.0, 2.0)), float(rng.uniform(0.2, 0.95)), float(rng.uniform(0.05, 1.0))
            prob_i_zero = float(rng.uniform())
            pos = DfeStepOutput.from_statistics(y, p0, var_v, prob_i_zero=prob_i_zero)
            neg = DfeStepOutput.from_statistics(-y, p0, var_v, prob_i_zero=prob_i_zero)
            assert proposed_llr(neg) == pytest.approx(-proposed_llr(pos), abs=1e-12)

    def test_enumerated_matches_brute_force(self, rng):
        for k in range(400):
            L_d = 1 + k % 4
            d = rng.normal(0.0, 0.5, L_d)
            L = rng.normal(0.0, 4.0, L_d)
            xhat = np.where(L >= 0, 1.0, -1.0)
            out = _step(y=float(rng.normal()), p0=float(rng.uniform(0.2, 0.95)), var_v=float(rng.uniform(0.05, 0.5)))
            want = brute_force_enumerated_llr(out.y, out.p0, out.var_v, d, L, xhat)
            if abs(want) < 49.0:
                assert enumerated_llr(out, d, L, xhat) == pytest.approx(want, abs=1e-9)

    def test_enumerated_with_certain_history_is_conventional(self):
        out = _step(y=0.4, p0=0.5, var_v=0.3)
        got = enumerated_llr(out, np.array([0.3, 0.1]), np.array([np.inf, -np.inf]), np.array([1.0, -1.0]))
        assert got == pytest.approx(conventional_llr(out), abs=1e-12)

    def test_enumeration_limit(self):
        with pytest.raises(ValueError):
            enumerated_llr(_step(), np.ones(13), np.ones(13), np.ones(13))

    def test_slicer(self):
        assert slice_decision(0.0, 0.0) == 1.0
        assert slice_decision(-1.0, 0.5) == -1.0
        assert slice_decision(-1.0, 1.5) == 1.0


class TestMemorylessChannel:
    """With no ISI every equalizer reduces to the channel LLR 2r/N0, whatever the prior"""

    @pytest.mark.parametrize("mode", [FilterMode.TV, FilterMode.TIV])
    def test_linear_equalizer(self, mode, rng):
        ch = IsiChannel([1.0])
        frame = bpsk_modulate(rng.integers(0, 2, 30), 2, 2)
        rx = apply_channel(ch, frame, 0.5, rng)
        La = LlrFrame(rng.normal(0.0, 2.0, 30), LlrRole.A_PRIORI)
        Le = LinearEqualizer(build_le_matrices(ch, 1), mode).equalize(rx, La)
        np.testing.assert_allclose(Le.values, 2.0 * rx.samples[2:32] / 0.5, atol=1e-9)

    @pytest.mark.parametrize("llr_mode", [LlrMode.CONVENTIONAL, LlrMode.PROPOSED])
    def test_dfe(self, llr_mode, rng):
        ch = IsiChannel([1.0])
        frame = bpsk_modulate(rng.integers(0, 2, 30), 2, 2)
        rx = apply_channel(ch, frame, 0.5, rng)
        eq = DfeEqualizer(build_convolution_matrices(ch, 0, 0), FilterMode.TV, llr_mode)
        Le = eq.equalize(rx, LlrFrame(rng.normal(0.0, 2.0, 30), LlrRole.A_PRIORI))
        np.testing.assert_allclose(Le.values, 2.0 * rx.samples[2:32] / 0.5, atol=1e-9)


class TestBlockRuns:
    def _setup(self, ch, rng, N0=0.01, payload=200):
        mats = build_convolution_matrices(ch, 4, 1)
        frame = bpsk_modulate(rng.integers(0, 2, payload), 8, 8)
        rx = apply_channel(ch, frame, N0, rng)
        return mats, frame, rx

    @pytest.mark.parametrize("llr_mode", list(LlrMode))
    @pytest.mark.parametrize("mode", [FilterMode.TV, FilterMode.TIV])
    def test_high_snr_decisions_are_correct(self, short_channel, rng, mode, llr_mode):
        mats, frame, rx = self._setup(short_channel, rng)
        ap = AprioriFrame.uninformative(rx.layout)
        Le, trace = dfe_run_block(mode, llr_mode, Direction.FORWARD, mats, rx, ap)
        np.testing.assert_array_equal(np.where(Le.values >= 0, 1.0, -1.0), frame.payload)
        np.testing.assert_array_equal(trace.decisions, frame.payload)
        assert np.max(np.abs(trace.Y - frame.payload)) < 0.6

    def test_reversed_direction(self, short_channel, rng):
        _, frame, rx = self._setup(short_channel, rng, N0=0.2, payload=60)
        mats_bwd = build_convolution_matrices(time_reverse_channel(short_channel), 4, 1)
        ap = AprioriFrame.uninformative(rx.layout)
        Le, trace = dfe_run_block(FilterMode.TV, LlrMode.PROPOSED, Direction.REVERSED, mats_bwd, rx, ap)
        Le_direct, trace_direct = dfe_run_block(FilterMode.TV, LlrMode.PROPOSED, Direction.FORWARD, mats_bwd,
                                                rx.reversed(), ap.reversed())
        np.testing.assert_array_equal(Le.values, Le_direct.values[::-1])
        np.testing.assert_array_equal(trace.Y, trace_direct.Y[::-1])

    def test_ideal_feedback_uses_truth(self, short_channel, rng):
        mats, frame, rx = self._setup(short_channel, rng, N0=1.0, payload=80)
        ap = AprioriFrame.uninformative(rx.layout)
        _, trace = dfe_run_block(FilterMode.TV, LlrMode.PROPOSED, Direction.FORWARD, mats, rx, ap,
                                 ideal_feedback=frame)
        np.testing.assert_array_equal(trace.decisions, frame.payload)
        np.testing.assert_array_equal(trace.meanI, 0.0)

    def test_step_matches_block(self, short_channel, rng):
        mats, frame, rx = self._setup(short_channel, rng, N0=0.3, payload=30)
        ap = AprioriFrame.uninformative(rx.layout)
        Le, trace = dfe_run_block(FilterMode.TV, LlrMode.CONVENTIONAL, Direction.FORWARD, mats, rx, ap)
        n = rx.layout.guard_prefix + 10
        history = np.array([trace.decisions[9]])
        f = compute_tv_filters(mats, ap, n, rx.noise_variance)
        out = dfe_equalize_step(f, mats, rx, history, ap, n)
        assert out.y / out.p0 == pytest.approx(trace.Y[10], abs=1e-9)
        assert conventional_llr(out) == pytest.approx(Le.values[10], abs=1e-8)

    def test_short_guards_rejected(self, short_channel, rng):
        mats = build_convolution_matrices(short_channel, 4, 1)
        frame = bpsk_modulate(rng.integers(0, 2, 10), 1, 1)
        rx = apply_channel(short_channel, frame, 0.1, rng)
        with pytest.raises(ValueError):
            dfe_run_block(FilterMode.TV, LlrMode.CONVENTIONAL, Direction.FORWARD, mats, rx,
                          AprioriFrame.uninformative(rx.layout))

    def test_le_needs_le_matrices(self, short_channel, rng):
        mats, _, rx = self._setup(short_channel, rng)
        with pytest.raises(ValueError):
            le_run_block(FilterMode.TV, mats, rx, AprioriFrame.uninformative(rx.layout))

    def test_posterior_frame(self):
        post = PosteriorFrame.initial(FrameLayout(2, 1, 3))
        assert math.isinf(post.L[0]) and post.L[2] == 0.0
        post.update(2, -3.0, -1.0)
        L, dec = post.causal(3, 2)
        np.testing.assert_array_equal(L, [np.inf, -3.0])
        np.testing.assert_array_equal(dec, [1.0, -1.0])
