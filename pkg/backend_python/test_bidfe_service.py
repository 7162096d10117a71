"""
Tests for the BiDFE noise model, rho estimation, combiners and analytic rho
"""

from dataclasses import replace

import numpy as np
import pytest

from component import bidfe_service
from component.analysis_service import ideal_snr_report, noise_from_snr_db
from component.bidfe_service import (
    BiDfeEqualizer,
    Combiner,
    NoiseCorrelationModel,
    RhoMode,
    analytic_rho,
    bidfe_run_block,
    combine_equal_variance,
    combine_mean,
    combine_whitened,
    estimate_rho,
)
from component.dfe_service import AprioriFrame, FilterMode, LlrMode, UnbiasedTrace
from component.signal_service import FrameLayout, apply_channel, bpsk_modulate, build_convolution_matrices, time_reverse_channel
from component.trellis_service import LlrFrame


def _trace(Y, decisions, meanI=None):
    Y = np.asarray(Y, dtype=float)
    return UnbiasedTrace(Y=Y, meanI=np.zeros(len(Y)) if meanI is None else np.asarray(meanI, dtype=float),
                         decisions=np.asarray(decisions, dtype=float), varV_unb=np.ones(len(Y)))


class TestNoiseCorrelationModel:
    @pytest.mark.parametrize("Nf,Nb,rho", [(1.0, 1.0, 0.4), (0.7, 1.3, -0.6), (2.0, 0.5, 0.95), (1.0, 2.0, 0.0)])
    def test_eigendecomposition(self, Nf, Nb, rho):
        model = NoiseCorrelationModel(Nf, Nb, rho)
        lam1, lam2, A = model.eigen
        assert lam1 >= lam2 >= 0.0
        np.testing.assert_allclose(A @ A.T, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(A @ model.covariance @ A.T, np.diag([lam1, lam2]), atol=1e-12)

    def test_llr_from_outputs_matches_whitened_combiner(self, rng):
        model = NoiseCorrelationModel(0.8, 1.4, 0.55)
        Yf, Yb = rng.normal(0.0, 1.0, 50), rng.normal(0.0, 1.0, 50)
        direct = model.llr_from_outputs(Yf, Yb)
        via_llrs = combine_whitened(2.0 * Yf / model.Nf, 2.0 * Yb / model.Nb, model)
        np.testing.assert_allclose(direct, via_llrs, atol=1e-10)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            NoiseCorrelationModel(0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            NoiseCorrelationModel(1.0, 1.0, 1.5)


class TestCombiners:
    def test_whitened_equals_equal_variance_for_equal_branches(self, rng):
        Lef, Leb = rng.normal(0.0, 4.0, 100), rng.normal(0.0, 4.0, 100)
        for rho in (-0.8, -0.2, 0.0, 0.3, 0.9):
            model = NoiseCorrelationModel(0.6, 0.6, rho)
            np.testing.assert_allclose(combine_whitened(Lef, Leb, model),
                                       combine_equal_variance(Lef, Leb, rho), atol=1e-12)

    def test_uncorrelated_branches_add(self):
        np.testing.assert_array_equal(combine_equal_variance([1.0, -2.0], [3.0, 0.5], 0.0), [4.0, -1.5])

    def test_fully_correlated_branches_average(self):
        model = NoiseCorrelationModel(0.5, 2.0, 1.0)
        np.testing.assert_allclose(combine_whitened([2.0, -4.0], [4.0, 0.0], model), [3.0, -2.0])
        np.testing.assert_allclose(combine_equal_variance([2.0, -4.0], [4.0, 0.0], 1.0), [3.0, -2.0])
        np.testing.assert_allclose(combine_mean([2.0, -4.0], [4.0, 0.0]), [3.0, -2.0])

    def test_outputs_are_clamped(self):
        assert combine_equal_variance([49.0], [49.0], -0.5)[0] == 50.0

    def test_rho_out_of_range(self):
        with pytest.raises(ValueError):
            combine_equal_variance([1.0], [1.0], -1.0)
        with pytest.raises(ValueError):
            combine_equal_variance([1.0], [1.0], 1.2)

    def test_sensitivity_ranking_near_full_correlation(self):
        rho, h = 0.999, 1e-7
        Lef, Leb = 1.0, 1.0
        hi = combine_whitened(Lef, Leb, NoiseCorrelationModel(0.8, 1.2, rho + h))
        lo = combine_whitened(Lef, Leb, NoiseCorrelationModel(0.8, 1.2, rho - h))
        whitened = abs(float(hi) - float(lo)) / (2 * h)
        hi, lo = combine_equal_variance(Lef, Leb, rho + h), combine_equal_variance(Lef, Leb, rho - h)
        equal_var = abs(float(hi) - float(lo)) / (2 * h)
        # combine_mean takes no rho, so its sensitivity is zero
        assert whitened > equal_var >= 0.0
        assert equal_var == pytest.approx((Lef + Leb) / (1.0 + rho) ** 2, rel=1e-4)
        assert float(combine_mean(Lef, Leb)) == pytest.approx(1.0)


class TestRhoEstimation:
    def test_identical_residuals(self, rng):
        noise = rng.normal(0.0, 0.3, 500)
        x = rng.choice([-1.0, 1.0], 500)
        est = estimate_rho(_trace(x + noise, x), _trace(x + noise, x))
        assert est.valid
        assert est.rho_hat == pytest.approx(1.0)
        assert est.sample_count == 500
        assert est.agreement_fraction == 1.0

    def test_independent_residuals(self, rng):
        x = rng.choice([-1.0, 1.0], 20000)
        est = estimate_rho(_trace(x + rng.normal(0.0, 0.3, 20000), x),
                           _trace(x + rng.normal(0.0, 0.3, 20000), x))
        assert abs(est.rho_hat) < 0.05

    def test_mean_error_is_removed(self, rng):
        x = rng.choice([-1.0, 1.0], 300)
        noise = rng.normal(0.0, 0.3, 300)
        shift = rng.normal(0.0, 0.2, 300)
        est = estimate_rho(_trace(x + noise + shift, x, meanI=shift), _trace(x + noise, x))
        assert est.rho_hat == pytest.approx(1.0)

    def test_only_agreeing_symbols_count(self, rng):
        x = rng.choice([-1.0, 1.0], 100)
        flipped = x.copy()
        flipped[:30] *= -1.0
        est = estimate_rho(_trace(x + rng.normal(0.0, 0.3, 100), x), _trace(x + rng.normal(0.0, 0.3, 100), flipped))
        assert est.sample_count == 70
        assert est.agreement_fraction == pytest.approx(0.7)

    def test_window(self, rng):
        x = rng.choice([-1.0, 1.0], 100)
        est = estimate_rho(_trace(x + 0.1, x), _trace(x + rng.normal(0.0, 0.3, 100), x), window=10)
        assert est.sample_count == 10

    def test_no_agreement_falls_back(self, caplog):
        est = estimate_rho(_trace([1.0, -1.0], [1.0, -1.0]), _trace([-1.0, 1.0], [-1.0, 1.0]))
        assert not est.valid
        assert est.rho == 0.0
        assert "No agreeing" in caplog.text

    def test_misaligned_traces(self):
        with pytest.raises(ValueError):
            estimate_rho(_trace([1.0], [1.0]), _trace([1.0, 1.0], [1.0, 1.0]))

    @pytest.mark.parametrize("scale", [0.01, 3.0, 250.0])
    def test_rescaling_residuals(self, rng, scale):
        x = rng.choice([-1.0, 1.0], 400)
        rf, rb = rng.normal(0.0, 0.3, 400), rng.normal(0.0, 0.3, 400)
        mf = rng.normal(0.0, 0.1, 400)
        rb = 0.6 * rf + rb
        base = estimate_rho(_trace(x + rf + mf, x, meanI=mf), _trace(x + rb, x))
        scaled = estimate_rho(_trace(x + scale * (rf + mf), x, meanI=scale * mf), _trace(x + scale * rb, x))
        assert scaled.rho_hat == pytest.approx(base.rho_hat, abs=1e-10)
        assert scaled.sample_count == base.sample_count


class TestAnalyticRho:
    def _mats(self, ch, L_c=16, L_d=4):
        return build_convolution_matrices(ch, L_c, L_d), build_convolution_matrices(time_reverse_channel(ch), L_c, L_d)

    def test_perfect_tv_is_one(self, h1):
        fwd, bwd = self._mats(h1)
        assert analytic_rho(RhoMode.PERFECT_TV, fwd, bwd, 0.1) == 1.0

    def test_no_apriori_tracks_infinite_length_limit(self, h1):
        N0 = noise_from_snr_db(h1, 6.0)
        fwd, bwd = self._mats(h1)
        rho = analytic_rho(RhoMode.NO_APRIORI, fwd, bwd, N0)
        assert abs(rho - ideal_snr_report(h1, 1.0, N0).rho_inf) < 0.01

    def test_prior_dependent_modes_need_a_frame(self, h1):
        fwd, bwd = self._mats(h1)
        for mode in (RhoMode.TV, RhoMode.TIV):
            with pytest.raises(ValueError):
                analytic_rho(mode, fwd, bwd, 0.1)

    def test_uninformative_prior_matches_no_apriori(self, h1):
        fwd, bwd = self._mats(h1)
        layout = FrameLayout(fwd.window_len, fwd.window_len, 40)
        ap = AprioriFrame.uninformative(layout)
        n = fwd.window_len + 20
        no_prior = analytic_rho(RhoMode.NO_APRIORI, fwd, bwd, 0.2)
        # deep inside the payload every window sees z = 1, exactly the no-prior design
        assert analytic_rho(RhoMode.TV, fwd, bwd, 0.2, ap, n) == pytest.approx(no_prior, abs=1e-9)
        assert analytic_rho(RhoMode.TIV, fwd, bwd, 0.2, ap, n) == pytest.approx(no_prior, abs=1e-9)

    def test_perfect_tiv_is_a_cosine(self, h2):
        fwd, bwd = self._mats(h2, 20, 6)
        rho = analytic_rho(RhoMode.PERFECT_TIV, fwd, bwd, 0.1)
        assert -1.0 <= rho <= 1.0

    def test_tv_uses_the_variance_of_the_filter_design(self, h1, monkeypatch):
        fwd, bwd = self._mats(h1)
        layout = FrameLayout(fwd.window_len, fwd.window_len, 40)
        ap = AprioriFrame.uninformative(layout)
        n = fwd.window_len + 20
        plain = analytic_rho(RhoMode.TV, fwd, bwd, 0.2, ap, n)

        design = bidfe_service.compute_tv_filters

        def jittered_design(*args, **kwargs):
            f = design(*args, **kwargs)
            return replace(f, var_v=4.0 * f.var_v, jittered=True)

        monkeypatch.setattr(bidfe_service, "compute_tv_filters", jittered_design)
        assert analytic_rho(RhoMode.TV, fwd, bwd, 0.2, ap, n) == pytest.approx(plain / 4.0, rel=1e-12)

    def test_length_mismatch(self, h1):
        with pytest.raises(ValueError):
            analytic_rho(RhoMode.NO_APRIORI, build_convolution_matrices(h1, 16, 4),
                         build_convolution_matrices(time_reverse_channel(h1), 12, 4), 0.1)


class TestBiDfeBlock:
    def _run(self, ch, rng, combiner, N0=0.05, payload=300):
        fwd, bwd = build_convolution_matrices(ch, 4, 1), build_convolution_matrices(time_reverse_channel(ch), 4, 1)
        frame = bpsk_modulate(rng.integers(0, 2, payload), 8, 8)
        rx = apply_channel(ch, frame, N0, rng)
        ap = AprioriFrame.uninformative(rx.layout)
        return frame, bidfe_run_block(FilterMode.TV, LlrMode.PROPOSED, fwd, bwd, rx, ap, combiner=combiner)

    @pytest.mark.parametrize("combiner", list(Combiner))
    def test_combined_decisions(self, short_channel, rng, combiner):
        frame, result = self._run(short_channel, rng, combiner)
        assert len(result.extrinsic) == 300
        np.testing.assert_array_equal(np.where(result.extrinsic.values >= 0, 1.0, -1.0), frame.payload)
        assert result.estimate.valid
        assert -1.0 < result.estimate.rho_hat <= 1.0

    def test_traces_are_aligned(self, short_channel, rng):
        frame, result = self._run(short_channel, rng, Combiner.MEAN)
        np.testing.assert_array_equal(result.trace_fwd.decisions, frame.payload)
        np.testing.assert_array_equal(result.trace_bwd.decisions, frame.payload)

    def test_equal_variance_uses_estimate(self, short_channel, rng):
        _, result = self._run(short_channel, rng, Combiner.EQUAL_VARIANCE)
        expected = combine_equal_variance(result.forward.values, result.backward.values, result.estimate.rho)
        np.testing.assert_array_equal(result.extrinsic.values, expected)

    def test_equalizer_diagnostics(self, short_channel, rng):
        fwd = build_convolution_matrices(short_channel, 4, 1)
        bwd = build_convolution_matrices(time_reverse_channel(short_channel), 4, 1)
        eq = BiDfeEqualizer(fwd, bwd, FilterMode.TIV, LlrMode.CONVENTIONAL)
        assert eq.diagnostics() == {}
        frame = bpsk_modulate(rng.integers(0, 2, 100), 8, 8)
        rx = apply_channel(short_channel, frame, 0.1, rng)
        Le = eq.equalize(rx, LlrFrame.zeros(100))
        assert len(Le) == 100
        diag = eq.diagnostics()
        assert set(diag) == {"rho_hat", "rho_valid", "agreement_fraction"}
        assert eq.fallback_count == 0
