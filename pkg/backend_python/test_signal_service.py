"""
Tests for channel presets, framing, modulation and the convolution geometry
"""

import numpy as np
import pytest

from component.signal_service import (
    FrameLayout,
    IsiChannel,
    ReceivedFrame,
    apply_channel,
    bpsk_modulate,
    build_convolution_matrices,
    build_le_matrices,
    noiseless_convolution,
    time_reverse_channel,
)


class TestIsiChannel:
    def test_presets_have_unit_energy(self, h1, h2):
        assert h1.energy == pytest.approx(1.0, abs=1e-12)
        assert h2.energy == pytest.approx(1.0, abs=1e-12)
        assert h1.length == 5
        assert h2.length == 7

    def test_tap_list_spec(self):
        ch = IsiChannel.from_spec("1, 0.5")
        np.testing.assert_array_equal(ch.taps, [1.0, 0.5])
        assert ch.name == "custom"

    def test_unknown_spec_raises(self):
        with pytest.raises(ValueError):
            IsiChannel.from_spec("h9")

    def test_zero_channel_rejected(self):
        with pytest.raises(ValueError):
            IsiChannel([0.0, 0.0])

    def test_time_reverse_round_trip(self, h2):
        rev = time_reverse_channel(h2)
        np.testing.assert_array_equal(rev.taps, h2.taps[::-1])
        back = time_reverse_channel(rev)
        np.testing.assert_array_equal(back.taps, h2.taps)
        assert back.name == h2.name

    def test_autocorrelation_is_symmetric(self, h1):
        r = h1.autocorrelation()
        assert len(r) == 2 * h1.length - 1
        np.testing.assert_allclose(r, r[::-1])
        assert r[h1.length - 1] == pytest.approx(h1.energy)

    def test_reversal_keeps_autocorrelation(self, rng):
        for length in range(1, 9):
            for _ in range(5):
                ch = IsiChannel(rng.normal(0.0, 1.0, length))
                np.testing.assert_allclose(time_reverse_channel(ch).autocorrelation(), ch.autocorrelation(),
                                           rtol=0.0, atol=1e-12)


class TestFraming:
    def test_bpsk_mapping_and_guards(self):
        frame = bpsk_modulate([0, 1, 1], guard_prefix=2, guard_suffix=1)
        np.testing.assert_array_equal(frame.symbols, [1, 1, 1, -1, -1, 1])
        np.testing.assert_array_equal(frame.payload, [1, -1, -1])
        np.testing.assert_array_equal(frame.layout.known_mask(), [True, True, False, False, False, True])

    def test_bad_bits_rejected(self):
        with pytest.raises(ValueError):
            bpsk_modulate([0, 2, 1])

    def test_reversed_swaps_guard_sides(self):
        frame = bpsk_modulate([1, 0, 0, 1], guard_prefix=3, guard_suffix=1)
        rev = frame.reversed()
        assert rev.layout == FrameLayout(1, 3, 4)
        np.testing.assert_array_equal(rev.payload, frame.payload[::-1])

    def test_negative_layout_rejected(self):
        with pytest.raises(ValueError):
            FrameLayout(-1, 0, 4)


class TestChannel:
    def test_identity_channel_passes_symbols(self):
        frame = bpsk_modulate([0, 1, 0, 1], 1, 1)
        rx = apply_channel(IsiChannel([1.0]), frame, N0=0.5)
        np.testing.assert_array_equal(rx.samples, frame.symbols)

    def test_sample_count_and_out_of_frame_symbols(self, h1):
        frame = bpsk_modulate([1, 1, 1], 0, 0)
        clean = noiseless_convolution(h1, frame.symbols)
        assert len(clean) == frame.layout.total_len + h1.length - 1
        # the first sample mixes x_0 = -1 with four +1 symbols before the frame
        assert clean[0] == pytest.approx(h1.taps[0] * -1.0 + h1.taps[1:].sum())

    def test_noise_variance(self, rng):
        frame = bpsk_modulate(np.zeros(20000, dtype=int), 0, 0)
        rx = apply_channel(IsiChannel([1.0]), frame, N0=0.25, rng=rng)
        assert np.var(rx.samples - frame.symbols) == pytest.approx(0.25, rel=0.05)

    def test_non_positive_noise_rejected(self, h1):
        frame = bpsk_modulate([0, 1], 0, 0)
        with pytest.raises(ValueError):
            apply_channel(h1, frame, N0=0.0)

    def test_wrong_sample_count_rejected(self):
        with pytest.raises(ValueError):
            ReceivedFrame(np.zeros(3), 1.0, FrameLayout(0, 0, 3), channel_length=2)

    def test_reversed_frame_matches_reversed_channel(self, h1, random_frame):
        frame = random_frame(40, 6)
        rx = apply_channel(h1, frame, N0=0.1)
        direct = apply_channel(time_reverse_channel(h1), frame.reversed(), N0=0.1)
        np.testing.assert_allclose(rx.reversed().samples, direct.samples, atol=1e-12)
        assert rx.reversed().layout == frame.reversed().layout


class TestConvolutionMatrices:
    def test_dfe_shapes(self, h1):
        mats = build_convolution_matrices(h1, 16, 4)
        assert mats.H.shape == (17, 21)
        assert mats.cursor == 4 and mats.n_feedback == 4
        np.testing.assert_array_equal(mats.s[:5], h1.taps)
        np.testing.assert_array_equal(mats.s[5:], 0.0)
        assert mats.M.shape == (4, 21)

    def test_band_structure(self, h1):
        mats = build_convolution_matrices(h1, 6, 4)
        for i in range(7):
            for j in range(11):
                k = i - j + 4
                expected = h1.taps[k] if 0 <= k < h1.length else 0.0
                assert mats.H[i, j] == expected

    @pytest.mark.parametrize("builder", ["dfe", "le"])
    def test_windows_reproduce_samples(self, h1, random_frame, builder):
        mats = build_convolution_matrices(h1, 16, 4) if builder == "dfe" else build_le_matrices(h1, 21)
        frame = random_frame(60, mats.window_len)
        rx = apply_channel(h1, frame, N0=1.0)
        pre, _ = mats.min_guards()
        for n in range(pre, frame.layout.total_len - mats.window_len + mats.cursor, 7):
            start = n + mats.sample_offset
            window = frame.symbols[n - mats.cursor:n - mats.cursor + mats.window_len]
            np.testing.assert_allclose(rx.samples[start:start + mats.L_c + 1], mats.H @ window, atol=1e-12)

    def test_le_geometry(self, h1):
        mats = build_le_matrices(h1, 21)
        assert mats.n_feedback == 0
        assert mats.cursor == 4 + 10
        assert mats.M.shape[0] == 0
        np.testing.assert_array_equal(mats.s, mats.H[:, mats.cursor])

    def test_even_le_taps_rejected(self, h1):
        with pytest.raises(ValueError):
            build_le_matrices(h1, 20)

    def test_feedback_gain(self, h1, rng):
        mats = build_convolution_matrices(h1, 16, 4)
        c = rng.standard_normal(17)
        np.testing.assert_allclose(mats.feedback_gain(c), (mats.H.T @ c)[:4])
