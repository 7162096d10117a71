"""
Tests for the infinite-length SNR figures and the combiner sensitivity
"""

import math

import pytest

from component.analysis_service import (
    combiner_sensitivity,
    ideal_bidfe_snr,
    ideal_dfe_snr,
    ideal_snr_report,
    mfb_snr,
    noise_from_snr_db,
    report_as_dict,
    snr_table,
    to_db,
)
from component.bidfe_service import Combiner, NoiseCorrelationModel, combine_equal_variance, combine_whitened
from component.signal_service import IsiChannel


class TestIdealSnr:
    def test_memoryless_channel(self):
        ch = IsiChannel([1.0])
        N0 = 0.25
        report = ideal_snr_report(ch, 1.0, N0)
        assert report.snr_udfe == pytest.approx(1.0 / N0, rel=1e-9)
        assert report.rho_inf == pytest.approx(1.0, abs=1e-9)
        # with no ISI both DFEs see the same noise, so combining gains nothing over the bound
        assert report.snr_ubidfe == pytest.approx(report.snr_mfb, rel=1e-9)

    def test_noise_from_snr(self, h1):
        assert noise_from_snr_db(h1, 10.0) == pytest.approx(0.1)
        assert noise_from_snr_db(IsiChannel([2.0]), 0.0, Px=0.5) == pytest.approx(2.0)

    def test_ordering_on_spectral_null_channel(self, h1):
        for snr_db in (0.0, 4.0, 8.0, 12.0):
            report = ideal_snr_report(h1, 1.0, noise_from_snr_db(h1, snr_db))
            assert report.snr_udfe <= report.snr_ubidfe <= report.snr_mfb
            assert report.snr_urdfe == report.snr_udfe
            assert -1.0 < report.rho_inf <= 1.0

    def test_standalone_helpers_agree_with_report(self, h2):
        N0 = 0.2
        report = ideal_snr_report(h2, 1.0, N0)
        assert ideal_dfe_snr(h2, 1.0, N0) == pytest.approx(report.snr_udfe)
        rho, snr_bi = ideal_bidfe_snr(h2, 1.0, N0)
        assert rho == pytest.approx(report.rho_inf)
        assert snr_bi == pytest.approx(report.snr_ubidfe)
        assert mfb_snr(h2, 1.0, N0) == pytest.approx(5.0)

    def test_mse_relation(self, h2):
        report = ideal_snr_report(h2, 1.0, 0.1)
        assert report.mse_udfe == pytest.approx(1.0 / report.snr_udfe)
        assert report.mse_ubidfe == pytest.approx(1.0 / report.snr_ubidfe)

    def test_non_positive_noise(self, h1):
        with pytest.raises(ValueError):
            ideal_snr_report(h1, 1.0, 0.0)
        with pytest.raises(ValueError):
            mfb_snr(h1, 1.0, -1.0)

    def test_report_dict(self, h1):
        data = report_as_dict(ideal_snr_report(h1, 1.0, 0.1))
        assert data["snr_mfb_db"] == pytest.approx(10.0)
        assert {"rho_inf", "snr_udfe_db", "snr_ubidfe_db", "mse_ubidfe"} <= set(data)

    def test_to_db(self):
        assert to_db(100.0) == pytest.approx(20.0)
        assert to_db(0.0) == -math.inf


class TestSnrTable:
    def test_columns_and_rows(self, h1):
        table = snr_table(h1, [0.0, 5.0, 10.0])
        assert list(table.columns) == ["snr_db", "snr_udfe_db", "snr_ubidfe_db", "rho_inf", "snr_mfb_db"]
        assert len(table) == 3
        assert table["snr_mfb_db"].tolist() == pytest.approx([0.0, 5.0, 10.0])
        assert table["snr_udfe_db"].is_monotonic_increasing

    def test_empty_grid(self, h1):
        table = snr_table(h1, [])
        assert table.empty
        assert "rho_inf" in table.columns


class TestCombinerSensitivity:
    @pytest.mark.parametrize("rho,Nf,Nb,Lef,Leb", [(0.3, 0.8, 1.2, 1.5, -0.4), (-0.4, 1.0, 0.6, -2.0, 3.0)])
    def test_whitened_matches_finite_difference(self, rho, Nf, Nb, Lef, Leb):
        h = 1e-6
        hi = combine_whitened(Lef, Leb, NoiseCorrelationModel(Nf, Nb, rho + h))
        lo = combine_whitened(Lef, Leb, NoiseCorrelationModel(Nf, Nb, rho - h))
        fd = abs(float(hi - lo) / (2 * h))
        assert combiner_sensitivity(Combiner.WHITENED, rho, Nf, Nb, Lef, Leb) == pytest.approx(fd, rel=1e-5)

    def test_equal_variance_matches_finite_difference(self):
        h = 1e-6
        fd = abs(float(combine_equal_variance(2.0, 1.0, 0.2 + h) - combine_equal_variance(2.0, 1.0, 0.2 - h)) / (2 * h))
        assert combiner_sensitivity(Combiner.EQUAL_VARIANCE, 0.2, 1.0, 1.0, 2.0, 1.0) == pytest.approx(fd, rel=1e-5)

    def test_mean_combiner_has_no_sensitivity(self):
        with pytest.raises(ValueError):
            combiner_sensitivity(Combiner.MEAN, 0.0, 1.0, 1.0, 1.0, 1.0)

    def test_whitened_singular_rho(self):
        with pytest.raises(ValueError):
            combiner_sensitivity(Combiner.WHITENED, 1.0, 1.0, 1.0, 1.0, 1.0)
