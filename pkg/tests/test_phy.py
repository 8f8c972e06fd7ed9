"""Equalizers, link adaptation, CSI and the platform cost models."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cflab import phy
from cflab.phy import (
    EqualizerReport,
    PairingError,
    SingularChannelError,
    UeCfConfig,
    active_mask,
    bits_per_prb_slot,
    compute_port_csi,
    estimate_channel,
    mcs_to_rate,
    mrc_sinr_db,
    process_slot,
    processing_time_us,
    processor_power_w,
    sinr_to_mcs,
    ue_throughput_mbps,
    zf_sinr_db,
)
from cflab.scheduler import PuschPdu
from cflab.topology import UeNode, default_array, draw_channel


class TestMcsTable:
    def test_29_entries(self):
        assert len(phy.MCS_TABLE) == 29

    def test_known_rows(self):
        assert mcs_to_rate(0) == (2, 120 / 1024)
        assert mcs_to_rate(10) == (4, 340 / 1024)
        assert mcs_to_rate(28) == (6, 948 / 1024)

    def test_spectral_efficiency_nearly_monotone(self):
        # The standard table dips ~0.004 b/s/Hz at the 16QAM -> 64QAM boundary.
        eff = [qm * r for qm, r in (mcs_to_rate(m) for m in range(29))]
        assert all(b > a - 0.01 for a, b in zip(eff, eff[1:]))
        assert eff[-1] > eff[0]

    @pytest.mark.parametrize("sinr,mcs", [(-10.0, 0), (-6.0, 0), (-5.0, 1),
                                          (0.0, 6), (21.9, 27), (22.0, 28),
                                          (40.0, 28)])
    def test_sinr_staircase(self, sinr, mcs):
        assert sinr_to_mcs(sinr) == mcs

    @given(st.floats(min_value=-30, max_value=50, allow_nan=False))
    def test_staircase_monotone(self, sinr):
        assert sinr_to_mcs(sinr) <= sinr_to_mcs(sinr + 1.0)


class TestThroughputModel:
    def test_full_grid_mcs28_anchor(self):
        assert ue_throughput_mbps(51, 28) == pytest.approx(19.0)

    def test_half_grid_scales_linearly(self):
        assert ue_throughput_mbps(25, 28) == pytest.approx(19.0 * 25 / 51)

    def test_zero_res_zero_throughput(self):
        assert ue_throughput_mbps(0, 28) == 0.0

    def test_overhead_factor_below_one(self):
        assert 0.5 < phy.OVERHEAD_ETA < 1.0

    def test_grant_estimator_capacity(self):
        # 12 subcarriers x 14 symbols x 6 bits x 948/1024 per PRB at MCS 28
        assert bits_per_prb_slot(28) == pytest.approx(12 * 14 * 6 * 948 / 1024)


class TestPlatformModels:
    @pytest.mark.parametrize("n,t", [(8, 4.1), (2, 3.6), (5, 3.85), (4, 3.6 + 2 / 12)])
    def test_zf_time_endpoints_and_interior(self, n, t):
        assert processing_time_us(n, "ZF") == pytest.approx(t)

    def test_mrc_costs_half_the_zf_batch(self):
        for n in range(1, 9):
            t_zf = 3.6 + (n - 2) / 12.0
            assert processing_time_us(n, "MRC") == pytest.approx(t_zf / 2.0)

    @pytest.mark.parametrize("n,p", [(8, 58.9), (2, 54.9), (5, 56.9)])
    def test_power_endpoints_and_interior(self, n, p):
        assert processor_power_w(n) == pytest.approx(p)

    def test_zf_requires_two_antennas(self):
        with pytest.raises(ValueError):
            processing_time_us(1, "ZF")
        with pytest.raises(ValueError):
            processing_time_us(9, "ZF")

    def test_power_range_guard(self):
        with pytest.raises(ValueError):
            processor_power_w(1)

    def test_unknown_equalizer_rejected(self):
        with pytest.raises(ValueError):
            processing_time_us(4, "DFE")


class TestMrc:
    def test_matched_filter_sum(self):
        h = np.array([1.0, 2.0, 0.0, 0.5], dtype=complex)
        mask = np.array([True, True, False, True])
        sinr = mrc_sinr_db(h, mask, p_tx_w=2.0, noise_var=np.full(4, 0.5))
        expect = 10 * math.log10(2.0 * (1 + 4 + 0.25) / 0.5)
        assert sinr == pytest.approx(expect)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            mrc_sinr_db(np.ones(4, dtype=complex), np.zeros(4, dtype=bool), 1.0,
                        np.ones(4))

    def test_all_faulted_gives_floor(self):
        sinr = mrc_sinr_db(np.zeros(4, dtype=complex), np.ones(4, dtype=bool), 1.0,
                           np.ones(4))
        assert sinr <= -290.0


class TestZf:
    def test_hand_computed_2x2(self):
        h = np.array([[1.0, 1 / math.sqrt(2)], [0.0, 1 / math.sqrt(2)]], dtype=complex)
        s1, s2 = zf_sinr_db(h, 1.0, 0.1)
        expect = 10 * math.log10(5.0)
        assert s1 == pytest.approx(expect, abs=1e-12)
        assert s2 == pytest.approx(expect, abs=1e-12)

    def test_orthogonal_channels_match_mrc(self):
        h = np.array([[2.0, 0.0], [0.0, 3.0]], dtype=complex)
        s1, s2 = zf_sinr_db(h, 1.0, 1.0)
        assert s1 == pytest.approx(10 * math.log10(4.0))
        assert s2 == pytest.approx(10 * math.log10(9.0))

    def test_collinear_channels_raise(self):
        h = np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]], dtype=complex)
        with pytest.raises(SingularChannelError):
            zf_sinr_db(h, 1.0, 0.1)

    def test_per_ue_power_pair(self):
        h = np.array([[2.0, 0.0], [0.0, 3.0]], dtype=complex)
        s1, s2 = zf_sinr_db(h, (1.0, 2.0), 1.0)
        assert s1 == pytest.approx(10 * math.log10(4.0))
        assert s2 == pytest.approx(10 * math.log10(18.0))

    def test_shape_guard(self):
        with pytest.raises(ValueError):
            zf_sinr_db(np.ones((1, 2), dtype=complex), 1.0, 1.0)
        with pytest.raises(ValueError):
            zf_sinr_db(np.ones((4, 3), dtype=complex), 1.0, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_zf_never_exceeds_single_user_mrc(self, seed):
        """Nulling the partner can only cost SINR relative to alone-on-grid."""
        rng = np.random.default_rng(seed)
        h = rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2))
        sigma2 = 0.3
        try:
            s1, s2 = zf_sinr_db(h, 1.0, sigma2)
        except SingularChannelError:
            return
        solo1 = 10 * math.log10(np.sum(np.abs(h[:, 0]) ** 2) / sigma2)
        solo2 = 10 * math.log10(np.sum(np.abs(h[:, 1]) ** 2) / sigma2)
        assert s1 <= solo1 + 1e-9
        assert s2 <= solo2 + 1e-9


class TestChannelEstimation:
    def _channel(self):
        return draw_channel(UeNode(rnti=5, position=(4.0, 4.0)), default_array(), 3)

    def test_ideal_estimation_is_exact(self):
        ch = self._channel()
        np.testing.assert_array_equal(estimate_channel(ch, 0), ch.h)

    def test_estimation_error_scales_with_est_snr(self):
        ch = self._channel()
        rng = np.random.default_rng(0)
        errs = []
        for snr in (10.0, 30.0):
            draws = [np.abs(estimate_channel(ch, 0, snr, rng) - ch.h) ** 2
                     for _ in range(500)]
            errs.append(np.mean(draws))
        assert errs[0] / errs[1] == pytest.approx(100.0, rel=0.2)

    def test_invalid_dmrs_port_rejected(self):
        with pytest.raises(ValueError):
            estimate_channel(self._channel(), 1)


class TestPortCsi:
    def test_snr_rsrp_noise_identity(self):
        ch = draw_channel(UeNode(rnti=2, position=(6.0, 3.0)), default_array(), 9)
        csi = compute_port_csi(ch, p_tx_dbm=23.0)
        noise_dbm = 10 * np.log10(ch.noise_var * 1000.0)
        np.testing.assert_allclose(csi.snr_db, csi.rsrp_dbm - noise_dbm)
        np.testing.assert_allclose(csi.epre_dbm, csi.rsrp_dbm)

    def test_faulted_antenna_reports_floor(self):
        from cflab.topology import apply_fault
        ch = apply_fault(
            draw_channel(UeNode(rnti=2, position=(6.0, 3.0)), default_array(), 9),
            4, True)
        csi = compute_port_csi(ch, 23.0)
        assert csi.rsrp_dbm[4] == -160.0
        assert all(csi.rsrp_dbm[a] > -160.0 for a in range(8) if a != 4)


class TestActiveMask:
    def test_or_of_selections(self):
        a = UeCfConfig(selection=np.array([1, 1, 0, 0, 1, 0, 0, 0], dtype=np.int8))
        b = UeCfConfig(selection=np.array([0, 1, 1, 0, 0, 0, 0, 1], dtype=np.int8))
        np.testing.assert_array_equal(
            active_mask(a, b),
            np.array([1, 1, 1, 0, 1, 0, 0, 1], dtype=bool))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            active_mask(UeCfConfig.all_on(8), UeCfConfig.all_on(4))


def _slot_fixtures(noise_dbm=-70.0):
    arr = default_array()
    ues = [UeNode(rnti=1, position=(3.0, 4.0)), UeNode(rnti=2, position=(7.0, 6.0))]
    channels = {u.rnti: draw_channel(u, arr, 5, noise_dbm=noise_dbm) for u in ues}
    cfgs = {u.rnti: UeCfConfig.all_on() for u in ues}
    power = {u.rnti: 10 ** ((23.0 - 30.0) / 10.0) for u in ues}
    return channels, cfgs, power


class TestProcessSlot:
    def test_mu_pair_uses_zf_and_shared_batch_time(self):
        channels, cfgs, power = _slot_fixtures()
        pool = [
            PuschPdu(1, 0, 51, 28, 0, False),
            PuschPdu(2, 0, 51, 28, 2, True, rnti_mu=1),
        ]
        reports = process_slot(pool, channels, cfgs, power)
        assert [r.rnti for r in reports] == [1, 2]
        assert all(r.equalizer_kind == "ZF" for r in reports)
        assert reports[0].processing_time_us == reports[1].processing_time_us == 4.1
        assert all(r.active_antenna_count == 8 for r in reports)

    def test_unpaired_pdu_uses_mrc(self):
        channels, cfgs, power = _slot_fixtures()
        reports = process_slot([PuschPdu(1, 0, 51, 28, 0, False)],
                               channels, cfgs, power)
        assert reports[0].equalizer_kind == "MRC"
        assert reports[0].processing_time_us == pytest.approx(4.1 / 2)

    def test_orphan_mu_pdu_raises(self):
        channels, cfgs, power = _slot_fixtures()
        with pytest.raises(PairingError):
            process_slot([PuschPdu(2, 0, 10, 28, 2, True, rnti_mu=9)],
                         channels, cfgs, power)

    def test_singular_pair_falls_back_to_mrc(self):
        channels, cfgs, power = _slot_fixtures()
        channels[2] = channels[2].__class__(
            h=channels[1].h.copy(), noise_var=channels[1].noise_var.copy(),
            fault_mask=np.zeros(8, dtype=bool))
        pool = [
            PuschPdu(1, 0, 51, 28, 0, False),
            PuschPdu(2, 0, 51, 28, 2, True, rnti_mu=1),
        ]
        reports = process_slot(pool, channels, cfgs, power)
        assert [r.equalizer_kind for r in reports] == ["MRC", "MRC"]

    def test_pair_mask_is_or_of_selections(self):
        channels, cfgs, power = _slot_fixtures()
        cfgs[1] = UeCfConfig(selection=np.array([1, 1, 1, 1, 0, 0, 0, 0], np.int8))
        cfgs[2] = UeCfConfig(selection=np.array([0, 0, 1, 1, 1, 1, 0, 0], np.int8))
        pool = [
            PuschPdu(1, 0, 51, 28, 0, False),
            PuschPdu(2, 0, 51, 28, 2, True, rnti_mu=1),
        ]
        reports = process_slot(pool, channels, cfgs, power)
        assert all(r.active_antenna_count == 6 for r in reports)

    def test_high_snr_pair_reaches_top_mcs(self):
        channels, cfgs, power = _slot_fixtures(noise_dbm=-70.0)
        pool = [
            PuschPdu(1, 0, 51, 28, 0, False),
            PuschPdu(2, 0, 51, 28, 2, True, rnti_mu=1),
        ]
        reports = process_slot(pool, channels, cfgs, power)
        assert all(sinr_to_mcs(r.post_eq_sinr_db) == 28 for r in reports)
