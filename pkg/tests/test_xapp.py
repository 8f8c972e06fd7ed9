"""Observation building, action semantics, reward and the control loop."""

import numpy as np
import pytest

from cflab.e2 import Indication, KpmRecord, RAN_PARAM_CF_PORT_SELECTION
from cflab.phy import UeCfConfig
from cflab.xapp.agent import (
    AntennaXapp,
    MetricSnapshot,
    MissingMetricError,
    apply_action,
    build_observation,
    decode_action,
    encode_action,
    reward,
)
from cflab.xapp.dqn import DqnModel


def record(ue_id=70, snr=None, rsrp=None, epre=None):
    snr = np.full(8, 20.0) if snr is None else np.asarray(snr, float)
    rsrp = np.full(8, -40.0) if rsrp is None else np.asarray(rsrp, float)
    epre = rsrp.copy() if epre is None else np.asarray(epre, float)
    return KpmRecord(ue_id=ue_id, metrics={
        "PUSCH.PORT.SNR": snr,
        "PUSCH.PORT.RSRP": rsrp,
        "PUSCH.PORT.EPRE": epre,
    })


class TestObservation:
    def test_shape_and_columns(self):
        sel = UeCfConfig(selection=np.array([1, 0, 1, 1, 1, 1, 1, 1], np.int8))
        obs = build_observation(record(), sel)
        assert obs.shape == (8, 4)
        np.testing.assert_array_equal(obs[:, 0], sel.selection)
        np.testing.assert_allclose(obs[:, 1], (20.0 + 10.0) / 50.0)
        np.testing.assert_allclose(obs[:, 2], (-40.0 + 160.0) / 160.0)

    def test_values_clipped_to_unit_interval(self):
        obs = build_observation(
            record(snr=np.full(8, 500.0), rsrp=np.full(8, -500.0)),
            UeCfConfig.all_on())
        assert obs[:, 1:].min() >= 0.0 and obs[:, 1:].max() <= 1.0

    def test_faulted_antenna_floor_maps_to_zero(self):
        rsrp = np.full(8, -40.0)
        rsrp[3] = -160.0
        obs = build_observation(record(rsrp=rsrp), UeCfConfig.all_on())
        assert obs[3, 2] == 0.0

    def test_missing_metric_raises(self):
        rec = KpmRecord(ue_id=70, metrics={"PUSCH.PORT.SNR": [0.0] * 8})
        with pytest.raises(MissingMetricError):
            build_observation(rec, UeCfConfig.all_on())


class TestActionCoding:
    @pytest.mark.parametrize("idx,expect", [
        (0, (0, "activate")), (7, (7, "activate")),
        (8, (0, "deactivate")), (15, (7, "deactivate")),
    ])
    def test_decode(self, idx, expect):
        assert decode_action(idx) == expect

    def test_encode_decode_round_trip(self):
        for idx in range(16):
            assert encode_action(*decode_action(idx)) == idx

    @pytest.mark.parametrize("idx", [-1, 16])
    def test_out_of_range(self, idx):
        with pytest.raises(ValueError):
            decode_action(idx)


class TestReward:
    def test_tradeoff_formula(self):
        prev = MetricSnapshot(total_thpt_mbps=38.0, ptime_us=4.1)
        nxt = MetricSnapshot(total_thpt_mbps=38.0, ptime_us=4.1 - 1 / 12)
        assert reward(prev, 0, nxt) == pytest.approx(5.0 / 12.0)

    def test_costly_deactivation_is_negative(self):
        prev = MetricSnapshot(38.0, 4.1)
        nxt = MetricSnapshot(36.0, 4.1 - 1 / 12)
        assert reward(prev, 0, nxt) == pytest.approx(-2.0 + 5.0 / 12.0)

    def test_no_change_zero(self):
        snap = MetricSnapshot(30.0, 3.9)
        assert reward(snap, 0, snap) == 0.0


class TestApplyAction:
    def test_deactivate_clears_bit(self):
        sel = np.ones(8, dtype=np.int8)
        out = apply_action(sel, 8 + 5)
        assert out[5] == 0 and out.sum() == 7

    def test_activate_sets_bit(self):
        sel = np.ones(8, dtype=np.int8)
        sel[2] = 0
        assert apply_action(sel, 2)[2] == 1

    def test_never_below_two_active(self):
        sel = np.zeros(8, dtype=np.int8)
        sel[0] = sel[1] = 1
        out = apply_action(sel, 8 + 0)
        np.testing.assert_array_equal(out, sel)

    def test_noop_returns_equal_mask(self):
        sel = np.ones(8, dtype=np.int8)
        np.testing.assert_array_equal(apply_action(sel, 3), sel)


class _FixedModel(DqnModel):
    """Always prefers one fixed action index."""

    def __init__(self, action):
        super().__init__(DqnModel.initialize(np.random.default_rng(0)).params)
        self._action = action

    def forward(self, obs):
        q = np.zeros(16)
        q[self._action] = 1.0
        return q


class TestXappLoop:
    def _indication(self, t_ms=1000, ues=(70, 71)):
        return Indication(sub_id=0, timestamp_ms=t_ms,
                          records=[record(ue_id=u) for u in ues])

    def test_at_most_one_control_per_ue(self):
        xapp = AntennaXapp(_FixedModel(8 + 3))
        out = xapp.step(self._indication())
        assert len(out) == 2
        assert sorted(c.ue_id for c in out) == [70, 71]
        for c in out:
            assert c.ran_param_id == RAN_PARAM_CF_PORT_SELECTION
            assert c.antenna_mask[3] == 0 and sum(c.antenna_mask) == 7

    def test_noop_suppression(self):
        xapp = AntennaXapp(_FixedModel(3))  # activate already-active antenna
        out = xapp.step(self._indication())
        assert out == []
        assert all(not d["sent"] for d in xapp.decision_log)

    def test_repeat_deactivate_not_resent(self):
        xapp = AntennaXapp(_FixedModel(8 + 3))
        assert len(xapp.step(self._indication(1000))) == 2
        assert xapp.step(self._indication(2000)) == []

    def test_ctrl_ids_strictly_increase(self):
        xapp = AntennaXapp(_FixedModel(8 + 3))
        first = xapp.step(self._indication(1000))
        xapp2_ids = [c.ctrl_id for c in first]
        assert xapp2_ids == sorted(set(xapp2_ids))
        xapp.masks[70] = UeCfConfig.all_on()
        xapp.masks[71] = UeCfConfig.all_on()
        second = xapp.step(self._indication(2000))
        assert min(c.ctrl_id for c in second) > max(xapp2_ids)

    def test_missing_metrics_skips_ue(self):
        xapp = AntennaXapp(_FixedModel(8 + 3))
        bad = KpmRecord(ue_id=72, metrics={})
        ind = Indication(sub_id=0, timestamp_ms=1000,
                         records=[record(ue_id=70), bad])
        out = xapp.step(ind)
        assert [c.ue_id for c in out] == [70]

    def test_decision_log_entries(self):
        xapp = AntennaXapp(_FixedModel(8 + 1))
        xapp.step(self._indication(3000, ues=(70,)))
        (entry,) = xapp.decision_log
        assert entry["t_ms"] == 3000
        assert entry["ue_id"] == 70
        assert entry["antenna"] == 1 and entry["op"] == "deactivate"
        assert entry["sent"] is True
        assert entry["inference_ms"] >= 0.0
