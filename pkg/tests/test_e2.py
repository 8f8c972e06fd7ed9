"""Framed JSON codec, subscription/indication cadence and RAN control."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cflab import e2
from cflab.e2 import (
    ControlAck,
    ControlRequest,
    E2Agent,
    FrameLengthError,
    Indication,
    KpmRecord,
    MalformedPayloadError,
    SubscriptionRequest,
    SubscriptionResponse,
    TruncatedFrameError,
    UnknownMessageError,
    decode,
    encode,
    read_frame,
)

# Frozen wire images; any codec change that breaks interop breaks these.
GOLDEN_FRAMES = [
    (SubscriptionRequest(sub_id=1, report_style=4, period_ms=1000,
                         metric_names=["DRB.UETHpUL", "PUSCH.PORT.SNR"]),
     b'\x00\x00\x00\x80{"msg_type":"subscription_request","sub_id":1,'
     b'"report_style":4,"period_ms":1000,'
     b'"metric_names":["DRB.UETHpUL","PUSCH.PORT.SNR"]}'),
    (SubscriptionResponse(sub_id=1, accepted=True, rejected_metrics=[]),
     b'\x00\x00\x00U{"msg_type":"subscription_response","sub_id":1,'
     b'"accepted":true,"rejected_metrics":[]}'),
    (ControlRequest(ctrl_id=3, ran_param_id=32001, ue_id=70,
                    antenna_mask=[1, 1, 1, 1, 1, 1, 1, 0]),
     b'\x00\x00\x00k{"msg_type":"control_request","ctrl_id":3,'
     b'"ran_param_id":32001,"ue_id":70,"antenna_mask":[1,1,1,1,1,1,1,0]}'),
    (ControlAck(ctrl_id=3, applied=True, clamped=False),
     b'\x00\x00\x00E{"msg_type":"control_ack","ctrl_id":3,"applied":true,'
     b'"clamped":false}'),
    (Indication(sub_id=1, timestamp_ms=2000, records=[
        KpmRecord(ue_id=70, metrics={"DRB.UETHpUL": 19.0})]),
     b'\x00\x00\x00p{"msg_type":"indication","sub_id":1,"timestamp_ms":2000,'
     b'"records":[{"ue_id":70,"metrics":{"DRB.UETHpUL":19.0}}]}'),
]


class TestCodecGolden:
    def test_encode_matches_frozen_bytes(self):
        for msg, frame in GOLDEN_FRAMES:
            assert encode(msg) == frame

    def test_decode_frozen_bytes(self):
        for msg, frame in GOLDEN_FRAMES:
            assert decode(frame) == msg

    def test_frame_length_prefix_is_big_endian_payload_length(self):
        frame = encode(ControlAck(ctrl_id=0, applied=False))
        assert int.from_bytes(frame[:4], "big") == len(frame) - 4


class TestCodecErrors:
    def test_truncated_header(self):
        with pytest.raises(TruncatedFrameError):
            decode(b"\x00\x00")

    def test_truncated_payload(self):
        frame = encode(ControlAck(ctrl_id=0, applied=True))
        with pytest.raises(TruncatedFrameError):
            decode(frame[:-3])

    def test_trailing_garbage(self):
        frame = encode(ControlAck(ctrl_id=0, applied=True))
        with pytest.raises(FrameLengthError):
            decode(frame + b"x")

    def test_unknown_msg_type(self):
        payload = b'{"msg_type":"nonsense"}'
        frame = len(payload).to_bytes(4, "big") + payload
        with pytest.raises(UnknownMessageError):
            decode(frame)

    def test_invalid_json(self):
        payload = b"{not json"
        frame = len(payload).to_bytes(4, "big") + payload
        with pytest.raises(MalformedPayloadError):
            decode(frame)

    def test_missing_field(self):
        payload = b'{"msg_type":"control_ack","ctrl_id":1}'
        frame = len(payload).to_bytes(4, "big") + payload
        with pytest.raises(MalformedPayloadError):
            decode(frame)

    def test_non_utf8_payload(self):
        payload = b"\xff\xfe\xfd"
        frame = len(payload).to_bytes(4, "big") + payload
        with pytest.raises(MalformedPayloadError):
            decode(frame)


metric_value = st.one_of(
    st.floats(allow_nan=False, allow_infinity=False, width=32),
    st.lists(st.floats(allow_nan=False, allow_infinity=False, width=32),
             min_size=8, max_size=8),
)
kpm_record = st.builds(
    KpmRecord,
    ue_id=st.integers(min_value=1, max_value=0xFFFF),
    metrics=st.dictionaries(st.sampled_from(sorted(e2.SUPPORTED_METRICS)),
                            metric_value, max_size=6),
)
any_message = st.one_of(
    st.builds(SubscriptionRequest,
              sub_id=st.integers(0, 10**6),
              report_style=st.integers(1, 5),
              period_ms=st.integers(1, 10**5),
              metric_names=st.lists(st.sampled_from(sorted(e2.SUPPORTED_METRICS)),
                                    max_size=10)),
    st.builds(SubscriptionResponse,
              sub_id=st.integers(0, 10**6),
              accepted=st.booleans(),
              rejected_metrics=st.lists(st.text(max_size=20), max_size=4)),
    st.builds(Indication,
              sub_id=st.integers(0, 10**6),
              timestamp_ms=st.integers(0, 10**9),
              records=st.lists(kpm_record, max_size=4)),
    st.builds(ControlRequest,
              ctrl_id=st.integers(0, 10**6),
              ran_param_id=st.integers(0, 10**6),
              ue_id=st.integers(1, 0xFFFF),
              antenna_mask=st.lists(st.integers(0, 1), min_size=8, max_size=8)),
    st.builds(ControlAck,
              ctrl_id=st.integers(0, 10**6),
              applied=st.booleans(),
              clamped=st.booleans()),
)


@settings(max_examples=500, deadline=None)
@given(any_message)
def test_codec_round_trip(msg):
    assert decode(encode(msg)) == msg


def test_read_frame_from_stream():
    frames = [encode(ControlAck(ctrl_id=i, applied=True)) for i in range(3)]
    buf = b"".join(frames)
    pos = [0]

    def read_exactly(n):
        chunk = buf[pos[0]:pos[0] + n]
        assert len(chunk) == n
        pos[0] += n
        return chunk

    for i in range(3):
        payload = read_frame(read_exactly)
        assert e2.decode_payload(payload) == ControlAck(ctrl_id=i, applied=True)
    assert pos[0] == len(buf)


def _agent_with_ues(values=None):
    state = {"values": values or {}}

    def kpm_source():
        return state["values"]

    agent = E2Agent(kpm_source)
    agent.attach_ue(70)
    agent.attach_ue(71)
    return agent, state


class TestSubscriptions:
    def test_accepts_supported_metrics(self):
        agent, _ = _agent_with_ues()
        resp = agent.handle_subscription(
            SubscriptionRequest(0, 4, 1000, ["DRB.UETHpUL", "PUSCH.PORT.SNR"]))
        assert resp == SubscriptionResponse(0, True, [])

    def test_rejects_unknown_metrics_listing_offenders(self):
        agent, _ = _agent_with_ues()
        resp = agent.handle_subscription(
            SubscriptionRequest(0, 4, 1000, ["DRB.UETHpUL", "BOGUS.METRIC"]))
        assert not resp.accepted
        assert resp.rejected_metrics == ["BOGUS.METRIC"]

    def test_rejects_bad_report_style(self):
        agent, _ = _agent_with_ues()
        assert not agent.handle_subscription(
            SubscriptionRequest(0, 6, 1000, ["DRB.UETHpUL"])).accepted

    def test_sub_ids_must_increase(self):
        agent, _ = _agent_with_ues()
        assert agent.handle_subscription(
            SubscriptionRequest(5, 4, 1000, ["DRB.UETHpUL"])).accepted
        assert not agent.handle_subscription(
            SubscriptionRequest(5, 4, 1000, ["DRB.UETHpUL"])).accepted

    def test_periodic_cadence_one_indication_per_period(self):
        values = {70: {"DRB.UETHpUL": 19.0}, 71: {"DRB.UETHpUL": 16.0}}
        agent, _ = _agent_with_ues(values)
        agent.handle_subscription(SubscriptionRequest(0, 4, 1000, ["DRB.UETHpUL"]))
        seen = []
        for now in range(0, 5500, 500):
            seen.extend(agent.report_tick(now))
        assert len(seen) == 5  # due at 1000..5000
        for ind in seen:
            assert [r.ue_id for r in ind.records] == [70, 71]
            assert all("DRB.UETHpUL" in r.metrics for r in ind.records)

    def test_per_port_metrics_serialized_as_lists(self):
        values = {70: {"PUSCH.PORT.SNR": np.arange(8.0)},
                  71: {"PUSCH.PORT.SNR": np.arange(8.0)}}
        agent, _ = _agent_with_ues(values)
        agent.handle_subscription(SubscriptionRequest(0, 4, 1000, ["PUSCH.PORT.SNR"]))
        (ind,) = agent.report_tick(1000)
        roundtrip = decode(encode(ind))
        assert roundtrip.records[0].metrics["PUSCH.PORT.SNR"] == list(range(8))


class TestControl:
    def test_control_stages_until_commit(self):
        agent, _ = _agent_with_ues()
        mask = [1, 1, 1, 1, 1, 1, 1, 0]
        ack = agent.handle_control(ControlRequest(0, 32001, 70, mask))
        assert ack.applied and not ack.clamped
        assert agent.ue_configs[70].selection.sum() == 8  # not yet live
        agent.commit_pending()
        assert list(agent.ue_configs[70].selection) == mask

    def test_wrong_ran_param_rejected(self):
        agent, _ = _agent_with_ues()
        ack = agent.handle_control(ControlRequest(0, 99, 70, [1] * 8))
        assert not ack.applied

    def test_unknown_ue_rejected(self):
        agent, _ = _agent_with_ues()
        assert not agent.handle_control(ControlRequest(0, 32001, 99, [1] * 8)).applied

    def test_ctrl_ids_must_increase(self):
        agent, _ = _agent_with_ues()
        assert agent.handle_control(ControlRequest(1, 32001, 70, [1] * 8)).applied
        assert not agent.handle_control(ControlRequest(1, 32001, 70, [1] * 8)).applied
        assert agent.handle_control(ControlRequest(2, 32001, 70, [1] * 8)).applied

    def test_below_minimum_clamped_to_best_snr_antennas(self):
        snr = np.array([5.0, 30.0, 1.0, 2.0, 40.0, 3.0, 0.0, 4.0])
        agent, _ = _agent_with_ues({70: {"PUSCH.PORT.SNR": snr}})
        ack = agent.handle_control(ControlRequest(0, 32001, 70, [0] * 8))
        assert ack.applied and ack.clamped
        agent.commit_pending()
        sel = agent.ue_configs[70].selection
        assert sel.sum() == 2
        assert sel[1] == 1 and sel[4] == 1

    def test_same_ue_controls_apply_in_order(self):
        agent, _ = _agent_with_ues()
        m1 = [1, 1, 1, 1, 1, 1, 1, 0]
        m2 = [0, 1, 1, 1, 1, 1, 1, 1]
        agent.handle_control(ControlRequest(0, 32001, 70, m1))
        agent.handle_control(ControlRequest(1, 32001, 70, m2))
        agent.commit_pending()
        assert list(agent.ue_configs[70].selection) == m2
