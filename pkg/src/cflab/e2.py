"""Simplified E2 plane: subscription/indication KPM reporting and RAN
Control carrying the per-UE antenna selection parameter.

Wire format: 4-byte big-endian payload length, then a UTF-8 JSON object
with fixed key order ("msg_type" first, fields in declaration order).
Both ends send the protocol version string ``cfe2/1`` as the first frame
payload.  This stands in for E2AP/ASN.1, which is out of scope; the
semantics (metric names, report styles, the cf_port_selection parameter)
are the faithful part.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .phy import UeCfConfig

PROTOCOL_VERSION = "cfe2/1"
RAN_PARAM_CF_PORT_SELECTION = 32001
MIN_ACTIVE_ANTENNAS = 2

PER_PORT_METRICS = (
    "PUSCH.PORT.SNR",
    "PUSCH.PORT.RSRP",
    "PUSCH.PORT.NVAR",
    "PUSCH.PORT.EPRE",
)
STANDARD_METRICS = (
    "DRB.UETHpUL",
    "DRB.UETHpDL",
    "RRU.PrbUsedUl",
    "RRU.PrbAvailUl",
    "DRB.RlcSduTransmittedVolumeUL",
    "DRB.RlcSduTransmittedVolumeDL",
)
SUPPORTED_METRICS = frozenset(PER_PORT_METRICS + STANDARD_METRICS)


class E2DecodeError(Exception):
    """Base class for frame/payload decode failures."""


class TruncatedFrameError(E2DecodeError):
    """Frame shorter than its declared payload length."""


class FrameLengthError(E2DecodeError):
    """Frame longer than its declared payload length."""


class UnknownMessageError(E2DecodeError):
    """msg_type not registered."""


class MalformedPayloadError(E2DecodeError):
    """Payload is not valid JSON or misses required fields."""


@dataclass(frozen=True)
class KpmRecord:
    ue_id: int
    metrics: dict


@dataclass(frozen=True)
class SubscriptionRequest:
    sub_id: int
    report_style: int
    period_ms: int
    metric_names: list


@dataclass(frozen=True)
class SubscriptionResponse:
    sub_id: int
    accepted: bool
    rejected_metrics: list


@dataclass(frozen=True)
class Indication:
    sub_id: int
    timestamp_ms: int
    records: list  # of KpmRecord


@dataclass(frozen=True)
class ControlRequest:
    ctrl_id: int
    ran_param_id: int
    ue_id: int
    antenna_mask: list  # 8 binary values


@dataclass(frozen=True)
class ControlAck:
    ctrl_id: int
    applied: bool
    clamped: bool = False


# msg_type -> (class, ordered field names, per-field encode/decode hooks)
_REGISTRY: dict[str, tuple] = {}


def register_message(msg_type: str, cls, fields: tuple[str, ...],
                     to_json=None, from_json=None):
    """Register a message class for the codec. ``to_json``/``from_json``
    convert between the dataclass and a plain field dict."""
    _REGISTRY[msg_type] = (cls, fields, to_json, from_json)


def _records_to_json(ind: Indication) -> dict:
    return {
        "sub_id": ind.sub_id,
        "timestamp_ms": ind.timestamp_ms,
        "records": [{"ue_id": r.ue_id, "metrics": r.metrics} for r in ind.records],
    }


def _records_from_json(d: dict) -> Indication:
    return Indication(
        sub_id=d["sub_id"],
        timestamp_ms=d["timestamp_ms"],
        records=[KpmRecord(ue_id=r["ue_id"], metrics=r["metrics"]) for r in d["records"]],
    )


register_message("subscription_request", SubscriptionRequest,
                 ("sub_id", "report_style", "period_ms", "metric_names"))
register_message("subscription_response", SubscriptionResponse,
                 ("sub_id", "accepted", "rejected_metrics"))
register_message("indication", Indication,
                 ("sub_id", "timestamp_ms", "records"),
                 to_json=_records_to_json, from_json=_records_from_json)
register_message("control_request", ControlRequest,
                 ("ctrl_id", "ran_param_id", "ue_id", "antenna_mask"))
register_message("control_ack", ControlAck,
                 ("ctrl_id", "applied", "clamped"))


def _msg_type_of(msg) -> str:
    for name, (cls, _, _, _) in _REGISTRY.items():
        if type(msg) is cls:
            return name
    raise UnknownMessageError(f"unregistered message class {type(msg).__name__}")


def encode(msg) -> bytes:
    """Length-prefixed frame with byte-stable key order."""
    msg_type = _msg_type_of(msg)
    cls, fields_, to_json, _ = _REGISTRY[msg_type]
    body = to_json(msg) if to_json else {f: getattr(msg, f) for f in fields_}
    payload_dict = {"msg_type": msg_type}
    for f in fields_:
        payload_dict[f] = body[f]
    payload = json.dumps(payload_dict, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(payload)) + payload


def decode(frame: bytes):
    """Inverse of encode; raises a distinct E2DecodeError subclass per
    failure mode."""
    if len(frame) < 4:
        raise TruncatedFrameError("frame shorter than the 4-byte length prefix")
    (length,) = struct.unpack(">I", frame[:4])
    payload = frame[4:]
    if len(payload) < length:
        raise TruncatedFrameError(f"declared {length} payload bytes, got {len(payload)}")
    if len(payload) > length:
        raise FrameLengthError(f"declared {length} payload bytes, got {len(payload)}")
    return decode_payload(payload)


def decode_payload(payload: bytes):
    try:
        d = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedPayloadError(str(exc)) from exc
    if not isinstance(d, dict) or "msg_type" not in d:
        raise MalformedPayloadError("payload missing msg_type")
    entry = _REGISTRY.get(d["msg_type"])
    if entry is None:
        raise UnknownMessageError(f"unknown msg_type {d['msg_type']!r}")
    cls, fields_, _, from_json = entry
    try:
        if from_json:
            return from_json(d)
        return cls(**{f: d[f] for f in fields_})
    except (KeyError, TypeError) as exc:
        raise MalformedPayloadError(f"bad {d['msg_type']} payload: {exc}") from exc


def read_frame(read_exactly):
    """Read one frame from a blocking byte source.

    ``read_exactly(n)`` must return exactly n bytes or raise.
    Returns the raw payload bytes.
    """
    header = read_exactly(4)
    (length,) = struct.unpack(">I", header)
    return read_exactly(length)


@dataclass
class _Subscription:
    request: SubscriptionRequest
    next_due_ms: int


class E2Agent:
    """RAN-side endpoint: owns subscriptions and per-UE antenna configs.

    ``kpm_source`` is a callable returning {rnti: {metric_name: value}}
    with the current per-UE values for all supported metrics; the harness
    wires it to the PHY and its counters.  Control changes are staged and
    only become active at commit_pending() (the next slot boundary).
    """

    def __init__(self, kpm_source, num_antennas: int = 8):
        self.kpm_source = kpm_source
        self.num_antennas = num_antennas
        self.ue_configs: dict[int, UeCfConfig] = {}
        self._pending: dict[int, UeCfConfig] = {}
        self._subs: dict[int, _Subscription] = {}
        self._last_sub_id = -1
        self._last_ctrl_id = -1
        self.clock_ms = 0

    def attach_ue(self, rnti: int):
        self.ue_configs[rnti] = UeCfConfig.all_on(self.num_antennas)

    def handle_subscription(self, req: SubscriptionRequest) -> SubscriptionResponse:
        rejected = [m for m in req.metric_names if m not in SUPPORTED_METRICS]
        if rejected or not 1 <= req.report_style <= 5 or req.sub_id <= self._last_sub_id:
            return SubscriptionResponse(req.sub_id, False, rejected)
        self._last_sub_id = req.sub_id
        self._subs[req.sub_id] = _Subscription(req, self.clock_ms + req.period_ms)
        return SubscriptionResponse(req.sub_id, True, [])

    def report_tick(self, now_ms: int) -> list[Indication]:
        """Emit one Indication per subscription due at now_ms, one record
        per attached UE with the requested metrics."""
        self.clock_ms = now_ms
        out = []
        for sub in self._subs.values():
            if now_ms < sub.next_due_ms:
                continue
            sub.next_due_ms += sub.request.period_ms
            values = self.kpm_source()
            records = []
            for rnti in sorted(self.ue_configs):
                ue_vals = values.get(rnti, {})
                metrics = {}
                for name in sub.request.metric_names:
                    v = ue_vals[name]
                    if isinstance(v, np.ndarray):
                        v = [float(x) for x in v]
                    metrics[name] = v
                records.append(KpmRecord(ue_id=rnti, metrics=metrics))
            out.append(Indication(sub.request.sub_id, now_ms, records))
        return out

    def handle_control(self, req: ControlRequest) -> ControlAck:
        """Stage a cf_port_selection update; fewer than 2 active antennas
        are topped back up with the UE's current highest-SNR antennas."""
        if (req.ran_param_id != RAN_PARAM_CF_PORT_SELECTION
                or req.ue_id not in self.ue_configs
                or req.ctrl_id <= self._last_ctrl_id
                or len(req.antenna_mask) != self.num_antennas):
            return ControlAck(req.ctrl_id, applied=False)
        self._last_ctrl_id = req.ctrl_id
        mask = np.asarray(req.antenna_mask, dtype=np.int8).clip(0, 1)
        clamped = False
        if int(mask.sum()) < MIN_ACTIVE_ANTENNAS:
            mask = self._reenable_best(req.ue_id, mask)
            clamped = True
        self._pending[req.ue_id] = UeCfConfig(selection=mask)
        return ControlAck(req.ctrl_id, applied=True, clamped=clamped)

    def _reenable_best(self, rnti: int, mask: np.ndarray) -> np.ndarray:
        values = self.kpm_source()
        snr = np.asarray(values.get(rnti, {}).get("PUSCH.PORT.SNR",
                                                  np.zeros(self.num_antennas)))
        mask = mask.copy()
        for a in np.argsort(-snr):
            if int(mask.sum()) >= MIN_ACTIVE_ANTENNAS:
                break
            mask[a] = 1
        return mask

    def commit_pending(self):
        """Apply staged control updates; called at slot boundaries so a
        mid-slot control never alters that slot's equalization mask."""
        self.ue_configs.update(self._pending)
        self._pending.clear()
