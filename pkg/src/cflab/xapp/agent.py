"""Antenna-association xApp: observation building, action decoding, the
reward trade-off and the live per-indication control loop.

One action per UE per KPM round; a control message is only sent when the
decoded action actually changes the UE's antenna mask.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from ..e2 import (
    MIN_ACTIVE_ANTENNAS,
    RAN_PARAM_CF_PORT_SELECTION,
    ControlRequest,
    Indication,
    KpmRecord,
)
from ..phy import UeCfConfig
from .dqn import DqnModel, N_ANTENNAS

logger = logging.getLogger(__name__)

REWARD_ALPHA = 1.0  # per Mbps of total throughput
REWARD_BETA = 5.0   # per us of ZF processing time

OBS_METRICS = ("PUSCH.PORT.SNR", "PUSCH.PORT.RSRP", "PUSCH.PORT.EPRE")


class MissingMetricError(Exception):
    pass


def build_observation(record: KpmRecord, cf_sel: UeCfConfig) -> np.ndarray:
    """8x4 observation: [active_status, snr_norm, rsrp_norm, epre_norm]."""
    for name in OBS_METRICS:
        if name not in record.metrics:
            raise MissingMetricError(f"record for UE {record.ue_id} lacks {name}")
    snr = np.asarray(record.metrics["PUSCH.PORT.SNR"], dtype=np.float64)
    rsrp = np.asarray(record.metrics["PUSCH.PORT.RSRP"], dtype=np.float64)
    epre = np.asarray(record.metrics["PUSCH.PORT.EPRE"], dtype=np.float64)
    obs = np.empty((N_ANTENNAS, 4))
    obs[:, 0] = cf_sel.selection
    obs[:, 1] = np.clip((snr + 10.0) / 50.0, 0.0, 1.0)
    obs[:, 2] = np.clip((rsrp + 160.0) / 160.0, 0.0, 1.0)
    obs[:, 3] = np.clip((epre + 160.0) / 160.0, 0.0, 1.0)
    return obs


def decode_action(idx: int) -> tuple[int, str]:
    """0..7 -> activate that antenna; 8..15 -> deactivate antenna idx-8."""
    if not 0 <= idx < 16:
        raise ValueError(f"action index {idx} out of range")
    if idx < N_ANTENNAS:
        return idx, "activate"
    return idx - N_ANTENNAS, "deactivate"


def encode_action(antenna: int, op: str) -> int:
    if not 0 <= antenna < N_ANTENNAS:
        raise ValueError(f"antenna {antenna} out of range")
    return antenna if op == "activate" else antenna + N_ANTENNAS


@dataclass(frozen=True)
class MetricSnapshot:
    total_thpt_mbps: float
    ptime_us: float


def reward(prev: MetricSnapshot, action: int, next_: MetricSnapshot,
           alpha: float = REWARD_ALPHA, beta: float = REWARD_BETA) -> float:
    """Throughput gain traded against equalizer processing time."""
    return (alpha * (next_.total_thpt_mbps - prev.total_thpt_mbps)
            - beta * (next_.ptime_us - prev.ptime_us))


def apply_action(selection: np.ndarray, action: int) -> np.ndarray:
    """New mask with the decoded action applied; never drops below the
    2-antenna ZF minimum (the RAN clamps too, this keeps the mirror in sync)."""
    antenna, op = decode_action(action)
    new = selection.copy()
    new[antenna] = 1 if op == "activate" else 0
    if int(new.sum()) < MIN_ACTIVE_ANTENNAS:
        return selection.copy()
    return new


class AntennaXapp:
    """Greedy policy over a trained model, driving E2 RAN Control."""

    def __init__(self, model: DqnModel, num_antennas: int = N_ANTENNAS):
        self.model = model
        self.num_antennas = num_antennas
        self.masks: dict[int, UeCfConfig] = {}
        self._next_ctrl_id = 0
        self.decision_log: list[dict] = []
        self._prev_metrics: dict[int, dict[str, np.ndarray]] = {}

    def _debounced(self, record: KpmRecord) -> KpmRecord:
        """Per-port max over the last two KPM rounds.

        A single-round deep fade on a healthy port then looks healthy
        (the other round is normal), while a truly dead port sits at the
        reporting floor on both rounds within two rounds of the fault.
        Recovery is visible immediately: one healthy round lifts the max."""
        cur = {name: np.asarray(record.metrics[name], dtype=np.float64)
               for name in OBS_METRICS if name in record.metrics}
        prev = self._prev_metrics.get(record.ue_id)
        self._prev_metrics[record.ue_id] = cur
        if prev is None:
            return record
        merged = dict(record.metrics)
        for name, vals in cur.items():
            if name in prev and prev[name].shape == vals.shape:
                merged[name] = np.maximum(vals, prev[name]).tolist()
        return KpmRecord(ue_id=record.ue_id, metrics=merged)

    def observe_ue(self, rnti: int):
        if rnti not in self.masks:
            self.masks[rnti] = UeCfConfig.all_on(self.num_antennas)

    def step(self, indication: Indication) -> list[ControlRequest]:
        """At most one ControlRequest per UE in the indication."""
        out = []
        for record in indication.records:
            self.observe_ue(record.ue_id)
            mask = self.masks[record.ue_id]
            try:
                obs = build_observation(self._debounced(record), mask)
            except MissingMetricError as exc:
                logger.warning("skipping UE %d: %s", record.ue_id, exc)
                continue
            t0 = time.perf_counter()
            q = self.model.forward(obs)
            action = int(np.argmax(q))
            inference_ms = (time.perf_counter() - t0) * 1e3
            antenna, op = decode_action(action)
            new_sel = apply_action(mask.selection, action)
            sent = not np.array_equal(new_sel, mask.selection)
            self.decision_log.append({
                "t_ms": indication.timestamp_ms,
                "ue_id": record.ue_id,
                "antenna": antenna,
                "op": op,
                "sent": sent,
                "inference_ms": round(inference_ms, 4),
            })
            if not sent:
                continue
            self.masks[record.ue_id] = UeCfConfig(selection=new_sel)
            req = ControlRequest(
                ctrl_id=self._next_ctrl_id,
                ran_param_id=RAN_PARAM_CF_PORT_SELECTION,
                ue_id=record.ue_id,
                antenna_mask=[int(v) for v in new_sel],
            )
            self._next_ctrl_id += 1
            out.append(req)
        return out
