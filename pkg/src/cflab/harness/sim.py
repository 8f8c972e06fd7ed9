"""Slot-clock simulation loop wiring scheduler -> PHY -> E2 -> xApp.

Block fading redrawn once per KPM second; scheduler and PHY run on each
UL slot of the TDD pattern; indications fire at the end of every second
and xApp controls are committed at the next second's first slot boundary.
Everything is driven by explicit seeded generators, so a (scenario, seed)
pair reproduces the byte-identical metrics log, xApp in the loop.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import phy, scheduler, topology
from ..e2 import (
    PER_PORT_METRICS,
    E2Agent,
    SubscriptionRequest,
)
from ..xapp.agent import AntennaXapp
from ..xapp.dqn import DqnModel
from ..xapp.pretrain import LINK_ADAPTATION_BACKOFF_DB
from .scenario import ScenarioConfig

logger = logging.getLogger(__name__)

DL_CAPACITY_MBPS = 127.0
BLER_MARGIN_DB = 1.0
BLER_LOW = 0.001
BLER_HIGH = 0.1
MAX_RETX_ATTEMPTS = 3
FULL_BUFFER_BYTES = 10_000_000

CSV_HEADER = "time_s,ue_id,thpt_mbps,total_thpt_mbps,active_antennas,power_w,ptime_us,actions"

# The 6 metrics of the demo subscription: the 2 standardized throughput
# KPMs plus the 4 per-port CSI metrics.
DEMO_METRICS = ["DRB.UETHpUL", "DRB.UETHpDL"] + list(PER_PORT_METRICS)


@dataclass
class MetricsRow:
    time_s: int
    per_ue_thpt_mbps: dict
    total_thpt_mbps: float
    active_antennas: int
    power_w: float
    ptime_us: float
    actions: int
    per_port_snr: dict = field(default_factory=dict)
    per_port_rsrp: dict = field(default_factory=dict)
    dl_thpt_mbps: float = 0.0


@dataclass
class MetricsLog:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        for row in self.rows:
            for rnti in sorted(row.per_ue_thpt_mbps):
                buf.write(
                    f"{row.time_s},{rnti},{row.per_ue_thpt_mbps[rnti]:.6f},"
                    f"{row.total_thpt_mbps:.6f},{row.active_antennas},"
                    f"{row.power_w:.6f},{row.ptime_us:.6f},{row.actions}\n"
                )
        return buf.getvalue()

    def write_csv(self, path: str):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.to_csv())


@dataclass
class _RetxState:
    mcs: int
    n_prb: int
    attempts: int = 0


class Simulator:
    """Single-writer simulation state; step_second() advances the clock."""

    def __init__(self, scenario: ScenarioConfig):
        scenario.validate()
        self.scenario = scenario
        self.array = topology.RuAntennaArray(ru_positions=scenario.ru_positions)
        self.ues = {
            u.rnti: topology.UeNode(rnti=u.rnti, position=u.position,
                                    tx_power_dbm=u.tx_power_dbm)
            for u in scenario.ues
        }
        self.tx_power_w = {
            r: 10.0 ** ((u.tx_power_dbm - 30.0) / 10.0) for r, u in self.ues.items()
        }
        self.fault_state = [False] * scenario.num_antennas
        self.channels: dict[int, topology.ChannelState] = {}
        self.second = 0
        self.slots_per_second = int(round(1.0 / phy.SLOT_SECONDS))

        self.agent = E2Agent(self._kpm_values, num_antennas=scenario.num_antennas)
        for rnti in self.ues:
            self.agent.attach_ue(rnti)

        self.xapp = None
        if scenario.xapp.enabled:
            self.xapp = AntennaXapp(DqnModel.load(scenario.xapp.model_path),
                                    num_antennas=scenario.num_antennas)
            resp = self.agent.handle_subscription(
                SubscriptionRequest(sub_id=0, report_style=4, period_ms=1000,
                                    metric_names=DEMO_METRICS))
            assert resp.accepted

        self._bler_rng = np.random.default_rng([scenario.seed, 0xB1E2])
        self._est_rng = np.random.default_rng([scenario.seed, 0xE527])
        self._retx: dict[int, _RetxState] = {}
        self._buffers = {r: 0.0 for r in self.ues}
        self._last_thpt = {r: 0.0 for r in self.ues}
        self._last_prb_used = 0.0
        self._bytes_ul = {r: 0.0 for r in self.ues}
        self._traffic = {u.rnti: u for u in scenario.ues}
        self.log = MetricsLog()
        self._redraw_channels()

    # fading / faults -----------------------------------------------------

    def _redraw_channels(self):
        for rnti, ue in self.ues.items():
            ch = topology.draw_channel(
                ue, self.array,
                fading_seed=(self.scenario.seed * 1_000_003 + self.second) & 0x7FFFFFFF,
                noise_dbm=self.scenario.noise_dbm,
                pl_exponent=self.scenario.pl_exponent,
            )
            for a, f in enumerate(self.fault_state):
                if f:
                    ch = topology.apply_fault(ch, a, True)
            self.channels[rnti] = ch

    def set_fault(self, antenna: int, faulted: bool):
        """Applied immediately to the current channel states."""
        self.fault_state[antenna] = faulted
        for rnti, ch in self.channels.items():
            self.channels[rnti] = topology.apply_fault(ch, antenna, faulted)

    def move_ue(self, rnti: int, x: float, y: float):
        """Takes effect at the next block-fading redraw."""
        if rnti not in self.ues:
            raise KeyError(f"unknown UE {rnti}")
        old = self.ues[rnti]
        self.ues[rnti] = topology.UeNode(rnti=rnti, position=(x, y),
                                         tx_power_dbm=old.tx_power_dbm)

    # KPM source ----------------------------------------------------------

    def _kpm_values(self) -> dict:
        out = {}
        n_ues = max(len(self.ues), 1)
        for rnti, ch in self.channels.items():
            csi = phy.compute_port_csi(ch, self.ues[rnti].tx_power_dbm)
            out[rnti] = {
                "PUSCH.PORT.SNR": csi.snr_db,
                "PUSCH.PORT.RSRP": csi.rsrp_dbm,
                "PUSCH.PORT.NVAR": csi.noise_var,
                "PUSCH.PORT.EPRE": csi.epre_dbm,
                "DRB.UETHpUL": self._last_thpt[rnti],
                "DRB.UETHpDL": DL_CAPACITY_MBPS / n_ues,
                "RRU.PrbUsedUl": self._last_prb_used,
                "RRU.PrbAvailUl": float(self.scenario.n_re),
                "DRB.RlcSduTransmittedVolumeUL": self._bytes_ul[rnti],
                "DRB.RlcSduTransmittedVolumeDL": 0.0,
            }
        return out

    # main loop -----------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self.second >= self.scenario.duration_s

    def step_second(self) -> MetricsRow:
        """Advance one simulated second and append its metrics row."""
        sc = self.scenario
        k = self.second
        for ev in sc.fault_schedule:
            if ev.time_s == k:
                self.set_fault(ev.antenna, ev.faulted)
        self.agent.commit_pending()
        self._redraw_channels()
        for rnti, spec in self._traffic.items():
            if spec.traffic == "rate":
                self._buffers[rnti] += spec.rate_mbps * 1e6 / 8.0

        bits = {r: 0.0 for r in self.ues}
        zf_batch_times = []
        mrc_times = []
        prb_used = 0
        ul_slots = 0
        base_slot = k * self.slots_per_second
        for s in range(self.slots_per_second):
            slot = base_slot + s
            if slot % sc.tdd_period_slots not in sc.ul_slot_indices:
                continue
            ul_slots += 1
            used = self._run_ul_slot(slot, bits, zf_batch_times, mrc_times)
            prb_used += used

        for rnti in self.ues:
            self._last_thpt[rnti] = bits[rnti] * 1e-6
            self._bytes_ul[rnti] += bits[rnti] / 8.0
        self._last_prb_used = prb_used / max(ul_slots, 1)

        configs = [self.agent.ue_configs[r] for r in self.ues]
        shared = configs[0].selection.astype(bool)
        for cfg in configs[1:]:
            shared = shared | cfg.selection.astype(bool)
        n_active = int(shared.sum())
        if zf_batch_times:
            ptime = float(np.mean(zf_batch_times))
        elif mrc_times:
            ptime = 2.0 * float(np.mean(mrc_times))
        else:
            ptime = phy.processing_time_us(min(max(n_active, 2), 8), "ZF")

        actions = 0
        indications = self.agent.report_tick((k + 1) * 1000)
        if self.xapp is not None:
            for ind in indications:
                for req in self.xapp.step(ind):
                    ack = self.agent.handle_control(req)
                    if ack.applied:
                        actions += 1

        csis = {r: phy.compute_port_csi(ch, self.ues[r].tx_power_dbm)
                for r, ch in self.channels.items()}
        row = MetricsRow(
            time_s=k,
            per_ue_thpt_mbps={r: bits[r] * 1e-6 for r in self.ues},
            total_thpt_mbps=sum(bits.values()) * 1e-6,
            active_antennas=n_active,
            power_w=phy.processor_power_w(min(max(n_active, 2), 8)),
            ptime_us=ptime,
            actions=actions,
            per_port_snr={r: csis[r].snr_db.tolist() for r in self.ues},
            per_port_rsrp={r: csis[r].rsrp_dbm.tolist() for r in self.ues},
            dl_thpt_mbps=DL_CAPACITY_MBPS if self.ues else 0.0,
        )
        self.log.rows.append(row)
        self.second += 1
        return row

    def _run_ul_slot(self, slot: int, bits: dict, zf_batch_times: list,
                     mrc_times: list) -> int:
        sc = self.scenario
        requests = []
        for rnti in scheduler.round_robin_order(list(self.ues), slot):
            retx = self._retx.get(rnti)
            if retx is not None:
                requests.append(scheduler.SchedRequest(
                    rnti=rnti, is_retx=True, retx_mcs=retx.mcs,
                    retx_n_prb=retx.n_prb))
                continue
            buffered = self._pending_bytes(rnti)
            if buffered <= 0:
                continue
            sinr = self._scheduler_sinr(rnti)
            requests.append(scheduler.SchedRequest(
                rnti=rnti, buffer_bytes=buffered, wideband_sinr_db=sinr))
        if not requests:
            return 0

        bm = scheduler.ReBitmaps(n_re=sc.n_re)
        grants, pdus, _ = scheduler.schedule_slot(requests, bm, slot_index=slot)
        if not pdus:
            return 0
        configs = {r: self.agent.ue_configs[r] for r in self.ues}
        reports = phy.process_slot(pdus, self.channels, configs, self.tx_power_w,
                                   est_snr_db=sc.est_snr_db, rng=self._est_rng)

        grant_by_rnti = {g.rnti: g for g in grants}
        seen_zf_rntis = set()
        for rep in reports:
            if rep.equalizer_kind == "ZF":
                if rep.rnti not in seen_zf_rntis:
                    # one batch time per pair; reports of a pair are adjacent
                    pair_idx = reports.index(rep)
                    zf_batch_times.append(rep.processing_time_us)
                    seen_zf_rntis.add(rep.rnti)
                    seen_zf_rntis.add(reports[pair_idx + 1].rnti)
            else:
                mrc_times.append(rep.processing_time_us)
            grant = grant_by_rnti[rep.rnti]
            self._resolve_harq(rep, grant, bits)
        return sum(g.re_length for g in grants)

    def _scheduler_sinr(self, rnti: int) -> float:
        cfg = self.agent.ue_configs[rnti]
        mask = cfg.selection.astype(bool)
        ch = self.channels[rnti]
        if not mask.any() or not np.any(np.abs(ch.h[mask]) > 0):
            return phy.SINR_THRESHOLDS_DB[0]
        sinr = phy.mrc_sinr_db(ch.h, mask, self.tx_power_w[rnti], ch.noise_var)
        sinr -= LINK_ADAPTATION_BACKOFF_DB
        cap = phy.SINR_THRESHOLDS_DB[self.scenario.max_ul_mcs] + 0.5
        return min(sinr, cap)

    def _pending_bytes(self, rnti: int) -> int:
        if self._traffic[rnti].traffic == "full_buffer":
            return FULL_BUFFER_BYTES
        return int(self._buffers[rnti])

    def _resolve_harq(self, report, grant, bits: dict):
        threshold = phy.SINR_THRESHOLDS_DB[grant.mcs]
        p_err = BLER_HIGH if report.post_eq_sinr_db < threshold + BLER_MARGIN_DB else BLER_LOW
        failed = self._bler_rng.random() < p_err
        rnti = report.rnti
        if not failed:
            tb_bits = phy.transport_block_bits(grant.re_length, grant.mcs)
            bits[rnti] += tb_bits
            if self._traffic[rnti].traffic == "rate":
                self._buffers[rnti] = max(0.0, self._buffers[rnti] - tb_bits / 8.0)
            self._retx.pop(rnti, None)
            return
        state = self._retx.get(rnti)
        if state is None:
            self._retx[rnti] = _RetxState(mcs=grant.mcs, n_prb=grant.re_length)
        else:
            state.attempts += 1
            if state.attempts >= MAX_RETX_ATTEMPTS:
                self._retx.pop(rnti, None)


def run(scenario: ScenarioConfig) -> MetricsLog:
    """Run a scenario to completion and return its metrics log."""
    sim = Simulator(scenario)
    while not sim.finished:
        sim.step_second()
    return sim.log
