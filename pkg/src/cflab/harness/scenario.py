"""Scenario configuration: JSON ingestion, validation and defaults.

Defaults reproduce the testbed configuration: 20 MHz at 30 kHz SCS
(51 PRBs), 10-slot TDD period with 3 UL / 6 DL slots, 64QAM UL cap,
4 RUs x 2 antennas.  See docs/scenario.schema.json for the file format.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

N_RE_PER_MHZ_30KHZ = {5: 11, 10: 24, 15: 38, 20: 51, 25: 65, 30: 78, 40: 106,
                      50: 133, 60: 162, 80: 217, 90: 245, 100: 273}


class ScenarioError(Exception):
    """Invalid scenario; ``errors`` lists the offending fields."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid scenario: " + "; ".join(errors))
        self.errors = errors


@dataclass
class UeSpec:
    rnti: int
    position: tuple[float, float]
    tx_power_dbm: float = 23.0
    traffic: str = "full_buffer"  # "full_buffer" or "rate"
    rate_mbps: float = 0.0


@dataclass
class FaultEvent:
    time_s: int
    antenna: int
    faulted: bool


@dataclass
class XappConfig:
    enabled: bool = False
    model_path: str | None = None


@dataclass
class ScenarioConfig:
    ru_positions: tuple = ((1.0, 1.0), (9.0, 1.0), (1.0, 9.0), (9.0, 9.0))
    ues: list = field(default_factory=list)
    bandwidth_mhz: int = 20
    scs_khz: int = 30
    n_re: int = 51
    tdd_period_slots: int = 10
    tdd_ul_slots: int = 3
    tdd_dl_slots: int = 6
    max_ul_mcs: int = 28
    noise_dbm: float = -70.0
    pl_exponent: float = 2.2
    est_snr_db: float = math.inf
    fault_schedule: list = field(default_factory=list)
    duration_s: int = 10
    seed: int = 1
    xapp: XappConfig = field(default_factory=XappConfig)

    def validate(self):
        errors = []
        if not self.ru_positions:
            errors.append("ru_positions: at least one RU required")
        if not self.ues:
            errors.append("ues: at least one UE required")
        rntis = [u.rnti for u in self.ues]
        if len(set(rntis)) != len(rntis):
            errors.append("ues: duplicate rnti")
        for u in self.ues:
            if not 0 < u.rnti <= 0xFFFF:
                errors.append(f"ues: rnti {u.rnti} not a nonzero 16-bit value")
            if u.traffic not in ("full_buffer", "rate"):
                errors.append(f"ues: unknown traffic kind {u.traffic!r}")
            if u.traffic == "rate" and u.rate_mbps <= 0:
                errors.append(f"ues: rnti {u.rnti} rate traffic needs rate_mbps > 0")
        if self.tdd_ul_slots + self.tdd_dl_slots > self.tdd_period_slots:
            errors.append("tdd: ul_slots + dl_slots exceeds period_slots")
        if self.tdd_ul_slots < 1:
            errors.append("tdd: at least one UL slot required")
        expected_re = N_RE_PER_MHZ_30KHZ.get(self.bandwidth_mhz)
        if self.scs_khz != 30:
            errors.append("scs_khz: only 30 kHz supported")
        elif expected_re is not None and self.n_re != expected_re:
            errors.append(f"n_re: {self.n_re} inconsistent with {self.bandwidth_mhz} MHz "
                          f"at 30 kHz (expected {expected_re})")
        if not 0 <= self.max_ul_mcs <= 28:
            errors.append("max_ul_mcs: must be 0..28")
        n_ant = 2 * len(self.ru_positions)
        for ev in self.fault_schedule:
            if not 0 <= ev.antenna < n_ant:
                errors.append(f"fault_schedule: antenna {ev.antenna} out of range")
            if ev.time_s < 0:
                errors.append("fault_schedule: negative time")
        if self.duration_s < 1:
            errors.append("duration_s: must be >= 1")
        if self.xapp.enabled and not self.xapp.model_path:
            errors.append("xapp: enabled but no model_path")
        if errors:
            raise ScenarioError(errors)
        return self

    @property
    def num_antennas(self) -> int:
        return 2 * len(self.ru_positions)

    @property
    def ul_slot_indices(self) -> set:
        """UL slots occupy the tail of each TDD period."""
        return set(range(self.tdd_period_slots - self.tdd_ul_slots,
                         self.tdd_period_slots))

    # JSON ----------------------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        try:
            ues = [
                UeSpec(
                    rnti=u["rnti"],
                    position=tuple(u["position"]),
                    tx_power_dbm=u.get("tx_power_dbm", 23.0),
                    traffic=u.get("traffic", "full_buffer"),
                    rate_mbps=u.get("rate_mbps", 0.0),
                )
                for u in d.get("ues", [])
            ]
            faults = [
                FaultEvent(time_s=ev["time_s"], antenna=ev["antenna"],
                           faulted=ev["faulted"])
                for ev in d.get("fault_schedule", [])
            ]
            tdd = d.get("tdd", {})
            xapp = d.get("xapp", {})
            est = d.get("est_snr_db")
            return cls(
                ru_positions=tuple(tuple(p) for p in d.get(
                    "ru_positions", cls.ru_positions)),
                ues=ues,
                bandwidth_mhz=d.get("bandwidth_mhz", 20),
                scs_khz=d.get("scs_khz", 30),
                n_re=d.get("n_re", 51),
                tdd_period_slots=tdd.get("period_slots", 10),
                tdd_ul_slots=tdd.get("ul_slots", 3),
                tdd_dl_slots=tdd.get("dl_slots", 6),
                max_ul_mcs=d.get("max_ul_mcs", 28),
                noise_dbm=d.get("noise_dbm", -70.0),
                pl_exponent=d.get("pl_exponent", 2.2),
                est_snr_db=math.inf if est is None else float(est),
                fault_schedule=faults,
                duration_s=d.get("duration_s", 10),
                seed=d.get("seed", 1),
                xapp=XappConfig(enabled=xapp.get("enabled", False),
                                model_path=xapp.get("model_path")),
            )
        except (KeyError, TypeError) as exc:
            raise ScenarioError([f"malformed scenario: {exc}"]) from exc

    @classmethod
    def from_file(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as exc:
                raise ScenarioError([f"not valid JSON: {exc}"]) from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "ru_positions": [list(p) for p in self.ru_positions],
            "ues": [
                {"rnti": u.rnti, "position": list(u.position),
                 "tx_power_dbm": u.tx_power_dbm, "traffic": u.traffic,
                 "rate_mbps": u.rate_mbps}
                for u in self.ues
            ],
            "bandwidth_mhz": self.bandwidth_mhz,
            "scs_khz": self.scs_khz,
            "n_re": self.n_re,
            "tdd": {"period_slots": self.tdd_period_slots,
                    "ul_slots": self.tdd_ul_slots,
                    "dl_slots": self.tdd_dl_slots},
            "max_ul_mcs": self.max_ul_mcs,
            "noise_dbm": self.noise_dbm,
            "pl_exponent": self.pl_exponent,
            "est_snr_db": None if math.isinf(self.est_snr_db) else self.est_snr_db,
            "fault_schedule": [
                {"time_s": ev.time_s, "antenna": ev.antenna, "faulted": ev.faulted}
                for ev in self.fault_schedule
            ],
            "duration_s": self.duration_s,
            "seed": self.seed,
            "xapp": {"enabled": self.xapp.enabled, "model_path": self.xapp.model_path},
        }


def default_scenario(n_ues: int = 2, duration_s: int = 10, seed: int = 1,
                     noise_dbm: float = -70.0) -> ScenarioConfig:
    """Two UEs on the lab floor, full buffer, no xApp."""
    positions = [(3.0, 4.0), (7.0, 6.0), (5.0, 2.5), (2.5, 7.0)]
    ues = [UeSpec(rnti=k + 1, position=positions[k % len(positions)])
           for k in range(n_ues)]
    return ScenarioConfig(ues=ues, duration_s=duration_s, seed=seed,
                          noise_dbm=noise_dbm)
