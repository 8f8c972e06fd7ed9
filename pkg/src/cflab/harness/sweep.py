"""Antenna-sweep experiment: performance vs number of selected antennas.

For k = 8 down to 2, 8-k antennas are disconnected at t=0 and the xApp is
left to deselect them; measurements are averaged over 30 simulated seconds
after a fixed convergence window.  All runs share one scenario seed, so the
fading draws are common across k and the throughput trend is paired.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .scenario import FaultEvent, ScenarioConfig, UeSpec, XappConfig
from .sim import run

# Disconnection order for the sweep; antennas 0/1 stay (ZF needs two rows).
FAULT_ORDER = [7, 6, 5, 4, 3, 2]

# Mid-staircase operating point: both UEs near the lab centre with noise
# raised so antenna count moves the post-ZF SINR through the MCS ladder.
SWEEP_NOISE_DBM = -44.0
SWEEP_UE_POSITIONS = [(4.5, 5.0), (5.5, 5.0)]

CONVERGENCE_WINDOW_S = 60
MEASURE_WINDOW_S = 30

CSV_HEADER = "antennas_selected,power_w,total_thpt_mbps,ptime_us,converged"


@dataclass
class SweepRow:
    antennas_selected: int
    power_w: float
    total_thpt_mbps: float
    ptime_us: float
    converged: bool


def sweep_scenario(model_path: str, n_faults: int, seed: int = 7) -> ScenarioConfig:
    ues = [UeSpec(rnti=k + 1, position=SWEEP_UE_POSITIONS[k]) for k in range(2)]
    faults = [FaultEvent(time_s=0, antenna=a, faulted=True)
              for a in FAULT_ORDER[:n_faults]]
    return ScenarioConfig(
        ues=ues,
        noise_dbm=SWEEP_NOISE_DBM,
        fault_schedule=faults,
        duration_s=CONVERGENCE_WINDOW_S + MEASURE_WINDOW_S,
        seed=seed,
        xapp=XappConfig(enabled=True, model_path=model_path),
    )


def sweep_experiment(model_path: str, seed: int = 7) -> list[SweepRow]:
    """One row per k = 8..2; a row is flagged (converged=False) when the
    xApp has not settled on k active antennas inside the convergence
    window, in which case the measurements are still reported."""
    rows = []
    for k in range(8, 1, -1):
        scenario = sweep_scenario(model_path, n_faults=8 - k, seed=seed)
        log = run(scenario)
        converged = all(r.active_antennas == k
                        for r in log.rows[CONVERGENCE_WINDOW_S - 5:CONVERGENCE_WINDOW_S])
        window = log.rows[CONVERGENCE_WINDOW_S:CONVERGENCE_WINDOW_S + MEASURE_WINDOW_S]
        rows.append(SweepRow(
            antennas_selected=k,
            power_w=float(np.mean([r.power_w for r in window])),
            total_thpt_mbps=float(np.mean([r.total_thpt_mbps for r in window])),
            ptime_us=float(np.mean([r.ptime_us for r in window])),
            converged=converged,
        ))
    return rows


def to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.antennas_selected},{r.power_w:.6f},{r.total_thpt_mbps:.6f},"
                  f"{r.ptime_us:.6f},{str(r.converged).lower()}\n")
    return buf.getvalue()
