"""Physical layout, seeded channel realizations and antenna faults.

The default deployment is 4 RUs with 2 antennas each (8 UL antennas) in a
100 m^2 indoor area.  Channels are flat (frequency-nonselective) per UE:
log-distance path loss times a seeded Rayleigh fading draw.  Faulted
antennas are hard-zeroed but the clean gain is retained so reconnecting
restores the exact seeded realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_PL0_DB = 40.0
DEFAULT_REF_DISTANCE_M = 1.0
DEFAULT_PL_EXPONENT = 2.2


@dataclass(frozen=True)
class RuAntennaArray:
    """4 RUs x 2 antennas; global antenna index = ru*2 + local."""

    ru_positions: tuple[tuple[float, float], ...]
    antennas_per_ru: int = 2
    ru_output_power_dbm: float = 15.0

    @property
    def num_antennas(self) -> int:
        return len(self.ru_positions) * self.antennas_per_ru

    def antenna_position(self, antenna: int) -> tuple[float, float]:
        if not 0 <= antenna < self.num_antennas:
            raise IndexError(f"antenna index {antenna} out of range")
        return self.ru_positions[antenna // self.antennas_per_ru]

    def antenna_ru(self, antenna: int) -> int:
        if not 0 <= antenna < self.num_antennas:
            raise IndexError(f"antenna index {antenna} out of range")
        return antenna // self.antennas_per_ru


def default_array() -> RuAntennaArray:
    """4 RUs on the corners of a 10 m x 10 m lab, mounted inward."""
    return RuAntennaArray(ru_positions=((1.0, 1.0), (9.0, 1.0), (1.0, 9.0), (9.0, 9.0)))


@dataclass(frozen=True)
class UeNode:
    rnti: int
    position: tuple[float, float]
    tx_power_dbm: float = 23.0
    buffer_bytes: int = 0

    def __post_init__(self):
        if not 0 < self.rnti <= 0xFFFF:
            raise ValueError(f"rnti must be a nonzero 16-bit value, got {self.rnti}")


@dataclass(frozen=True)
class ChannelState:
    """Per-UE flat-fading state over all antennas.

    ``h`` is the masked gain vector (linear amplitude), ``h_clean`` the
    unfaulted seeded realization, ``noise_var`` per-antenna noise power in
    watts.
    """

    h: np.ndarray
    noise_var: np.ndarray
    fault_mask: np.ndarray
    h_clean: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.h_clean is None:
            object.__setattr__(self, "h_clean", self.h.copy())
        if len(self.h) != len(self.noise_var) or len(self.h) != len(self.fault_mask):
            raise ValueError("h, noise_var and fault_mask must have equal length")
        if np.any(self.noise_var <= 0):
            raise ValueError("noise_var must be strictly positive")

    @property
    def num_antennas(self) -> int:
        return len(self.h)


def path_loss_db(
    distance_m: float,
    pl0_db: float = DEFAULT_PL0_DB,
    ref_distance_m: float = DEFAULT_REF_DISTANCE_M,
    exponent: float = DEFAULT_PL_EXPONENT,
) -> float:
    """Log-distance path loss: PL0 + 10*n*log10(d/d0)."""
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return pl0_db + 10.0 * exponent * math.log10(distance_m / ref_distance_m)


def draw_channel(
    ue: UeNode,
    array: RuAntennaArray,
    fading_seed: int,
    noise_dbm: float = -70.0,
    pl_exponent: float = DEFAULT_PL_EXPONENT,
) -> ChannelState:
    """Seeded Rayleigh draw scaled by per-antenna path loss.

    Identical (ue, array, fading_seed) always produce the identical
    realization; the rnti is folded into the seed so co-located UEs fade
    independently.
    """
    n = array.num_antennas
    rng = np.random.default_rng([int(fading_seed) & 0xFFFFFFFF, ue.rnti])
    g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
    amp = np.empty(n)
    for a in range(n):
        pos = array.antenna_position(a)
        d = math.hypot(ue.position[0] - pos[0], ue.position[1] - pos[1])
        d = max(d, 0.1)
        amp[a] = math.sqrt(10.0 ** (-path_loss_db(d, exponent=pl_exponent) / 10.0))
    h_clean = g * amp
    noise_var = np.full(n, 10.0 ** ((noise_dbm - 30.0) / 10.0))
    fault_mask = np.zeros(n, dtype=bool)
    return ChannelState(
        h=h_clean.copy(), noise_var=noise_var, fault_mask=fault_mask, h_clean=h_clean
    )


def apply_fault(channel: ChannelState, antenna: int, faulted: bool) -> ChannelState:
    """Return a new ChannelState with the antenna (dis)connected.

    Reconnecting restores the seeded unfaulted gain exactly.
    """
    if not 0 <= antenna < channel.num_antennas:
        raise IndexError(f"antenna index {antenna} out of range")
    mask = channel.fault_mask.copy()
    mask[antenna] = faulted
    h = channel.h_clean.copy()
    h[mask] = 0.0
    return replace(channel, h=h, fault_mask=mask)
