"""Simulated upper PHY: equalization, per-port CSI, link and platform models.

No waveform is synthesized; MRC/ZF operate on channel vectors and produce
closed-form post-equalization SINR.  MU pairs are always processed before
unpaired PDUs, mirroring the modified PDU-pool search order.  The
throughput, processing-time and power models are calibrated against the
measured anchors (19 Mbps at MCS 28; the 2/8-antenna endpoints of the
testbed measurement table).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

RSRP_FLOOR_DBM = -160.0
SLOT_SECONDS = 0.0005  # 30 kHz SCS
N_RE_DEFAULT = 51  # 20 MHz at 30 kHz SCS
DATA_SYMBOLS_PER_SLOT = 12  # 14 symbols minus DMRS + control overhead
UL_SLOT_FRACTION = 3.0 / 10.0

# 3GPP 64QAM MCS table: (modulation order Qm, code rate x1024)
MCS_TABLE = [
    (2, 120), (2, 157), (2, 193), (2, 251), (2, 308), (2, 379), (2, 449),
    (2, 526), (2, 602), (2, 679), (4, 340), (4, 378), (4, 434), (4, 490),
    (4, 553), (4, 616), (4, 658), (6, 438), (6, 466), (6, 517), (6, 567),
    (6, 616), (6, 666), (6, 719), (6, 772), (6, 822), (6, 873), (6, 910),
    (6, 948),
]
MAX_MCS = len(MCS_TABLE) - 1

# Monotone SINR staircase spanning -6..22 dB in 1 dB steps.
SINR_THRESHOLDS_DB = [-6.0 + m for m in range(len(MCS_TABLE))]


class SingularChannelError(Exception):
    """ZF channel matrix is rank deficient (collinear UE channels)."""


class PairingError(Exception):
    """A mu_flag PDU has no partner in the pool (invariant breach upstream)."""


@dataclass(frozen=True)
class PortCsi:
    """Per-antenna CSI arrays (lengths equal the antenna count)."""

    snr_db: np.ndarray
    rsrp_dbm: np.ndarray
    noise_var: np.ndarray
    epre_dbm: np.ndarray


@dataclass(frozen=True)
class EqualizerReport:
    rnti: int
    post_eq_sinr_db: float
    active_antenna_count: int
    processing_time_us: float
    equalizer_kind: str  # "MRC" | "ZF"


@dataclass
class UeCfConfig:
    """Per-UE binary antenna selection (1 = antenna contributes)."""

    selection: np.ndarray

    @classmethod
    def all_on(cls, n: int = 8) -> "UeCfConfig":
        return cls(selection=np.ones(n, dtype=np.int8))

    @property
    def active_count(self) -> int:
        return int(np.sum(self.selection))

    def copy(self) -> "UeCfConfig":
        return UeCfConfig(selection=self.selection.copy())


def mcs_to_rate(mcs: int) -> tuple[int, float]:
    """(bits per symbol, code rate) for an MCS index."""
    qm, r1024 = MCS_TABLE[mcs]
    return qm, r1024 / 1024.0


def sinr_to_mcs(sinr_db: float) -> int:
    """Largest MCS whose SINR threshold does not exceed sinr_db."""
    if sinr_db < SINR_THRESHOLDS_DB[0]:
        return 0
    mcs = int(math.floor(sinr_db - SINR_THRESHOLDS_DB[0]))
    return min(mcs, MAX_MCS)


def bits_per_prb_slot(mcs: int) -> float:
    """Nominal PRB capacity used by the grant estimator (14-symbol slot)."""
    qm, rate = mcs_to_rate(mcs)
    return 12 * 14 * qm * rate


def _raw_mbps(n_re: int, mcs: int, tdd_ul_fraction: float) -> float:
    qm, rate = mcs_to_rate(mcs)
    bits = n_re * 12 * DATA_SYMBOLS_PER_SLOT * qm * rate
    return bits / SLOT_SECONDS * tdd_ul_fraction * 1e-6

# Overhead factor calibrated once against the 19 Mbps full-grid MCS-28 anchor.
OVERHEAD_ETA = 19.0 / _raw_mbps(N_RE_DEFAULT, MAX_MCS, UL_SLOT_FRACTION)


def ue_throughput_mbps(n_re: int, mcs: int, tdd_ul_fraction: float = UL_SLOT_FRACTION) -> float:
    if n_re == 0:
        return 0.0
    return _raw_mbps(n_re, mcs, tdd_ul_fraction) * OVERHEAD_ETA


def transport_block_bits(n_re: int, mcs: int) -> float:
    """Delivered bits for one UL slot grant, consistent with ue_throughput_mbps."""
    qm, rate = mcs_to_rate(mcs)
    return n_re * 12 * DATA_SYMBOLS_PER_SLOT * qm * rate * OVERHEAD_ETA


def processing_time_us(n_active_antennas: int, kind: str) -> float:
    """PUSCH processing time; the ZF figure is per 2-PDU MU batch.

    Affine fit through the measured 2- and 8-antenna endpoints
    (3.6 us and 4.1 us); MRC costs half the ZF batch per PDU.
    """
    n = n_active_antennas
    if kind == "ZF":
        if not 2 <= n <= 8:
            raise ValueError(f"ZF requires 2..8 active antennas, got {n}")
    elif kind == "MRC":
        if n < 1:
            raise ValueError("MRC requires at least one active antenna")
    else:
        raise ValueError(f"unknown equalizer kind {kind!r}")
    t_zf = 3.6 + (n - 2) / 12.0
    return t_zf if kind == "ZF" else t_zf / 2.0


def processor_power_w(n_active_antennas: int) -> float:
    """Host power model; affine fit through the 2/8-antenna endpoints."""
    n = n_active_antennas
    if not 2 <= n <= 8:
        raise ValueError(f"power model covers 2..8 active antennas, got {n}")
    return 54.9 + (n - 2) * (2.0 / 3.0)


def estimate_channel(channel, dmrs_port: int, est_snr_db: float = math.inf, rng=None):
    """DMRS-based estimate: h plus per-antenna complex Gaussian error with
    variance noise_var/10^(est_snr/10).  Orthogonal ports mean the estimate
    depends only on the UE's own channel, so no cross-UE term appears.
    """
    if dmrs_port not in (0, 2, 3):
        raise ValueError(f"unusable DMRS port {dmrs_port}")
    if math.isinf(est_snr_db):
        return channel.h.copy()
    if rng is None:
        rng = np.random.default_rng()
    var = channel.noise_var / (10.0 ** (est_snr_db / 10.0))
    n = channel.num_antennas
    e = np.sqrt(var / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return channel.h + e


def mrc_sinr_db(h_hat, mask, p_tx_w: float, noise_var) -> float:
    """Matched-filter bound: p * sum_{a in mask} |h[a]|^2 / sigma^2_a."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("MRC needs at least one active antenna")
    sinr = p_tx_w * float(np.sum(np.abs(h_hat[mask]) ** 2 / np.asarray(noise_var)[mask]))
    return 10.0 * math.log10(max(sinr, 1e-30))


def zf_sinr_db(h_matrix, p_tx_w, noise_var_w: float) -> tuple[float, float]:
    """Post-ZF SINR for 2 paired UEs: SINR_k = p_k / (sigma^2 [(H^H H)^-1]_kk).

    ``h_matrix`` is (active_antennas x 2); ``p_tx_w`` may be a scalar or a
    per-UE pair.  Raises SingularChannelError on collinear channels.
    """
    h = np.asarray(h_matrix)
    if h.ndim != 2 or h.shape[1] != 2 or h.shape[0] < 2:
        raise ValueError(f"ZF needs an (>=2 x 2) channel matrix, got {h.shape}")
    if np.isscalar(p_tx_w):
        p = (float(p_tx_w), float(p_tx_w))
    else:
        p = (float(p_tx_w[0]), float(p_tx_w[1]))
    g = h.conj().T @ h
    g00 = g[0, 0].real
    g11 = g[1, 1].real
    det = g00 * g11 - abs(g[0, 1]) ** 2
    if det <= 1e-12 * max(g00 * g11, 1e-300):
        raise SingularChannelError("collinear UE channels, ZF combiner singular")
    inv_diag = (g11 / det, g00 / det)
    sinr = tuple(p[k] / (noise_var_w * inv_diag[k]) for k in range(2))
    return tuple(10.0 * math.log10(max(s, 1e-30)) for s in sinr)


def active_mask(cfg_ue1: UeCfConfig, cfg_ue2: UeCfConfig):
    """Shared equalizer mask: an antenna leaves the ZF only when both UEs
    exclude it (element-wise OR)."""
    if len(cfg_ue1.selection) != len(cfg_ue2.selection):
        raise ValueError("config lengths differ")
    return (cfg_ue1.selection.astype(bool) | cfg_ue2.selection.astype(bool))


def compute_port_csi(channel, p_tx_dbm: float) -> PortCsi:
    """Per-antenna SNR/RSRP/NVAR/EPRE; disconnected antennas report the
    -160 dBm sentinel.  Under flat fading EPRE equals RSRP."""
    mag = np.abs(channel.h)
    rsrp = np.full(channel.num_antennas, RSRP_FLOOR_DBM)
    ok = mag > 0
    rsrp[ok] = p_tx_dbm + 20.0 * np.log10(mag[ok])
    rsrp = np.maximum(rsrp, RSRP_FLOOR_DBM)
    noise_dbm = 10.0 * np.log10(channel.noise_var * 1000.0)
    snr = rsrp - noise_dbm
    return PortCsi(snr_db=snr, rsrp_dbm=rsrp, noise_var=channel.noise_var.copy(),
                   epre_dbm=rsrp.copy())


def process_slot(pdu_pool, channels, cfgs, tx_power_w,
                 est_snr_db: float = math.inf, rng=None):
    """Process a slot's PDU pool: MU pairs first (ZF over the shared mask),
    then remaining PDUs sequentially (MRC over the UE's own selection).

    ``channels``/``cfgs``/``tx_power_w`` map rnti -> ChannelState /
    UeCfConfig / linear watts.  Returns one EqualizerReport per PDU,
    pair reports first (partner before the mu PDU), pool order otherwise.
    """
    reports = []
    processed = set()
    by_rnti = {p.rnti: p for p in pdu_pool}

    for pdu in pdu_pool:
        if not pdu.mu_flag:
            continue
        partner = by_rnti.get(pdu.rnti_mu)
        if partner is None or partner.mu_flag:
            raise PairingError(f"mu PDU rnti={pdu.rnti} has no partner rnti_mu={pdu.rnti_mu}")
        reports.extend(_process_pair(partner, pdu, channels, cfgs, tx_power_w,
                                     est_snr_db, rng))
        processed.add(pdu.rnti)
        processed.add(partner.rnti)

    for pdu in pdu_pool:
        if pdu.rnti in processed:
            continue
        reports.append(_process_single(pdu, channels, cfgs, tx_power_w,
                                       est_snr_db, rng))
    return reports


def _process_pair(first, second, channels, cfgs, tx_power_w, est_snr_db, rng):
    ch1, ch2 = channels[first.rnti], channels[second.rnti]
    mask = active_mask(cfgs[first.rnti], cfgs[second.rnti]).astype(bool)
    n_active = int(mask.sum())
    h1 = estimate_channel(ch1, first.dmrs_port, est_snr_db, rng)
    h2 = estimate_channel(ch2, second.dmrs_port, est_snr_db, rng)
    # Pre-whiten rows by per-antenna noise so the scalar-noise ZF form applies.
    sigma = np.sqrt(ch1.noise_var[mask])
    hmat = np.stack([h1[mask] / sigma, h2[mask] / sigma], axis=1)
    p = (tx_power_w[first.rnti], tx_power_w[second.rnti])
    batch_time = processing_time_us(max(n_active, 2), "ZF")
    try:
        sinr1, sinr2 = zf_sinr_db(hmat, p, 1.0)
    except SingularChannelError:
        logger.warning("ZF singular for pair (%d, %d); falling back to sequential MRC",
                       first.rnti, second.rnti)
        return [_process_single(first, channels, cfgs, tx_power_w, est_snr_db, rng),
                _process_single(second, channels, cfgs, tx_power_w, est_snr_db, rng)]
    return [
        EqualizerReport(first.rnti, sinr1, n_active, batch_time, "ZF"),
        EqualizerReport(second.rnti, sinr2, n_active, batch_time, "ZF"),
    ]


def _process_single(pdu, channels, cfgs, tx_power_w, est_snr_db, rng):
    ch = channels[pdu.rnti]
    mask = cfgs[pdu.rnti].selection.astype(bool)
    n_active = int(mask.sum())
    h_hat = estimate_channel(ch, pdu.dmrs_port, est_snr_db, rng)
    sinr = mrc_sinr_db(h_hat, mask, tx_power_w[pdu.rnti], ch.noise_var)
    t = processing_time_us(max(n_active, 1), "MRC")
    return EqualizerReport(pdu.rnti, sinr, n_active, t, "MRC")
