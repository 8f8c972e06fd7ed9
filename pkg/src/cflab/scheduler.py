"""MU-MIMO capable round-robin UL scheduler.

Dual-bitmap design: ``bm_su`` marks REs occupied by at least one UE,
``bm_mu`` bit 0 marks REs held by exactly one not-yet-paired, MU-eligible
UE.  A second UE can be paired onto such a run (subset of the first UE's
allocation, 2 owners max per RE); its PDU carries ``mu_flag=True`` and the
partner's RNTI so the PHY can equalize both IQ streams jointly.

Low PRB / low MCS grants follow the srsRAN workaround: 1-PRB requests with
MCS < 6 are bumped to 2 PRBs and never participate in MU pairing, and
requests of <= 2 PRBs with MCS < 6 skip the MU path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, phy

N_RE_DEFAULT = 51
MU_MIN_MCS = 6
MU_MIN_PRB = 2  # requests at or below this with low MCS never pair

# DCI antenna_ports values known to give correct channel estimation with
# COTS UEs, and the DMRS port each maps to.
ANTENNA_PORTS_TO_DMRS = {2: 0, 4: 2, 5: 3}
SU_ANTENNA_PORTS = 2  # DMRS port 0, the single-user default
MU_ANTENNA_PORTS = 4  # DMRS port 2 for the paired (second) UE


@dataclass
class ReBitmaps:
    """Per-UL-slot occupancy state over the RE axis."""

    n_re: int = N_RE_DEFAULT
    bm_su: np.ndarray = field(default=None)
    bm_mu: np.ndarray = field(default=None)
    owner_count: np.ndarray = field(default=None)
    owner0: np.ndarray = field(default=None)
    owner1: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bm_su is None:
            self.reset()

    def reset(self):
        """Slot-boundary state: nothing occupied, nothing pairable."""
        self.bm_su = np.zeros(self.n_re, dtype=np.uint8)
        self.bm_mu = np.ones(self.n_re, dtype=np.uint8)
        self.owner_count = np.zeros(self.n_re, dtype=np.uint8)
        self.owner0 = np.zeros(self.n_re, dtype=np.int64)
        self.owner1 = np.zeros(self.n_re, dtype=np.int64)

    def re_owners(self, i: int) -> list[int]:
        c = self.owner_count[i]
        if c == 0:
            return []
        if c == 1:
            return [int(self.owner0[i])]
        return [int(self.owner0[i]), int(self.owner1[i])]

    def check_invariants(self):
        for i in range(self.n_re):
            owners = self.re_owners(i)
            assert (self.bm_su[i] == 1) == (len(owners) > 0), f"bm_su mismatch at {i}"
            assert len(owners) <= 2, f"RE {i} has {len(owners)} owners"
            if self.bm_mu[i] == 0:
                assert self.bm_su[i] == 1 and len(owners) == 1, f"bm_mu mismatch at {i}"


@dataclass(frozen=True)
class SchedRequest:
    rnti: int
    buffer_bytes: int = 0
    wideband_sinr_db: float = 0.0
    is_retx: bool = False
    retx_mcs: int | None = None
    retx_n_prb: int | None = None

    def __post_init__(self):
        if self.is_retx:
            if self.retx_mcs is None or self.retx_n_prb is None:
                raise ValueError("retransmission request needs retx_mcs and retx_n_prb")
        elif self.buffer_bytes <= 0:
            raise ValueError("new request needs a positive buffer")


@dataclass(frozen=True)
class UlGrant:
    rnti: int
    re_start: int
    re_length: int
    mcs: int
    antenna_ports_value: int
    harq_id: int = 0
    slot_index: int = 0

    def __post_init__(self):
        if self.antenna_ports_value not in ANTENNA_PORTS_TO_DMRS:
            raise ValueError(f"unusable antenna_ports value {self.antenna_ports_value}")
        if self.re_length < 1:
            raise ValueError("grant length must be >= 1")


@dataclass(frozen=True)
class PuschPdu:
    rnti: int
    re_start: int
    re_length: int
    mcs: int
    dmrs_port: int
    mu_flag: bool
    rnti_mu: int = 0
    slot_index: int = 0


def estimate_grant(req: SchedRequest, n_re_total: int = N_RE_DEFAULT) -> tuple[int, int]:
    """(n_prb, mcs) for a new request: best MCS supported by the reported
    wideband SINR, PRBs to drain the buffer at that MCS, clamped to the grid."""
    if req.is_retx:
        raise ValueError("retransmissions reuse the previous grant parameters")
    mcs = phy.sinr_to_mcs(req.wideband_sinr_db)
    n_prb = math.ceil(req.buffer_bytes * 8 / phy.bits_per_prb_slot(mcs))
    return max(1, min(n_prb, n_re_total)), mcs


def find_su_range(bm_su: np.ndarray, n: int):
    """First zero run of length >= n truncated to n, else the longest zero
    run; None when the grid is full."""
    start, length = kernels.find_zero_run(np.ascontiguousarray(bm_su, dtype=np.uint8), n)
    if length == 0:
        return None
    return start, length


def find_mu_range(bm: ReBitmaps, n: int):
    """First pairable run (bm_mu zeros within a single owner's allocation)
    of length >= n truncated to n, else the longest such run, with the
    owning RNTI; None when nothing is pairable."""
    start, length, rnti = kernels.find_single_owner_run(
        bm.bm_mu, bm.owner_count, bm.owner0, n)
    if length == 0:
        return None
    return (start, length), rnti


def assign_dmrs_ports(first: PuschPdu, second: PuschPdu) -> tuple[PuschPdu, PuschPdu]:
    """Orthogonal DMRS for a pair: the SU-path UE keeps port 0
    (antenna_ports=2), the paired UE gets port 2 (antenna_ports=4)."""
    if first.mu_flag or not second.mu_flag:
        raise ValueError("assign_dmrs_ports expects (su-path PDU, mu-flagged PDU)")
    first = PuschPdu(first.rnti, first.re_start, first.re_length, first.mcs,
                     ANTENNA_PORTS_TO_DMRS[SU_ANTENNA_PORTS], False, 0, first.slot_index)
    second = PuschPdu(second.rnti, second.re_start, second.re_length, second.mcs,
                      ANTENNA_PORTS_TO_DMRS[MU_ANTENNA_PORTS], True, second.rnti_mu,
                      second.slot_index)
    return first, second


def _schedule_one(rnti: int, n_prb: int, mcs: int, bm: ReBitmaps, slot_index: int,
                  harq_id: int = 0):
    """Shared MU-then-SU flow for new grants and retransmissions.

    Returns (grant, pdu) or None when no range is free this slot.
    """
    forced_su = False
    mu_eligible = True

    # srsRAN workaround: 1-PRB low-MCS grants are bumped to 2 PRBs and
    # excluded from MU-MIMO entirely.
    if n_prb <= 1 and mcs < MU_MIN_MCS:
        n_prb = 2
        forced_su = True
        mu_eligible = False
    if n_prb <= MU_MIN_PRB and mcs < MU_MIN_MCS:
        mu_eligible = False

    if not forced_su:
        found = find_mu_range(bm, n_prb)
        if found is not None and mu_eligible:
            (start, length), first_rnti = found
            if first_rnti != rnti:
                return _make_mu_grant(rnti, start, length, mcs, first_rnti, bm,
                                      slot_index, harq_id)
            # A UE never pairs with itself; fall through to the SU path.

    found = find_su_range(bm.bm_su, n_prb)
    if found is None:
        return None
    start, length = found
    sl = slice(start, start + length)
    bm.bm_su[sl] = 1
    bm.bm_mu[sl] = 0 if mu_eligible else 1
    bm.owner_count[sl] = 1
    bm.owner0[sl] = rnti
    grant = UlGrant(rnti, start, length, mcs, SU_ANTENNA_PORTS, harq_id, slot_index)
    pdu = PuschPdu(rnti, start, length, mcs, ANTENNA_PORTS_TO_DMRS[SU_ANTENNA_PORTS],
                   False, 0, slot_index)
    return grant, pdu


def _make_mu_grant(rnti, start, length, mcs, first_rnti, bm, slot_index, harq_id):
    sl = slice(start, start + length)
    bm.owner1[sl] = rnti
    bm.owner_count[sl] = 2
    bm.bm_mu[sl] = 1
    # Close off the first UE's remaining REs so no third UE lands on them
    # and the first UE is never rnti_mu of two PDUs.
    first_res = (bm.owner0 == first_rnti) & (bm.owner_count >= 1) & (bm.bm_su == 1)
    bm.bm_mu[first_res] = 1
    grant = UlGrant(rnti, start, length, mcs, MU_ANTENNA_PORTS, harq_id, slot_index)
    pdu = PuschPdu(rnti, start, length, mcs, ANTENNA_PORTS_TO_DMRS[MU_ANTENNA_PORTS],
                   True, first_rnti, slot_index)
    return grant, pdu


def schedule_slot(requests, bm: ReBitmaps, n_re_total: int | None = None,
                  slot_index: int = 0):
    """Schedule one UL slot's requests in the given (round-robin) order.

    Returns (grants, pdus, deferred); deferred requests found no free
    range and should be retried next UL slot.
    """
    if n_re_total is None:
        n_re_total = bm.n_re
    grants, pdus, deferred = [], [], []
    for req in requests:
        if req.is_retx:
            n_prb, mcs = req.retx_n_prb, req.retx_mcs
        else:
            n_prb, mcs = estimate_grant(req, n_re_total)
        result = _schedule_one(req.rnti, n_prb, mcs, bm, slot_index)
        if result is None:
            deferred.append(req)
        else:
            grants.append(result[0])
            pdus.append(result[1])
    return grants, pdus, deferred


def schedule_retx(req: SchedRequest, bm: ReBitmaps, slot_index: int = 0,
                  harq_id: int = 0):
    """Retransmission: same MCS and PRB count as the failed grant, same
    MU-then-SU flow; None when nothing fits this slot."""
    if not req.is_retx:
        raise ValueError("schedule_retx needs a retransmission request")
    return _schedule_one(req.rnti, req.retx_n_prb, req.retx_mcs, bm, slot_index, harq_id)


def round_robin_order(rntis, slot_index: int):
    """Ascending RNTI rotated by the slot index."""
    ordered = sorted(rntis)
    if not ordered:
        return ordered
    k = slot_index % len(ordered)
    return ordered[k:] + ordered[:k]
