"""Offline pretraining of the antenna-association DQN.

The environment reuses the topology and PHY models directly: two UEs at
random positions, randomized antenna faults and starting masks, block
fading held fixed within an episode so the reward reflects the action and
not the fading draw.  Each round both UEs act in turn against the shared
OR-mask equalizer, mirroring the live loop's one-action-per-UE-per-second
cadence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .. import phy, topology
from ..phy import UeCfConfig
from .agent import MetricSnapshot, apply_action, encode_action, reward
from .dqn import DqnModel, N_ANTENNAS, SgdMomentum, train_step
from .replay import Experience, ReplayBuffer

LINK_ADAPTATION_BACKOFF_DB = 2.0


@dataclass
class PretrainConfig:
    episodes: int = 1600
    horizon_rounds: int = 32
    # Low discount: the reward already prices each action's full effect
    # (throughput delta vs processing-time credit), so the decisive
    # Q-value gap between acting now and deferring is r*(1-gamma); a
    # heavy discount would shrink it below the approximation error.
    gamma: float = 0.3
    lr: float = 5e-4
    momentum: float = 0.9
    batch_size: int = 64
    replay_capacity: int = 50_000
    target_sync_steps: int = 500
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.8
    # step boundaries where one MCS step costs clearly more than the
    # 0.417 processing-time credit (skips the tiny 16QAM/64QAM crossover
    # steps at indices 10 and 17)
    operating_mcs: tuple = (12, 13, 14, 15, 16, 18, 19, 20, 21, 22, 23, 24, 25, 26)
    step_margin_db: float = 0.1
    min_marginal_db: float = 0.2
    noise_dbm: float = -44.0
    max_faults: int = 6
    # episode fault-count distribution: weighted toward the common few-fault
    # cases while still covering heavy outage states
    fault_count_weights: tuple = (0.15, 0.25, 0.20, 0.12, 0.10, 0.10, 0.08)
    seed: int = 0


class PretrainEnv:
    """Two-UE antenna-selection environment over the analytic link models."""

    def __init__(self, cfg: PretrainConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.array = topology.default_array()
        self.channels = None
        self.masks = None
        self.tx_power_w = (1.0, 1.0)
        self._round = 0

    def reset(self):
        """New episode: positions, fading, faults and power calibration.

        Each UE's transmit power is set so its healthy-mask post-ZF SINR
        sits just above an MCS step boundary, and fading draws where some
        healthy antenna contributes less than ``min_marginal_db`` to that
        SINR are rejected.  At such an operating point dropping any healthy
        antenna costs at least one MCS step (more than the processing-time
        credit) while dropping a dead antenna costs nothing, so the reward
        cleanly separates the behaviors the policy must learn.
        """
        rng = self.rng
        for _ in range(60):
            ues = [
                topology.UeNode(rnti=k + 1,
                                position=(rng.uniform(1.0, 9.0), rng.uniform(1.0, 9.0)))
                for k in range(2)
            ]
            self.channels = [self._draw_bounded_channel(ue) for ue in ues]
            n_faults = int(rng.choice(self.cfg.max_faults + 1,
                                      p=self.cfg.fault_count_weights))
            faulted = rng.choice(N_ANTENNAS, size=n_faults, replace=False)
            for a in faulted:
                self.channels = [topology.apply_fault(ch, int(a), True)
                                 for ch in self.channels]
            if self._calibrate_power(faulted):
                break
        self._faulted = set(int(a) for a in faulted)
        self.masks = [self._random_mask() for _ in range(2)]
        self._round = 0
        return [self._observation(k) for k in range(2)]

    def _draw_bounded_channel(self, ue: topology.UeNode) -> topology.ChannelState:
        """Path-loss channel with bounded fading depth.

        Magnitudes are the path-loss amplitude scaled by U(0.75, 1.3) with
        uniform random phase.  Full Rayleigh draws routinely put one
        antenna in a deep fade whose removal is nearly free, which washes
        out the keep-healthy-antennas reward signal; bounding the depth
        keeps every healthy antenna's marginal contribution meaningful.
        """
        rng = self.rng
        n = N_ANTENNAS
        amp = np.empty(n)
        for a in range(n):
            pos = self.array.antenna_position(a)
            d = max(np.hypot(ue.position[0] - pos[0], ue.position[1] - pos[1]), 0.1)
            amp[a] = np.sqrt(10.0 ** (-topology.path_loss_db(d) / 10.0))
        mag = amp * rng.uniform(0.75, 1.3, n)
        phase = rng.uniform(0.0, 2.0 * np.pi, n)
        h = mag * np.exp(1j * phase)
        noise = np.full(n, 10.0 ** ((self.cfg.noise_dbm - 30.0) / 10.0))
        return topology.ChannelState(h=h.copy(), noise_var=noise,
                                     fault_mask=np.zeros(n, dtype=bool), h_clean=h)

    def _calibrate_power(self, faulted) -> bool:
        """Pin each UE to an MCS step boundary over the healthy mask.

        Returns False (resample fading) when any healthy antenna's marginal
        SINR contribution is below the configured minimum for either UE.
        """
        cfg = self.cfg
        healthy = np.ones(N_ANTENNAS, dtype=bool)
        healthy[list(faulted)] = False
        self.tx_power_w = (1.0, 1.0)
        try:
            base = self._zf_sinrs(healthy)
        except phy.SingularChannelError:
            return False
        targets = [
            phy.SINR_THRESHOLDS_DB[int(self.rng.choice(cfg.operating_mcs))]
            + LINK_ADAPTATION_BACKOFF_DB + cfg.step_margin_db
            for _ in range(2)
        ]
        self.tx_power_w = tuple(
            10.0 ** ((targets[k] - base[k]) / 10.0) for k in range(2)
        )
        full = self._zf_sinrs(healthy)
        for a in np.flatnonzero(healthy):
            if healthy.sum() <= 2:
                break
            reduced = healthy.copy()
            reduced[a] = False
            try:
                drop = self._zf_sinrs(reduced)
            except phy.SingularChannelError:
                return False
            if any(full[k] - drop[k] < cfg.min_marginal_db for k in range(2)):
                return False
        return True

    def _random_mask(self) -> UeCfConfig:
        """Starting selection; faulted antennas begin deselected half the
        time so the policy sees plenty of do-not-reactivate-a-dead-antenna
        states, the live loop's main failure mode."""
        while True:
            if self.rng.random() < 0.5:
                sel = np.ones(N_ANTENNAS, dtype=np.int8)
            else:
                sel = (self.rng.random(N_ANTENNAS) < 0.75).astype(np.int8)
            for a in self._faulted:
                if self.rng.random() < 0.5:
                    sel[a] = 0
            if sel.sum() >= 2:
                return UeCfConfig(selection=sel)

    def _zf_sinrs(self, mask: np.ndarray) -> tuple[float, float]:
        ch1, ch2 = self.channels
        sigma = np.sqrt(ch1.noise_var[mask])
        h = np.stack([ch1.h[mask] / sigma, ch2.h[mask] / sigma], axis=1)
        try:
            return phy.zf_sinr_db(h, self.tx_power_w, 1.0)
        except phy.SingularChannelError:
            # degenerate masks (e.g. only dead antennas) fall back to MRC
            return tuple(
                phy.mrc_sinr_db(ch.h, mask, self.tx_power_w[k], ch.noise_var)
                for k, ch in enumerate(self.channels)
            )

    def metrics(self) -> MetricSnapshot:
        mask = phy.active_mask(self.masks[0], self.masks[1]).astype(bool)
        sinrs = self._zf_sinrs(mask)
        thpt = sum(
            phy.ue_throughput_mbps(phy.N_RE_DEFAULT,
                                   phy.sinr_to_mcs(s - LINK_ADAPTATION_BACKOFF_DB))
            for s in sinrs
        )
        ptime = phy.processing_time_us(max(int(mask.sum()), 2), "ZF")
        return MetricSnapshot(total_thpt_mbps=thpt, ptime_us=ptime)

    def ue_metrics(self, ue_index: int) -> MetricSnapshot:
        """Counterfactual single-UE view: the equalizer mask is this UE's
        own selection.  Removes the partner's veto from the reward so each
        transition carries a clean credit signal during training; the live
        loop still applies the shared OR mask.
        """
        mask = self.masks[ue_index].selection.astype(bool)
        sinr = self._zf_sinrs(mask)[ue_index]
        thpt = phy.ue_throughput_mbps(
            phy.N_RE_DEFAULT, phy.sinr_to_mcs(sinr - LINK_ADAPTATION_BACKOFF_DB))
        ptime = phy.processing_time_us(max(int(mask.sum()), 2), "ZF")
        return MetricSnapshot(total_thpt_mbps=thpt, ptime_us=ptime)

    def _observation(self, ue_index: int) -> np.ndarray:
        csi = phy.compute_port_csi(self.channels[ue_index], 23.0)
        obs = np.empty((N_ANTENNAS, 4))
        obs[:, 0] = self.masks[ue_index].selection
        obs[:, 1] = np.clip((csi.snr_db + 10.0) / 50.0, 0.0, 1.0)
        obs[:, 2] = np.clip((csi.rsrp_dbm + 160.0) / 160.0, 0.0, 1.0)
        obs[:, 3] = np.clip((csi.epre_dbm + 160.0) / 160.0, 0.0, 1.0)
        return obs

    def step(self, ue_index: int, action: int):
        """Apply one UE's action; returns (next_obs, reward, done)."""
        prev = self.ue_metrics(ue_index)
        new_sel = apply_action(self.masks[ue_index].selection, action)
        self.masks[ue_index] = UeCfConfig(selection=new_sel)
        nxt = self.ue_metrics(ue_index)
        r = reward(prev, action, nxt)
        if ue_index == 1:
            self._round += 1
        done = self._round >= self.cfg.horizon_rounds
        return self._observation(ue_index), r, done

    def set_fault(self, antenna: int, faulted: bool):
        self.channels = [topology.apply_fault(ch, antenna, faulted) for ch in self.channels]


@dataclass
class PretrainResult:
    model: DqnModel
    losses: list = field(default_factory=list)
    episode_returns: list = field(default_factory=list)


def pretrain(cfg: PretrainConfig | None = None, progress=None) -> PretrainResult:
    """Train the DQN; fully deterministic for a fixed config/seed."""
    cfg = cfg or PretrainConfig()
    rng = np.random.default_rng(cfg.seed)
    env = PretrainEnv(cfg, rng)
    model = DqnModel.initialize(rng)
    target = model.copy()
    optimizer = SgdMomentum(model, lr=cfg.lr, momentum=cfg.momentum)
    buf = ReplayBuffer(cfg.replay_capacity)
    result = PretrainResult(model=model)

    decay_episodes = max(1, int(cfg.episodes * cfg.epsilon_decay_fraction))
    global_step = 0
    for episode in range(cfg.episodes):
        frac = min(1.0, episode / decay_episodes)
        epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
        obs = env.reset()
        ep_return = 0.0
        done = False
        while not done:
            for ue in range(2):
                if rng.random() < epsilon:
                    action = int(rng.integers(0, 16))
                else:
                    action = int(np.argmax(model.forward(obs[ue])))
                next_obs, r, done = env.step(ue, action)
                buf.push(Experience(obs[ue], action, r, next_obs, float(done)))
                obs[ue] = next_obs
                ep_return += r
                if len(buf) >= cfg.batch_size:
                    batch = buf.sample(cfg.batch_size, rng)
                    loss = train_step(model, target, batch, cfg.gamma, optimizer)
                    result.losses.append(loss)
                global_step += 1
                if global_step % cfg.target_sync_steps == 0:
                    target = model.copy()
        result.episode_returns.append(ep_return)
        if progress is not None:
            progress(episode, ep_return)
    return result


def write_manifest(path: str, cfg: PretrainConfig):
    """Training manifest: all hyperparameters plus the seed."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump({
            "episodes": cfg.episodes,
            "horizon_rounds": cfg.horizon_rounds,
            "gamma": cfg.gamma,
            "lr": cfg.lr,
            "momentum": cfg.momentum,
            "batch_size": cfg.batch_size,
            "replay_capacity": cfg.replay_capacity,
            "target_sync_steps": cfg.target_sync_steps,
            "epsilon_start": cfg.epsilon_start,
            "epsilon_end": cfg.epsilon_end,
            "epsilon_decay_fraction": cfg.epsilon_decay_fraction,
            "operating_mcs": list(cfg.operating_mcs),
            "step_margin_db": cfg.step_margin_db,
            "min_marginal_db": cfg.min_marginal_db,
            "noise_dbm": cfg.noise_dbm,
            "max_faults": cfg.max_faults,
            "fault_count_weights": list(cfg.fault_count_weights),
            "seed": cfg.seed,
            "optimizer": "sgd-momentum",
        }, f, indent=2)
        f.write("\n")
