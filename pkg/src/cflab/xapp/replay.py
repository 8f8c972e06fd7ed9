"""FIFO experience replay with uniform sampling."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Experience:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self._buf = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._buf)

    def push(self, exp: Experience):
        self._buf.append(exp)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform batch as stacked arrays (obs, actions, rewards, next_obs, dones)."""
        if len(self._buf) < batch_size:
            raise ValueError(f"buffer holds {len(self._buf)} < batch size {batch_size}")
        idx = rng.integers(0, len(self._buf), size=batch_size)
        exps = [self._buf[i] for i in idx]
        return (
            np.stack([e.obs for e in exps]),
            np.array([e.action for e in exps], dtype=np.int64),
            np.array([e.reward for e in exps]),
            np.stack([e.next_obs for e in exps]),
            np.array([float(e.done) for e in exps]),
        )
