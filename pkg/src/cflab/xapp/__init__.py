from .dqn import DqnModel, TrainingDivergedError, train_step
from .replay import Experience, ReplayBuffer
from .agent import (
    AntennaXapp,
    build_observation,
    decode_action,
    reward,
)

__all__ = [
    "DqnModel",
    "TrainingDivergedError",
    "train_step",
    "Experience",
    "ReplayBuffer",
    "AntennaXapp",
    "build_observation",
    "decode_action",
    "reward",
]
