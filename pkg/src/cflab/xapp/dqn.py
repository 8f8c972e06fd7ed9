"""From-scratch convolutional Q-network in numpy.

Topology: three hidden 1-D convolutions along the antenna axis
(channels 4 -> 16 -> 16 -> 16, kernel 3, same padding, ReLU) and a dense
head to 16 q-values.  Input is an 8x4 observation (antennas x features).
Analytic gradients are exact; the test suite checks them against central
finite differences.

Model file format: first line ``cfdqn/1``, then a JSON body with layer
dimensions and the weights as base64 little-endian float64 in layer order.
"""

from __future__ import annotations

import base64
import json
import math

import numpy as np

MODEL_MAGIC = "cfdqn/1"
N_ANTENNAS = 8
N_FEATURES = 4
N_ACTIONS = 16
HIDDEN_CHANNELS = 16
KERNEL = 3

PARAM_ORDER = ("conv1.w", "conv1.b", "conv2.w", "conv2.b",
               "conv3.w", "conv3.b", "dense.w", "dense.b")


class TrainingDivergedError(Exception):
    pass


def _conv_windows(x):
    """(B, C, L) -> (B, C, L, K) same-padded sliding windows."""
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1)))
    return np.lib.stride_tricks.sliding_window_view(xp, KERNEL, axis=2)


class DqnModel:
    def __init__(self, params: dict[str, np.ndarray]):
        for name in PARAM_ORDER:
            if name not in params:
                raise ValueError(f"missing parameter {name}")
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    @classmethod
    def initialize(cls, rng: np.random.Generator) -> "DqnModel":
        def conv_init(c_out, c_in):
            scale = math.sqrt(2.0 / (c_in * KERNEL))
            return rng.standard_normal((c_out, c_in, KERNEL)) * scale

        h = HIDDEN_CHANNELS
        dense_in = h * N_ANTENNAS
        params = {
            "conv1.w": conv_init(h, N_FEATURES),
            "conv1.b": np.zeros(h),
            "conv2.w": conv_init(h, h),
            "conv2.b": np.zeros(h),
            "conv3.w": conv_init(h, h),
            "conv3.b": np.zeros(h),
            "dense.w": rng.standard_normal((dense_in, N_ACTIONS)) * math.sqrt(1.0 / dense_in),
            "dense.b": np.zeros(N_ACTIONS),
        }
        return cls(params)

    def copy(self) -> "DqnModel":
        return DqnModel({k: v.copy() for k, v in self.params.items()})

    # forward / backward --------------------------------------------------

    def forward_batch(self, obs: np.ndarray, cache: dict | None = None) -> np.ndarray:
        """obs (B, 8, 4) -> q-values (B, 16)."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim != 3 or obs.shape[1:] != (N_ANTENNAS, N_FEATURES):
            raise ValueError(f"expected (B, {N_ANTENNAS}, {N_FEATURES}) input, got {obs.shape}")
        x = obs.transpose(0, 2, 1)  # (B, C=4, L=8)
        acts = [x]
        zs = []
        p = self.params
        for layer in ("conv1", "conv2", "conv3"):
            w, b = p[f"{layer}.w"], p[f"{layer}.b"]
            win = _conv_windows(acts[-1])
            z = np.einsum("bcit,oct->boi", win, w, optimize=True) + b[None, :, None]
            zs.append(z)
            acts.append(np.maximum(z, 0.0))
        flat = acts[-1].reshape(obs.shape[0], -1)
        q = flat @ p["dense.w"] + p["dense.b"]
        if cache is not None:
            cache["acts"] = acts
            cache["zs"] = zs
            cache["flat"] = flat
        return q

    def forward(self, obs: np.ndarray) -> np.ndarray:
        """Single 8x4 observation -> 16 q-values."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (N_ANTENNAS, N_FEATURES):
            raise ValueError(f"expected ({N_ANTENNAS}, {N_FEATURES}) input, got {obs.shape}")
        return self.forward_batch(obs[None])[0]

    def backward_batch(self, cache: dict, dq: np.ndarray):
        """Gradients of a scalar loss given dL/dq.

        Returns (grads dict matching params, dL/dobs (B, 8, 4)).
        """
        p = self.params
        grads = {}
        flat = cache["flat"]
        grads["dense.w"] = flat.T @ dq
        grads["dense.b"] = dq.sum(axis=0)
        da = (dq @ p["dense.w"].T).reshape(cache["acts"][3].shape)
        for idx, layer in ((2, "conv3"), (1, "conv2"), (0, "conv1")):
            dz = da * (cache["zs"][idx] > 0)
            win = _conv_windows(cache["acts"][idx])
            grads[f"{layer}.w"] = np.einsum("boi,bcit->oct", dz, win, optimize=True)
            grads[f"{layer}.b"] = dz.sum(axis=(0, 2))
            dz_win = _conv_windows(dz)
            w_flip = p[f"{layer}.w"][:, :, ::-1]
            da = np.einsum("bojt,oct->bcj", dz_win, w_flip, optimize=True)
        dobs = da.transpose(0, 2, 1)
        return grads, dobs

    # serialization -------------------------------------------------------

    def save(self, path: str):
        body = {
            "layers": {name: list(self.params[name].shape) for name in PARAM_ORDER},
            "weights": {
                name: base64.b64encode(
                    np.ascontiguousarray(self.params[name], dtype="<f8").tobytes()
                ).decode("ascii")
                for name in PARAM_ORDER
            },
        }
        with open(path, "w", encoding="utf-8") as f:
            f.write(MODEL_MAGIC + "\n")
            json.dump(body, f)
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "DqnModel":
        with open(path, "r", encoding="utf-8") as f:
            magic = f.readline().strip()
            if magic != MODEL_MAGIC:
                raise ValueError(f"not a {MODEL_MAGIC} model file (header {magic!r})")
            body = json.load(f)
        params = {}
        for name in PARAM_ORDER:
            shape = tuple(body["layers"][name])
            raw = base64.b64decode(body["weights"][name])
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        return cls(params)


class SgdMomentum:
    """Plain SGD with momentum over a model's parameter dict."""

    def __init__(self, model: DqnModel, lr: float, momentum: float = 0.9):
        self.model = model
        self.lr = lr
        self.momentum = momentum
        self.velocity = {k: np.zeros_like(v) for k, v in model.params.items()}

    def step(self, grads: dict[str, np.ndarray]):
        for name, g in grads.items():
            v = self.velocity[name]
            v *= self.momentum
            v -= self.lr * g
            self.model.params[name] += v


def train_step(model: DqnModel, target_model: DqnModel, batch, gamma: float,
               optimizer: SgdMomentum) -> float:
    """One TD(0) gradient step on y = r + gamma*(1-done)*max_a q_target.

    ``batch`` is (obs, actions, rewards, next_obs, dones) arrays.
    Returns the squared-TD-error loss before the step.
    """
    obs, actions, rewards, next_obs, dones = batch
    n = len(actions)
    cache = {}
    q = model.forward_batch(obs, cache)
    q_next = target_model.forward_batch(next_obs)
    y = rewards + gamma * (1.0 - dones) * q_next.max(axis=1)
    idx = np.arange(n)
    td = q[idx, actions] - y
    loss = float(np.mean(td ** 2))
    if not math.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss {loss}")
    dq = np.zeros_like(q)
    dq[idx, actions] = 2.0 * td / n
    grads, _ = model.backward_batch(cache, dq)
    optimizer.step(grads)
    return loss
