"""Running mean/variance estimators for observations and value targets."""

from __future__ import annotations

from typing import Dict, Iterable, Mapping, Optional

import numpy as np
import torch

DECAY = 1.0 - 1e-5


class RunningNormalizer:
    """Exponentially decayed first and second moments with bias correction.

    Before any update the estimate is mean 0, variance 1. Each ``update`` call
    is one decay step using the batch mean of x and x**2.
    """

    def __init__(self, shape=(), decay: float = DECAY, eps: float = 1e-8, clip: float = 10.0):
        self.decay = decay
        self.eps = eps
        self.clip = clip
        self.m1 = np.zeros(shape, np.float64)
        self.m2 = np.zeros(shape, np.float64)
        self.count = 0

    @property
    def mean(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros_like(self.m1)
        return self.m1 / (1.0 - self.decay ** self.count)

    @property
    def var(self) -> np.ndarray:
        if self.count == 0:
            return np.ones_like(self.m2)
        ex2 = self.m2 / (1.0 - self.decay ** self.count)
        return np.maximum(ex2 - self.mean ** 2, 0.0)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var + self.eps)

    def normalize(self, x):
        out = (np.asarray(x, np.float64) - self.mean) / self.std
        if self.clip:
            out = np.clip(out, -self.clip, self.clip)
        return out

    def denormalize(self, x):
        return np.asarray(x, np.float64) * self.std + self.mean

    def update(self, x) -> None:
        x = np.asarray(x, np.float64).reshape((-1,) + self.m1.shape)
        if x.shape[0] == 0:
            return
        self.m1 = self.decay * self.m1 + (1 - self.decay) * x.mean(0)
        self.m2 = self.decay * self.m2 + (1 - self.decay) * (x ** 2).mean(0)
        self.count += 1

    def state(self) -> Dict[str, np.ndarray]:
        return {"m1": self.m1.copy(), "m2": self.m2.copy(), "count": np.array(self.count)}

    def load(self, state: Mapping[str, np.ndarray]) -> None:
        self.m1 = np.array(state["m1"], np.float64).reshape(self.m1.shape)
        self.m2 = np.array(state["m2"], np.float64).reshape(self.m2.shape)
        self.count = int(np.asarray(state["count"]))


class ObsNormalizer:
    """One RunningNormalizer per observation block (self, lidar, each entity type).

    Shared by the policy and value networks.
    """

    def __init__(self, dims: Mapping[str, int], decay: float = DECAY):
        self.blocks = {k: RunningNormalizer((d,), decay) for k, d in dims.items()}

    def add_block(self, name: str, dim: int) -> None:
        if name not in self.blocks:
            self.blocks[name] = RunningNormalizer((dim,), next(iter(self.blocks.values())).decay)

    def apply(self, name: str, arr: np.ndarray, valid: Optional[np.ndarray] = None) -> np.ndarray:
        if name not in self.blocks:
            return arr
        out = self.blocks[name].normalize(arr).astype(np.float32)
        if valid is not None:
            out = np.where(valid[..., None], out, 0.0).astype(np.float32)
        return out

    def update(self, observations: Iterable) -> None:
        obs = list(observations)
        if not obs:
            return
        self.blocks["self"].update(np.stack([o.self_feat for o in obs]))
        self.blocks["lidar"].update(np.stack([o.lidar for o in obs]))
        for name, rn in self.blocks.items():
            if name in ("self", "lidar"):
                continue
            rows = [o.entities[name] for o in obs if name in o.entities and len(o.entities[name])]
            if rows:
                rn.update(np.concatenate(rows))

    def to_tensors(self, prefix: str = "norm.") -> Dict[str, torch.Tensor]:
        out = {}
        for name, rn in self.blocks.items():
            for k, v in rn.state().items():
                out[f"{prefix}{name}.{k}"] = torch.as_tensor(np.asarray(v, np.float64))
        return out

    def load_tensors(self, tensors: Mapping[str, torch.Tensor], prefix: str = "norm.") -> None:
        for name, rn in self.blocks.items():
            keys = {k: f"{prefix}{name}.{k}" for k in ("m1", "m2", "count")}
            if all(v in tensors for v in keys.values()):
                rn.load({k: tensors[v].numpy() for k, v in keys.items()})

    def state(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {k: rn.state() for k, rn in self.blocks.items()}

    def load(self, state) -> None:
        for k, s in state.items():
            if k in self.blocks:
                self.blocks[k].load(s)
