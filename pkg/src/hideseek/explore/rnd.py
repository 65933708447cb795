"""Random network distillation: a frozen random target and a trained predictor."""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from hideseek.envs.observation import Observation
from hideseek.nn.params import AdamConfig, AdamState, adam_update, init_dense
from hideseek.policy.batch import collate
from hideseek.policy.net import PolicyConfig, Trunk

RND_DIM = 64
RND_COEF = 1.0


class RNDNet(Trunk):
    """The value trunk without the recurrent core, projected to 64 outputs."""

    def __init__(self, cfg: PolicyConfig, seed_offset: int):
        super().__init__(cfg, seed_offset=seed_offset, use_lstm=False)
        init_dense(self.store, "heads.rnd", self.out_dim, RND_DIM, self.gen)

    def forward(self, batch) -> torch.Tensor:
        feats = self.encode(batch, omniscient=True)
        z, _, _ = self.core(feats[None], None)
        return self._dense("heads.rnd", z[0])


class RNDPair:
    def __init__(self, cfg: PolicyConfig, seed: int = 0, lr: float = 1e-3):
        self.cfg = cfg
        self.target = RNDNet(cfg.replace(seed=seed), seed_offset=101)
        self.predictor = RNDNet(cfg.replace(seed=seed), seed_offset=202)
        for _, t in self.target.store.items():
            t.requires_grad_(False)
        self.adam = AdamState()
        self.adam_cfg = AdamConfig(lr=lr, weight_decay=0.0)

    @property
    def types(self):
        return self.target.entity_types

    def errors(self, observations: Sequence[Observation]) -> torch.Tensor:
        b = collate(observations, self.types)
        with torch.no_grad():
            t = self.target.forward(b)
        return RND_COEF * ((self.predictor.forward(b) - t) ** 2).sum(-1)

    def reward(self, observations: Sequence[Observation]) -> np.ndarray:
        with torch.no_grad():
            return self.errors(observations).double().numpy()

    def update(self, observations: Sequence[Observation]) -> float:
        """One gradient step of the predictor on the mean squared error."""
        loss = self.errors(observations).mean()
        names = list(self.predictor.store)
        params = [self.predictor.store[n] for n in names]
        grads = torch.autograd.grad(loss, params, allow_unused=True)
        grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
        self.adam, _ = adam_update(self.predictor.store, dict(zip(names, grads)), self.adam,
                                   self.adam_cfg, names)
        return float(loss.detach())

    def copy_target_to_predictor(self) -> None:
        self.predictor.store.load_state_dict(self.target.store.state_dict())


class RNDIntrinsic:
    """Worker side: reward from the latest predictor. Learner side: predictor updates."""

    def __init__(self, cfg: PolicyConfig, seed: int = 0, batch: int = 256, updates: int = 4):
        self.pair = RNDPair(cfg, seed)
        self.batch = batch
        self.updates = updates
        self.rng = np.random.default_rng([seed, 0x52D])

    def on_reset(self, worker_id: int, env_index: int) -> None:
        pass

    def reward(self, worker_id: int, env_index: int, agent_id: int, obs: Observation, env) -> float:
        return float(self.pair.reward([obs])[0])

    def broadcast_state(self) -> Dict[str, torch.Tensor]:
        return self.pair.predictor.store.state_dict()

    def load_state(self, state) -> None:
        self.pair.predictor.store.load_state_dict(state)

    def learner_update(self, chunks) -> dict:
        obs = [c.obs[t] for c in chunks for t in range(len(c)) if c.mask[t]]
        if not obs:
            return {}
        losses = []
        for _ in range(self.updates):
            idx = self.rng.choice(len(obs), size=min(self.batch, len(obs)), replace=False)
            losses.append(self.pair.update([obs[i] for i in idx]))
        return {"rnd_loss": float(np.mean(losses))}
