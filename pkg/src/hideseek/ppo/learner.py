"""PPO configuration and the learner that owns parameters, normalizers and the buffer."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from hideseek.envs.observation import ENTITY_DIMS, SELF_DIM
from hideseek.nn import checkpoint as ckpt
from hideseek.nn.params import AdamConfig, AdamState, adam_update
from hideseek.policy.net import PolicyConfig, PolicyNet, ValueNet
from hideseek.ppo.buffer import CHUNK_LEN, MAX_REUSE, Chunk, ChunkBuffer
from hideseek.ppo.loss import ppo_loss, stack_chunks
from hideseek.ppo.normalizer import DECAY, ObsNormalizer, RunningNormalizer
from hideseek.sim.sensing import N_LIDAR

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PPOConfig:
    clip: float = 0.2
    ent_coef: float = 0.01
    vf_coef: float = 1.0
    gamma: float = 0.998
    lam: float = 0.95
    lr: float = 3e-4
    grad_clip: float = 5.0
    weight_decay: float = 1e-6
    minibatch: int = 64_000
    buffer: int = 320_000
    substeps: int = 60
    chunk_len: int = CHUNK_LEN
    window: int = 160
    max_reuse: int = MAX_REUSE
    norm_decay: float = DECAY

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")
        for f in dataclasses.fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")
        if self.minibatch > self.buffer:
            raise ValueError("minibatch larger than buffer")

    @classmethod
    def desk(cls, **kw) -> "PPOConfig":
        base = dict(buffer=4096, minibatch=512, substeps=16)
        base.update(kw)
        return cls(**base)

    def replace(self, **kw) -> "PPOConfig":
        return dataclasses.replace(self, **kw)

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(lr=self.lr, weight_decay=self.weight_decay, grad_clip=self.grad_clip)


def obs_dims(types: Sequence[str]) -> Dict[str, int]:
    return {"self": SELF_DIM, "lidar": N_LIDAR, **{t: ENTITY_DIMS[t] for t in types}}


class Learner:
    """Owns both networks, their separate Adam states, the shared observation
    normalizer, the return normalizer and the chunk buffer."""

    def __init__(self, pcfg: PolicyConfig, cfg: PPOConfig = PPOConfig.desk(), seed: int = 0):
        self.pcfg = pcfg
        self.cfg = cfg
        self.policy = PolicyNet(pcfg)
        self.value = ValueNet(pcfg)
        self.obs_norm = ObsNormalizer(obs_dims(self.policy.entity_types), cfg.norm_decay)
        self.ret_norm = RunningNormalizer((), cfg.norm_decay, clip=0.0)
        self.adam_pol = AdamState()
        self.adam_val = AdamState()
        self.buffer = ChunkBuffer(cfg.buffer, cfg.max_reuse)
        self.rng = np.random.default_rng(seed)
        self.version = 0
        self.draws: List[List[int]] = []   # chunk uids per substep of the last step

    # -- optimisation ---------------------------------------------------------------
    def ready(self) -> bool:
        return len(self.buffer) >= self.cfg.minibatch

    def optimize_step(self) -> Optional[Dict[str, float]]:
        """One optimization step. Returns None (and changes nothing) when the
        buffer holds fewer chunks than one minibatch."""
        cfg = self.cfg
        if not self.ready():
            log.info("optimize_step skipped: %d chunks < minibatch %d", len(self.buffer),
                     cfg.minibatch)
            return None
        adv = np.concatenate([c.adv[c.mask] for c in self.buffer.chunks])
        mu = float(adv.mean()) if adv.size > 1 else 0.0
        sd = max(float(adv.std()), 1e-8) if adv.size > 1 else float("inf")
        drawn: set = set()
        self.draws = []
        sums: Dict[str, float] = {}
        pnames = [n for n, t in self.policy.store.items() if t.requires_grad]
        vnames = [n for n, t in self.value.store.items() if t.requires_grad]
        for _ in range(cfg.substeps):
            idx = self.buffer.sample(cfg.minibatch, self.rng)
            chunks = [self.buffer.chunks[i] for i in idx]
            self.draws.append([c.uid for c in chunks])
            x = stack_chunks(chunks, self.policy.entity_types, self.obs_norm, self.ret_norm,
                             mu, sd)
            loss, m = ppo_loss(self.policy, self.value, x, cfg.clip, cfg.ent_coef, cfg.vf_coef)
            if not torch.isfinite(loss):
                raise FloatingPointError("non-finite loss; optimization step aborted")
            params = [self.policy.store[n] for n in pnames] + [self.value.store[n] for n in vnames]
            grads = torch.autograd.grad(loss, params, allow_unused=True)
            grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
            if not all(torch.isfinite(g).all() for g in grads):
                raise FloatingPointError("non-finite gradient; optimization step aborted")
            gp = dict(zip(pnames, grads[:len(pnames)]))
            gv = dict(zip(vnames, grads[len(pnames):]))
            self.adam_pol, m["grad_norm_policy"] = adam_update(
                self.policy.store, gp, self.adam_pol, cfg.adam, pnames)
            self.adam_val, m["grad_norm_value"] = adam_update(
                self.value.store, gv, self.adam_val, cfg.adam, vnames)
            # statistics move only after they were used for this substep
            steps = [c.obs[t] for c in chunks for t in range(len(c)) if c.mask[t]]
            self.obs_norm.update(steps)
            self.ret_norm.update(np.concatenate([c.ret[c.mask] for c in chunks]))
            drawn.update(int(i) for i in idx)
            for k, v in m.items():
                sums[k] = sums.get(k, 0.0) + v
        self.buffer.mark_used(drawn)
        evicted = self.buffer.evict_spent()
        self.buffer.audit()
        self.version += 1
        out = {k: v / cfg.substeps for k, v in sums.items()}
        out.update(version=self.version, evicted=evicted, chunks_drawn=len(drawn),
                   **{f"buffer_{k}": v for k, v in self.buffer.stats().items()})
        return out

    # -- parameters -------------------------------------------------------------------
    def add_entity_type(self, t: str) -> None:
        """Attach a new entity type to both networks and the observation normalizer."""
        if t in self.policy.entity_types:
            return
        self.policy.add_entity_type(t)
        self.value.add_entity_type(t)
        self.obs_norm.add_block(t, ENTITY_DIMS[t])
        self.pcfg = self.pcfg.replace(entity_types=self.policy.entity_types)

    def param_tensors(self) -> Dict[str, torch.Tensor]:
        out = {f"policy.{k}": v for k, v in self.policy.store.state_dict().items()}
        out.update({f"value.{k}": v for k, v in self.value.store.state_dict().items()})
        return out

    def norm_state(self) -> dict:
        def js(state):
            return {k: np.asarray(v).tolist() for k, v in state.items()}
        return {"obs": {k: js(s) for k, s in self.obs_norm.state().items()},
                "ret": js(self.ret_norm.state())}

    def load_norm_state(self, state: dict) -> None:
        self.obs_norm.load({k: {n: np.asarray(v) for n, v in s.items()}
                            for k, s in state["obs"].items()})
        self.ret_norm.load({n: np.asarray(v) for n, v in state["ret"].items()})

    def save(self, path, extra_meta: Optional[dict] = None) -> None:
        tensors = self.param_tensors()
        tensors.update(self.adam_pol.as_tensors("adam_policy."))
        tensors.update(self.adam_val.as_tensors("adam_value."))
        meta = {"version": self.version, "policy_config": dataclasses.asdict(self.pcfg),
                "ppo_config": dataclasses.asdict(self.cfg), "norm": self.norm_state(),
                "adam_t": [self.adam_pol.t, self.adam_val.t]}
        meta.update(extra_meta or {})
        ckpt.save(path, tensors, meta)


def load_networks(path):
    """Rebuild a learner (networks and normalizers, fresh optimizer) and the meta from a checkpoint."""
    tensors, meta = ckpt.load(path)
    pc = dict(meta["policy_config"])
    pc["entity_types"] = tuple(pc["entity_types"])
    lr = Learner(PolicyConfig(**pc), PPOConfig(**meta["ppo_config"]))
    extra = {n[len("policy.embed."):-2] for n in tensors
             if n.startswith("policy.embed.") and n.endswith(".w")} - set(lr.policy.entity_types)
    for t in sorted(extra):
        lr.add_entity_type(t)
    lr.policy.store.load_state_dict({k[7:]: v for k, v in tensors.items()
                                     if k.startswith("policy.")})
    lr.value.store.load_state_dict({k[6:]: v for k, v in tensors.items()
                                    if k.startswith("value.")})
    lr.load_norm_state(meta["norm"])
    lr.version = int(meta["version"])
    return lr, meta
