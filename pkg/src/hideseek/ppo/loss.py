"""Clipped surrogate objective with value regression and entropy bonus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch

from hideseek.policy.batch import collate
from hideseek.policy.dist import ActionDist
from hideseek.policy.net import PolicyNet, ValueNet
from hideseek.ppo.buffer import Chunk


def clipped_surrogate(ratio: torch.Tensor, adv: torch.Tensor, eps: float) -> torch.Tensor:
    """Per-step min(l*A, clip(l, 1-eps, 1+eps)*A)."""
    return torch.minimum(ratio * adv, torch.clamp(ratio, 1.0 - eps, 1.0 + eps) * adv)


@dataclass
class ChunkTensors:
    """A minibatch of chunks stacked time-major."""
    batch: object
    actions: torch.Tensor     # (L, B, 5)
    logp_old: torch.Tensor    # (L, B)
    adv: torch.Tensor         # (L, B) already standardised
    target: torch.Tensor      # (L, B) normalised returns
    mask: torch.Tensor        # (L, B)
    resets: torch.Tensor      # (L, B) bool
    pol_state: Tuple[torch.Tensor, torch.Tensor]
    val_state: Tuple[torch.Tensor, torch.Tensor]
    T: int


def stack_chunks(chunks: Sequence[Chunk], types, obs_norm=None, ret_norm=None,
                 adv_mean: float = 0.0, adv_std: float = 1.0,
                 dtype: torch.dtype = torch.float32) -> ChunkTensors:
    L = len(chunks[0])
    if any(len(c) != L for c in chunks):
        raise ValueError("chunks of different lengths in one minibatch")
    obs = [c.obs[t] for t in range(L) for c in chunks]
    batch = collate(obs, types, obs_norm).to(dtype)

    def tm(key, dt=dtype):
        return torch.as_tensor(np.stack([getattr(c, key) for c in chunks], axis=1), dtype=dt)

    ret = np.stack([c.ret for c in chunks], axis=1)
    if ret_norm is not None:
        ret = ret_norm.normalize(ret)
    adv = (np.stack([c.adv for c in chunks], axis=1) - adv_mean) / adv_std

    def state(key):
        h = np.stack([getattr(c, key)[0] for c in chunks])
        cc = np.stack([getattr(c, key)[1] for c in chunks])
        return torch.as_tensor(h, dtype=dtype), torch.as_tensor(cc, dtype=dtype)

    return ChunkTensors(batch, tm("actions", torch.int64), tm("logp"),
                        torch.as_tensor(adv, dtype=dtype), torch.as_tensor(ret, dtype=dtype),
                        tm("mask"), tm("resets", torch.bool), state("pol_state"),
                        state("val_state"), L)


def ppo_loss(policy: PolicyNet, value: ValueNet, x: ChunkTensors, clip: float = 0.2,
             ent_coef: float = 0.01, vf_coef: float = 1.0) -> Tuple[torch.Tensor, Dict[str, float]]:
    """Loss = -clipped surrogate + vf_coef * value MSE - ent_coef * entropy.

    Both networks unroll the whole chunk from their stored initial state, so
    gradients flow back through every step of the chunk.
    """
    cat, binl, _, _ = policy.forward(x.batch, x.pol_state, T=x.T, resets=x.resets)
    dist = ActionDist(cat, binl)
    logp = dist.log_prob(x.actions)
    ratio = torch.exp(logp - x.logp_old)
    w = x.mask
    n = w.sum().clamp_min(1.0)
    surr = clipped_surrogate(ratio, x.adv, clip)
    pol_loss = -(surr * w).sum() / n
    entropy = (dist.entropy() * w).sum() / n
    v, _ = value.forward(x.batch, x.val_state, T=x.T, resets=x.resets)
    v_loss = (((v - x.target) ** 2) * w).sum() / n
    loss = pol_loss + vf_coef * v_loss - ent_coef * entropy
    with torch.no_grad():
        clipped = ((ratio - 1.0).abs() > clip).to(w.dtype)
        metrics = {
            "loss": float(loss), "policy_loss": float(pol_loss), "value_loss": float(v_loss),
            "entropy": float(entropy), "clip_frac": float((clipped * w).sum() / n),
            "approx_kl": float(((x.logp_old - logp) * w).sum() / n),
        }
    return loss, metrics
