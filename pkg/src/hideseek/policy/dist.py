"""Action distribution over three 5-bin categoricals and two Bernoullis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from hideseek.sim.physics import ActionTriple


@dataclass
class ActionDist:
    cat_logits: torch.Tensor  # (..., 3, 5)
    bin_logits: torch.Tensor  # (..., 2)

    @property
    def cat_probs(self) -> torch.Tensor:
        return torch.softmax(self.cat_logits, dim=-1)

    @property
    def bin_probs(self) -> torch.Tensor:
        return torch.sigmoid(self.bin_logits)

    def log_prob(self, actions: torch.Tensor) -> torch.Tensor:
        """actions: (..., 5) integer tensor [move_x, move_y, torque, grab, lock]."""
        logp_cat = F.log_softmax(self.cat_logits, dim=-1)
        lc = logp_cat.gather(-1, actions[..., :3, None].long())[..., 0].sum(-1)
        b = actions[..., 3:].to(self.bin_logits.dtype)
        lb = (b * F.logsigmoid(self.bin_logits) + (1 - b) * F.logsigmoid(-self.bin_logits)).sum(-1)
        return lc + lb

    def mode(self) -> torch.Tensor:
        """Most likely action, (..., 5) int64."""
        cat = self.cat_logits.argmax(-1)
        b = (self.bin_logits > 0).long()
        return torch.cat([cat, b], dim=-1)

    def entropy(self) -> torch.Tensor:
        logp = F.log_softmax(self.cat_logits, dim=-1)
        ent_cat = -(logp.exp() * logp).sum(-1).sum(-1)
        p = torch.sigmoid(self.bin_logits)
        ent_bin = -(p * F.logsigmoid(self.bin_logits)
                    + (1 - p) * F.logsigmoid(-self.bin_logits)).sum(-1)
        return ent_cat + ent_bin


def sample_actions(dist: ActionDist, rng: np.random.Generator):
    """Draw one action per leading index; returns (actions int64 (...,5), log-prob, entropy).

    Sampling runs in numpy from ``rng`` so that rollouts are reproducible
    independently of torch's global generator.
    """
    with torch.no_grad():
        probs = dist.cat_probs.double().numpy()
        bprobs = dist.bin_probs.double().numpy()
    lead = probs.shape[:-2]
    flat = probs.reshape(-1, probs.shape[-1])
    cdf = np.cumsum(flat, axis=-1)
    u = rng.random((flat.shape[0], 1))
    cat = np.minimum((u > cdf).sum(-1), flat.shape[-1] - 1).reshape(*lead, probs.shape[-2])
    binary = (rng.random(bprobs.shape) < bprobs).astype(np.int64)
    acts = torch.from_numpy(np.concatenate([cat, binary], axis=-1).astype(np.int64))
    return acts, dist.log_prob(acts), dist.entropy()


def to_action_triple(row) -> ActionTriple:
    r = [int(v) for v in row]
    return ActionTriple(r[0], r[1], r[2], bool(r[3]), bool(r[4]))
