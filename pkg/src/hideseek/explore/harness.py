"""Behaviour harness for intrinsic-motivation agents in a quarter-restricted arena."""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np
import torch

from hideseek.envs import EnvConfig, make_env, reset_with_retry
from hideseek.envs.stats import movement_summary
from hideseek.policy.batch import collate
from hideseek.policy.dist import ActionDist, sample_actions, to_action_triple
from hideseek.rollout.collect import episode_seed


def quarter_arena(n_agents=(1, 3), **overrides) -> EnvConfig:
    """Hide-and-seek arena, one team only, every object spawned in one quarter."""
    base = dict(n_hiders=tuple(n_agents), n_seekers=(0, 0), quarter_spawn=True,
                prep_fraction=0.0)
    base.update(overrides)
    return EnvConfig.preset("hide_and_seek", **base)


def movement_report(policy=None, obs_norm=None, episodes: int = 10, seed: int = 0,
                    env_config: Optional[EnvConfig] = None) -> Dict[str, float]:
    """Mean net box movement and max agent movement over ``episodes``.

    ``policy`` None means uniformly random actions.
    """
    cfg = env_config or quarter_arena()
    env = make_env(cfg)
    rng = np.random.default_rng([seed, 0x0A])
    rows = []
    for ep in range(episodes):
        obs = reset_with_retry(env, episode_seed(seed, 0xE7, ep))
        aids = list(env.learning_agents)
        state = policy.initial_state(len(aids)) if policy is not None else None
        done = False
        while not done:
            if policy is None:
                acts = {a: to_action_triple(np.concatenate([rng.integers(0, 5, 3),
                                                            rng.integers(0, 2, 2)]))
                        for a in aids}
            else:
                with torch.no_grad():
                    b = collate([obs[a] for a in aids], policy.entity_types, obs_norm)
                    cat, binl, _, state = policy.forward(b, state)
                    a_np, _, _ = sample_actions(ActionDist(cat[0], binl[0]), rng)
                acts = {a: to_action_triple(a_np[k]) for k, a in enumerate(aids)}
            obs, _, done, _ = env.step(acts)
        rows.append(movement_summary(env.trace))
    return {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}
