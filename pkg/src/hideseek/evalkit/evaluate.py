"""Evaluation-only episodes and zero-shot sweeps over entity counts."""

from __future__ import annotations

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from hideseek.envs import EnvConfig, make_env, reset_with_retry
from hideseek.envs.stats import behavior_stats
from hideseek.evalkit.curves import mean_se
from hideseek.sim.factory import HIDER, SEEKER

log = logging.getLogger(__name__)

ControllerFactory = Callable[[int], Callable]     # episode seed -> controller

SWEEP_AXES = {
    "hiders": lambda cfg, v: cfg.replace(n_hiders=(v, v)),
    "ramps": lambda cfg, v: cfg.replace(n_ramps=v),
    "boxes": lambda cfg, v: cfg.replace(n_boxes=(v, v), min_elongated=min(cfg.min_elongated, v)),
}


def run_episode(env_config: EnvConfig, controller, seed: int) -> dict:
    env = make_env(env_config)
    obs = reset_with_retry(env, seed)
    teams = {a.id: a.team for a in env.world.agents}
    returns = {aid: 0.0 for aid in env.learning_agents}
    done = False
    while not done:
        obs, rewards, done, _ = env.step(controller(env, obs))
        for aid in returns:
            returns[aid] += float(rewards.get(aid, 0.0))

    def team_mean(team):
        vals = [r for a, r in returns.items() if teams.get(a) == team]
        return float(np.mean(vals)) if vals else None

    rec = {"seed": int(env.seed), "length": env.world.t,
           "return_mean": float(np.mean(list(returns.values()))) if returns else 0.0,
           "hider_return": team_mean(HIDER), "seeker_return": team_mean(SEEKER),
           "n_agents": len(returns)}
    rec.update(behavior_stats(env.trace).as_dict())
    return rec


def evaluate(env_config: EnvConfig, factory: ControllerFactory, seeds: Sequence[int]) -> List[dict]:
    return [run_episode(env_config, factory(int(s)), int(s)) for s in seeds]


def summarize(records: Sequence[dict], key: str = "return_mean") -> dict:
    vals = [r[key] for r in records if r.get(key) is not None]
    mean, se = mean_se(vals)
    return {"key": key, "mean": mean, "se": se, "n": len(vals)}


def _in_range(cfg: EnvConfig, axis: str, v: int) -> bool:
    if axis == "hiders":
        return cfg.n_hiders[0] <= v <= cfg.n_hiders[1]
    if axis == "boxes":
        return cfg.n_boxes[0] <= v <= cfg.n_boxes[1]
    return v == cfg.n_ramps


def zero_shot_sweep(base: EnvConfig, factory: ControllerFactory, axis: str,
                    values: Sequence[int], seeds: Sequence[int]) -> List[dict]:
    """Mean hider episode return and its standard error for each axis value.

    The same seed list is used for every value. Values inside the training
    range are allowed (they serve as the in-distribution reference) and are
    flagged in the output.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {sorted(SWEEP_AXES)}")
    out = []
    for v in values:
        cfg = SWEEP_AXES[axis](base, int(v))
        recs = evaluate(cfg, factory, seeds)
        s = summarize(recs, "hider_return")
        out.append({"axis": axis, "value": int(v), "mean": s["mean"], "se": s["se"],
                    "n": s["n"], "in_training_range": _in_range(base, axis, int(v))})
    return out
