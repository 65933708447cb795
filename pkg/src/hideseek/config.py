"""Flat ``key = value`` training configuration.

Keys are grouped by prefix: ``env.*`` (EnvConfig), ``policy.*`` (PolicyConfig,
plus ``policy.preset``), ``ppo.*`` (PPOConfig, plus ``ppo.preset``) and
``train.*`` (TrainConfig). Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Union

from hideseek.envs.config import EnvConfig, config_from_mapping
from hideseek.policy.net import PolicyConfig
from hideseek.ppo.learner import PPOConfig

INTRINSIC_CHOICES = ("none", "count-box2d", "count-boxfull", "count-full", "rnd")


@dataclass(frozen=True)
class TrainConfig:
    env: EnvConfig = field(default_factory=lambda: EnvConfig.preset("chase"))
    policy: PolicyConfig = field(default_factory=PolicyConfig.desk)
    ppo: PPOConfig = field(default_factory=PPOConfig.desk)
    seed: int = 0
    workers: int = 1
    rollout_steps: int = 160
    n_envs: int = 1
    checkpoint_every: int = 10
    intrinsic: str = "none"
    intrinsic_only: bool = True
    heartbeat_timeout: float = 600.0
    max_staleness: int = 4
    name: str = "run"

    def __post_init__(self):
        if self.intrinsic not in INTRINSIC_CHOICES:
            raise ValueError(f"intrinsic must be one of {INTRINSIC_CHOICES}")
        if self.workers < 1 or self.rollout_steps < 0 or self.n_envs < 1:
            raise ValueError("workers and n_envs must be >= 1, rollout_steps >= 0")

    def replace(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)


def _coerce(default, text: str):
    if isinstance(default, bool):
        low = text.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"not a boolean: {text!r}")
        return low in ("1", "true", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(s.strip() for s in text.split(",") if s.strip())
    return text.strip()


def parse_pairs(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ValueError(f"line {n}: empty key")
        if k in out:
            raise ValueError(f"line {n}: duplicate key {k!r}")
        out[k] = v
    return out


def _build(cls, base, items: Dict[str, str], group: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kw = {}
    for k, v in items.items():
        if k not in fields:
            raise ValueError(f"unknown key {group}.{k}")
        kw[k] = _coerce(getattr(base, k), v)
    return dataclasses.replace(base, **kw)


def parse_config(text: str) -> TrainConfig:
    pairs = parse_pairs(text)
    groups: Dict[str, Dict[str, str]] = {"env": {}, "policy": {}, "ppo": {}, "train": {}}
    for k, v in pairs.items():
        head, _, rest = k.partition(".")
        if head not in groups or not rest:
            raise ValueError(f"unknown key {k!r}; expected env.*, policy.*, ppo.* or train.*")
        groups[head][rest] = v
    env = config_from_mapping(groups["env"])
    pol_items = dict(groups["policy"])
    preset = pol_items.pop("preset", "desk")
    if preset not in ("desk", "paper"):
        raise ValueError("policy.preset must be desk or paper")
    policy = _build(PolicyConfig, getattr(PolicyConfig, preset)(), pol_items, "policy")
    ppo_items = dict(groups["ppo"])
    ppo_preset = ppo_items.pop("preset", "desk")
    if ppo_preset not in ("desk", "paper"):
        raise ValueError("ppo.preset must be desk or paper")
    ppo_base = PPOConfig.desk() if ppo_preset == "desk" else PPOConfig()
    ppo = PPOConfig(**dataclasses.asdict(_build(PPOConfig, ppo_base, ppo_items, "ppo")))
    train = _build(TrainConfig, TrainConfig(env=env, policy=policy, ppo=ppo), groups["train"],
                   "train")
    return TrainConfig(**{f.name: getattr(train, f.name) for f in dataclasses.fields(train)})


def load_config(path: Union[str, Path]) -> TrainConfig:
    return parse_config(Path(path).read_text())


def _fmt(v) -> str:
    if isinstance(v, tuple):
        if len(v) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in v):
            return f"{v[0]}-{v[1]}"
        return ",".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def env_to_mapping(env: EnvConfig) -> Dict[str, str]:
    """Flat string form of an EnvConfig; config_from_mapping inverts it."""
    return {f.name: _fmt(getattr(env, f.name)) for f in dataclasses.fields(env)}


def dump_config(cfg: TrainConfig) -> str:
    """Every hyperparameter, one ``key = value`` per line; parse_config inverts it."""
    lines = []
    for group, obj in (("env", cfg.env), ("policy", cfg.policy), ("ppo", cfg.ppo)):
        for f in dataclasses.fields(obj):
            lines.append(f"{group}.{f.name} = {_fmt(getattr(obj, f.name))}")
    for f in dataclasses.fields(cfg):
        if f.name in ("env", "policy", "ppo"):
            continue
        lines.append(f"train.{f.name} = {_fmt(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
