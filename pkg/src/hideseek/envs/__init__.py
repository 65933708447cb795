"""Game variants, transfer tasks and the registry that builds them from a config."""

from hideseek.envs.base import BaseEnv, RandomWalker
from hideseek.envs.config import PRESETS, VARIANTS, EnvConfig, config_from_mapping
from hideseek.envs.counting import ObjectCountingEnv, counting_episode
from hideseek.envs.hide_and_seek import HNS_FAMILY, HideAndSeekEnv
from hideseek.envs.layout import ResetError
from hideseek.envs.observation import ENTITY_DIMS, HNS_ENTITY_TYPES, SELF_DIM, Observation
from hideseek.envs.stats import BehaviorStats, EpisodeTrace, behavior_stats, movement_summary
from hideseek.envs.transfer_tasks import (
    BlueprintEnv,
    LockAndReturnEnv,
    SequentialLockEnv,
    ShelterEnv,
)

_CLASSES = {
    "object_counting": ObjectCountingEnv,
    "lock_and_return": LockAndReturnEnv,
    "sequential_lock": SequentialLockEnv,
    "blueprint": BlueprintEnv,
    "shelter": ShelterEnv,
}


def make_env(config) -> BaseEnv:
    """Build an environment from an EnvConfig or a variant name."""
    if isinstance(config, str):
        config = EnvConfig.preset(config)
    cls = HideAndSeekEnv if config.variant in HNS_FAMILY else _CLASSES[config.variant]
    return cls(config)


def reset_with_retry(env: BaseEnv, seed: int, attempts: int = 10):
    """Reset, re-seeding deterministically when placement fails."""
    for k in range(attempts):
        try:
            return env.reset(seed + k * 1_000_003)
        except ResetError:
            continue
    raise ResetError(f"reset failed for seed {seed} after {attempts} re-seeds")


__all__ = [
    "BaseEnv", "BehaviorStats", "BlueprintEnv", "ENTITY_DIMS", "EnvConfig", "EpisodeTrace",
    "HNS_ENTITY_TYPES", "HideAndSeekEnv", "LockAndReturnEnv", "ObjectCountingEnv",
    "Observation", "PRESETS", "RandomWalker", "ResetError", "SELF_DIM", "SequentialLockEnv",
    "ShelterEnv", "VARIANTS", "behavior_stats", "config_from_mapping", "counting_episode",
    "make_env", "movement_summary", "reset_with_retry",
]
