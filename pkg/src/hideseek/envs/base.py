"""Shared multi-agent environment loop."""

from __future__ import annotations

import logging
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from hideseek.envs.config import EnvConfig
from hideseek.envs.observation import HNS_ENTITY_TYPES, Observation, build_observation
from hideseek.envs.stats import EpisodeTrace
from hideseek.sim import physics
from hideseek.sim.bodies import WorldState
from hideseek.sim.physics import ActionTriple, PhysicsConfig

log = logging.getLogger(__name__)


class RandomWalker:
    """Scripted agent that holds a random move for a few steps at a time."""

    def __init__(self, rng: np.random.Generator, switch_prob: float = 0.15):
        self.rng = rng
        self.switch_prob = switch_prob
        self.current = ActionTriple.noop()

    def __call__(self) -> ActionTriple:
        if self.rng.random() < self.switch_prob or self.current == ActionTriple.noop():
            mx, my, tq = self.rng.integers(0, 5, 3).tolist()
            self.current = ActionTriple(mx, my, tq)
        return self.current


class BaseEnv:
    """Reset/step loop around a WorldState.

    Subclasses build the world in ``_build`` and score transitions in
    ``_rewards``. Observations are produced for the learning agents only.
    """

    entity_types: Tuple[str, ...] = HNS_ENTITY_TYPES
    hide_team: bool = False

    def __init__(self, config: EnvConfig, physics_cfg: Optional[PhysicsConfig] = None):
        self.config = config
        self.physics = physics_cfg or physics.DEFAULT_PHYSICS
        self.world: Optional[WorldState] = None
        self.rng: Optional[np.random.Generator] = None
        self.trace: Optional[EpisodeTrace] = None
        self.learning_agents: List[int] = []
        self.scripted: Dict[int, RandomWalker] = {}
        self.seed: Optional[int] = None
        self.done = False

    # -- hooks -------------------------------------------------------------------
    def _build(self, rng: np.random.Generator) -> WorldState:
        raise NotImplementedError

    def _rewards(self, in_prep: bool, done: bool) -> Dict[int, float]:
        raise NotImplementedError

    def _before_physics(self) -> None:
        pass

    def _after_physics(self, in_prep: bool) -> None:
        pass

    def _lock_gate(self):
        return None

    def _mobility(self, t: int) -> Dict[int, bool]:
        return {}

    def _early_done(self) -> bool:
        return False

    # -- public API ----------------------------------------------------------------
    @property
    def prep_steps(self) -> int:
        return self.config.prep_steps

    def in_prep(self, t: Optional[int] = None) -> bool:
        t = self.world.t if t is None else t
        return t < self.prep_steps

    def prep_remaining(self) -> float:
        if self.prep_steps <= 0:
            return 0.0
        return max(0.0, (self.prep_steps - self.world.t) / self.prep_steps)

    def reset(self, seed: Optional[int] = None) -> Dict[int, Observation]:
        self.seed = self.config.seed if seed is None else int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.world = self._build(self.rng)
        self.world.seed = self.seed
        self.done = False
        self.trace = EpisodeTrace.start(self.world, self.prep_steps)
        return self.observe_all()

    def observe(self, agent_id: int) -> Observation:
        return build_observation(self.world, agent_id,
                                 0.0 if self.hide_team else self.prep_remaining(),
                                 self.entity_types, hide_team=self.hide_team)

    def observe_all(self) -> Dict[int, Observation]:
        return {aid: self.observe(aid) for aid in self.learning_agents}

    def step(self, actions: Mapping[int, ActionTriple]):
        if self.done:
            raise physics.EpisodeOver("episode finished; call reset()")
        w = self.world
        t = w.t
        in_prep = self.in_prep(t)
        acts = dict(actions)
        for aid, walker in self.scripted.items():
            acts[aid] = walker()
        self._before_physics()
        physics.step(w, acts, self._mobility(t), self.physics, self._lock_gate())
        self._after_physics(in_prep)
        done = w.t >= w.horizon or self._early_done()
        rewards = self._rewards(in_prep, done)
        self.done = done
        self.trace.record(w)
        info = {"t": w.t, "in_prep": in_prep}
        return self.observe_all(), rewards, done, info
