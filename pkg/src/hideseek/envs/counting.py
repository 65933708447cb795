"""Object counting: a pinned agent watches six boxes slide off behind walls."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from hideseek.envs.base import BaseEnv
from hideseek.envs.observation import Observation
from hideseek.sim import factory as fx
from hideseek.sim.bodies import WorldState

N_BOXES = 6
N_CLASSES = N_BOXES + 1
AGENT_POS = (9.0, 3.0)
LANE_Y0 = 8.0
LANE_GAP = 1.2
BOX_SPEED = 0.25
FIRST_START = 10
START_GAP = 15
PARK_MARGIN = 0.6
# Screen walls along y = SCREEN_Y, leaving a window in the middle of the view.
SCREEN_Y = 7.0
WINDOW = (6.5, 11.5)


@dataclass(frozen=True)
class CountingScript:
    """Per-box direction (+1 right, -1 left) and start step."""
    directions: Tuple[int, ...]
    starts: Tuple[int, ...]

    @property
    def label(self) -> int:
        return sum(1 for d in self.directions if d < 0)


def sample_script(rng: np.random.Generator) -> CountingScript:
    directions = tuple(int(d) for d in np.where(rng.integers(0, 2, N_BOXES) == 1, -1, 1))
    order = rng.permutation(N_BOXES)
    starts = [0] * N_BOXES
    for slot, i in enumerate(order):
        starts[int(i)] = FIRST_START + START_GAP * slot
    return CountingScript(directions, tuple(starts))


class ObjectCountingEnv(BaseEnv):
    """Agent is immobile for the whole episode; label is the number of boxes
    that left to the left. Boxes move kinematically, not under physics."""

    hide_team = True

    def _build(self, rng):
        cfg = self.config
        B = cfg.bounds
        self.script = sample_script(rng)
        agent = fx.agent(0, *AGENT_POS, team=fx.HIDER, heading=math.pi / 2)
        boxes = []
        for i in range(N_BOXES):
            # staggered so no box starts in another's line of sight
            b = fx.box(1 + i, B / 2 + (i - (N_BOXES - 1) / 2), LANE_Y0 + LANE_GAP * i)
            b.movable = False
            boxes.append(b)
        nid = 1 + N_BOXES
        walls = fx.outer_walls(nid, B) + [
            fx.wall(nid + 4, 0.0, SCREEN_Y, WINDOW[0], SCREEN_Y),
            fx.wall(nid + 5, WINDOW[1], SCREEN_Y, B, SCREEN_Y),
        ]
        self.box_ids = [b.id for b in boxes]
        self.learning_agents = [agent.id]
        self.scripted = {}
        return WorldState(bodies=[agent] + boxes + walls, horizon=cfg.horizon, bounds=B)

    @property
    def label(self) -> int:
        return self.script.label

    def _mobility(self, t):
        return {aid: False for aid in self.learning_agents}

    def _after_physics(self, in_prep):
        w = self.world
        B = w.bounds
        for bid, d, s in zip(self.box_ids, self.script.directions, self.script.starts):
            if w.t <= s:
                continue
            b = w[bid]
            target = PARK_MARGIN if d < 0 else B - PARK_MARGIN
            b.x = float(np.clip(b.x + d * BOX_SPEED, min(b.x, target), max(b.x, target)))

    def _rewards(self, in_prep, done):
        return {aid: 0.0 for aid in self.learning_agents}


def counting_episode(env: ObjectCountingEnv, seed: int) -> Tuple[List[Observation], int]:
    """Run one episode; returns the agent's observation at every step and the label."""
    obs = env.reset(seed)
    aid = env.learning_agents[0]
    stream = [obs[aid]]
    done = False
    while not done:
        obs, _, done, _ = env.step({})
        stream.append(obs[aid])
    return stream, env.label
