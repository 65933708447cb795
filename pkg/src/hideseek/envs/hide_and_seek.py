"""Hide-and-seek, the quadrant map, the food variants and the desk chase task."""

from __future__ import annotations

import math
from typing import Dict, List

import numpy as np

from hideseek.envs import rewards as R
from hideseek.envs.base import BaseEnv, RandomWalker
from hideseek.envs.config import EnvConfig
from hideseek.envs.layout import Placer, Rect, ResetError, bsp_layout, open_layout, quadrant_layout
from hideseek.sim import factory as fx
from hideseek.sim.bodies import Kind, WorldState
from hideseek.sim.physics import DEFAULT_PHYSICS, PhysicsConfig

HNS_FAMILY = ("hide_and_seek", "quadrant", "hns_food", "dynamic_food", "food_protection", "chase")
FOOD_SIDE = {"hns_food": 1 / 4, "dynamic_food": 1 / 5, "food_protection": 2 / 3}
FIXED_BOX_COUNT = 7
FOOD_PROTECTION_FREEZE = 60


def _draw(rng: np.random.Generator, lo_hi, randomize: bool) -> int:
    lo, hi = lo_hi
    return int(rng.integers(lo, hi + 1)) if randomize else lo


class HideAndSeekEnv(BaseEnv):
    def __init__(self, config: EnvConfig, physics_cfg: PhysicsConfig = None):
        if config.variant not in HNS_FAMILY:
            raise ValueError(f"{config.variant} is not a hide-and-seek variant")
        if physics_cfg is None and config.variant == "quadrant":
            physics_cfg = PhysicsConfig(lockable=frozenset({Kind.BOX}))
        super().__init__(config, physics_cfg)
        self.layout = None
        self.food_region = None
        self.consumed = 0

    # -- construction ---------------------------------------------------------------
    def _layout(self, rng):
        cfg = self.config
        if cfg.variant == "quadrant":
            return quadrant_layout(rng, cfg.bounds)
        if cfg.level.walls and cfg.variant in ("hide_and_seek", "hns_food"):
            n_rooms = int(rng.integers(cfg.n_rooms[0], cfg.n_rooms[1] + 1))
            return bsp_layout(rng, cfg.bounds, n_rooms, exterior=cfg.exterior_walls)
        return open_layout(cfg.bounds, exterior=cfg.exterior_walls)

    def _build(self, rng: np.random.Generator) -> WorldState:
        cfg = self.config
        lvl = cfg.level
        B = cfg.bounds
        self.layout = layout = self._layout(rng)
        n_h = _draw(rng, cfg.n_hiders, lvl.team_size)
        n_s = _draw(rng, cfg.n_seekers, lvl.team_size)
        if lvl.box_count:
            n_boxes = _draw(rng, cfg.n_boxes, True)
        else:
            n_boxes = FIXED_BOX_COUNT if cfg.variant in ("hide_and_seek", "hns_food") else cfg.n_boxes[0]
        n_el = min(cfg.min_elongated, n_boxes)
        if lvl.box_shape and cfg.variant != "quadrant":
            n_el += int(rng.binomial(n_boxes - n_el, 0.5))
        place_rng = rng if lvl.initial_location else np.random.default_rng(0)

        bodies = []
        bid = 0
        for i in range(n_h + n_s):
            team = fx.HIDER if i < n_h else fx.SEEKER
            bodies.append(fx.agent(bid, 0.0, 0.0, team=team,
                                   heading=float(place_rng.uniform(-math.pi, math.pi))))
            bid += 1
        for i in range(n_boxes):
            bodies.append(fx.box(bid, 0.0, 0.0, elongated=i < n_el,
                                 vertical=bool(place_rng.integers(2))))
            bid += 1
        for _ in range(cfg.n_ramps):
            bodies.append(fx.ramp(bid, 0.0, 0.0, vertical=bool(place_rng.integers(2))))
            bid += 1
        pellets = []
        for _ in range(cfg.n_pellets):
            pellets.append(fx.pellet(bid, 0.0, 0.0))
            bid += 1
        walls = layout.wall_bodies(bid)

        placer = Placer(place_rng, walls)
        arena = Rect(0.0, 0.0, B, B)
        if cfg.quarter_spawn:
            arena = Rect(0.0, 0.0, B / 2, B / 2)
        room = Rect(B / 2, 0.0, B, B / 2)

        def outside_room(body):
            return not room.shrink(-body.aabb_half()[0]).contains(body.x, body.y)

        if cfg.variant in FOOD_SIDE:
            side = FOOD_SIDE[cfg.variant] * B
            self.food_region = Rect((B - side) / 2, (B - side) / 2, (B + side) / 2, (B + side) / 2)
            food_placer = Placer(place_rng, walls, clearance=0.05)
            for p in pellets:
                food_placer.place(p, self.food_region)
        for b in bodies:
            if cfg.variant == "quadrant":
                if b.kind == Kind.BOX:
                    placer.place(b, room)
                elif b.kind == Kind.RAMP:
                    inside = bool(place_rng.integers(2))
                    placer.place(b, room if inside else arena,
                                 accept=None if inside else outside_room)
                elif b.team == fx.SEEKER:
                    placer.place(b, arena, accept=outside_room)
                else:
                    placer.place(b, arena)
            else:
                placer.place(b, arena)
        self.consumed = 0
        world = WorldState(bodies=bodies + pellets + walls, horizon=cfg.horizon, bounds=B)
        agents = [b for b in bodies if b.kind == Kind.AGENT]
        self.scripted = {}
        self.learning_agents = []
        for a in agents:
            scripted = (a.team == fx.HIDER and cfg.scripted_hiders) or (
                a.team == fx.SEEKER and cfg.scripted_seekers)
            if scripted:
                self.scripted[a.id] = RandomWalker(rng)
            else:
                self.learning_agents.append(a.id)
        return world

    # -- dynamics --------------------------------------------------------------------
    def _mobility(self, t: int) -> Dict[int, bool]:
        mob = {}
        for a in self.world.agents:
            if a.team == fx.SEEKER and t < self.prep_steps:
                mob[a.id] = False
            if (self.config.variant == "food_protection" and a.team == fx.HIDER
                    and t >= self.config.horizon - FOOD_PROTECTION_FREEZE):
                mob[a.id] = False
        return mob

    def _after_physics(self, in_prep: bool) -> None:
        w = self.world
        self.consumed = 0
        self._eaten = 0
        if self.config.variant == "food_protection" and not in_prep:
            seekers = R.team(w, fx.SEEKER)
            for pid in R.edible_pellets(w, seekers, need_visible=False):
                w.remove(pid)
                self.consumed += 1
        elif self.config.variant == "dynamic_food" and not in_prep and not R.seen_hiders(w):
            eaten = R.edible_pellets(w, R.team(w, fx.HIDER))
            for pid in eaten:
                p = w[pid]
                p.x = float(self.rng.uniform(self.food_region.x0, self.food_region.x1))
                p.y = float(self.rng.uniform(self.food_region.y0, self.food_region.y1))
            self._eaten = len(eaten)

    def _rewards(self, in_prep: bool, done: bool) -> Dict[int, float]:
        w = self.world
        v = self.config.variant
        if v == "hns_food":
            out = R.hns_food_reward(w, in_prep)
        elif v == "dynamic_food":
            out = R.hns_reward(w, in_prep)
            for h in R.team(w, fx.HIDER):
                out[h.id] += float(self._eaten)
        elif v == "food_protection":
            out = R.food_protection_reward(w, in_prep, self.consumed)
        else:
            out = R.hns_reward(w, in_prep)
        if v == "quadrant" and not in_prep:
            for aid, held in w.holding.items():
                if R.out_of_bounds(w[held], w.bounds):
                    out[aid] += R.OUT_OF_BOUNDS_PENALTY
        return out


def make_hns(variant: str = "hide_and_seek", **overrides) -> HideAndSeekEnv:
    return HideAndSeekEnv(EnvConfig.preset(variant, **overrides))
