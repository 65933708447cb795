"""Single-agent evaluation tasks that reuse the hide-and-seek observation layout."""

from __future__ import annotations

import math
from typing import Dict, List

import numpy as np

from hideseek.envs import rewards as R
from hideseek.envs.base import BaseEnv
from hideseek.envs.layout import Placer, Rect, bsp_layout, open_layout
from hideseek.envs.observation import HNS_ENTITY_TYPES
from hideseek.sim import factory as fx
from hideseek.sim.bodies import Kind, WorldState

SHELTER_EDGE_CLEARANCE = 3.0
SHELTER_DIAMETER = (1.5, 2.0)


class TransferEnv(BaseEnv):
    """One learning agent, team flags and prep timer zeroed in observations."""

    hide_team = True

    def _spawn(self, rng, layout, boxes: List, ramps: List, extra: List = (),
               agent_region: Rect = None):
        B = self.config.bounds
        bid = 0
        agent = fx.agent(bid, 0.0, 0.0, team=fx.HIDER,
                         heading=float(rng.uniform(-math.pi, math.pi)))
        bodies = [agent]
        for b in list(boxes) + list(ramps) + list(extra):
            bid += 1
            b.id = bid
            bodies.append(b)
        walls = layout.wall_bodies(bid + 1)
        placer = Placer(rng, walls)
        arena = Rect(0.0, 0.0, B, B)
        for b in bodies:
            placer.place(b, agent_region if (b is agent and agent_region) else arena)
        self.agent_id = agent.id
        self.learning_agents = [agent.id]
        self.scripted = {}
        return WorldState(bodies=bodies + walls, horizon=self.config.horizon, bounds=B), placer

    def _rewards(self, in_prep: bool, done: bool) -> Dict[int, float]:
        return {self.agent_id: float(self._score(done))}

    def _score(self, done: bool) -> float:
        raise NotImplementedError


class LockAndReturnEnv(TransferEnv):
    """Find the box, lock it, walk back to where the episode started."""

    def _build(self, rng):
        cfg = self.config
        n_rooms = int(rng.integers(cfg.n_rooms[0], cfg.n_rooms[1] + 1))
        layout = (bsp_layout(rng, cfg.bounds, n_rooms) if n_rooms > 1
                  else open_layout(cfg.bounds))
        box = fx.box(0, 0.0, 0.0, vertical=bool(rng.integers(2)))
        world, _ = self._spawn(rng, layout, [box], [])
        self.layout = layout
        self.box_id = box.id
        a = world[self.agent_id]
        self.scorer = R.LockReturnScorer((a.x, a.y), box.id, a.id)
        self.scorer.begin(world)
        self._was_locked = False
        return world

    def _before_physics(self):
        self._was_locked = self.world[self.box_id].locked_by_team is not None

    def _score(self, done):
        return self.scorer(self.world, self._was_locked, done)


class SequentialLockEnv(TransferEnv):
    """Rooms without doors, one ramp each; boxes lock only in a hidden order."""

    def _build(self, rng):
        cfg = self.config
        n_rooms = int(rng.integers(cfg.n_rooms[0], cfg.n_rooms[1] + 1))
        layout = bsp_layout(rng, cfg.bounds, n_rooms, doors=False)
        n_boxes = int(rng.integers(cfg.n_boxes[0], cfg.n_boxes[1] + 1))
        boxes = [fx.box(0, 0.0, 0.0) for _ in range(n_boxes)]
        ramps = [fx.ramp(0, 0.0, 0.0, vertical=bool(rng.integers(2)))
                 for _ in range(min(cfg.n_ramps, len(layout.rooms)))]
        world, _ = self._spawn(rng, layout, boxes, [])
        # one ramp per room, placed after everything else
        placer = Placer(rng, world.bodies)
        for r, room in zip(ramps, layout.rooms):
            r.id = world.next_id()
            placer.place(r, room)
            world.add(r)
        self.layout = layout
        order = [b.id for b in boxes]
        rng.shuffle(order)
        self.scorer = R.SequentialLockScorer(order, self.agent_id)
        self.scorer.begin(world)
        self._locked_before = set()
        return world

    def _lock_gate(self):
        return self.scorer.gate

    def _before_physics(self):
        w = self.world
        self._locked_before = {b for b in self.scorer.order if w[b].locked_by_team is not None}

    def _score(self, done):
        return self.scorer(self.world, self._locked_before)


class BlueprintEnv(TransferEnv):
    """Push cubes onto 1-4 target sites; finishes early once every site is covered."""

    entity_types = HNS_ENTITY_TYPES + ("site",)

    def _build(self, rng):
        cfg = self.config
        B = cfg.bounds
        layout = open_layout(B)
        k = int(rng.integers(cfg.n_sites[0], cfg.n_sites[1] + 1))
        n_boxes = int(rng.integers(cfg.n_boxes[0], cfg.n_boxes[1] + 1))
        boxes = [fx.box(0, 0.0, 0.0) for _ in range(n_boxes)]
        world, _ = self._spawn(rng, layout, boxes, [])
        # Sites may sit under nothing but must not overlap each other or walls.
        site_placer = Placer(rng, list(world.of_kind(Kind.WALL)))
        for _ in range(k):
            s = fx.site(world.next_id(), 0.0, 0.0)
            site_placer.place(s, Rect(1.0, 1.0, B - 1.0, B - 1.0))
            world.add(s)
        self.n_sites = k
        self.completed = False
        return world

    def _geometry(self):
        w = self.world
        sites = list(w.of_kind(Kind.SITE))
        boxes = list(w.of_kind(Kind.BOX))
        return (np.array([[s.x, s.y] for s in sites]),
                np.array([c for s in sites for c in s.corners()]),
                np.array([[b.x, b.y] for b in boxes]).reshape(-1, 2),
                np.array([c for b in boxes for c in b.corners()]).reshape(-1, 2))

    def _early_done(self):
        sc, scor, bc, bcor = self._geometry()
        self.completed = R.blueprint_complete(sc, scor, bc, bcor)
        return self.completed

    def _score(self, done):
        sc, scor, bc, bcor = self._geometry()
        r = R.blueprint_reward(scor, bcor)
        if self.completed:
            r += R.BLUEPRINT_COMPLETION_SCALE * self.n_sites
        return r


class ShelterEnv(TransferEnv):
    """Hide a static cylinder from rays cast off the arena boundary."""

    def _build(self, rng):
        cfg = self.config
        B = cfg.bounds
        layout = open_layout(B)
        d = float(rng.uniform(*SHELTER_DIAMETER))
        m = SHELTER_EDGE_CLEARANCE
        cyl = fx.cylinder(0, float(rng.uniform(m, B - m)), float(rng.uniform(m, B - m)), d)
        n_boxes = int(rng.integers(cfg.n_boxes[0], cfg.n_boxes[1] + 1))
        n_el = min(cfg.min_elongated, n_boxes)
        boxes = [fx.box(0, 0.0, 0.0, elongated=i < n_el, vertical=bool(rng.integers(2)))
                 for i in range(n_boxes)]
        world, _ = self._spawn_with_cylinder(rng, layout, cyl, boxes)
        return world

    def _spawn_with_cylinder(self, rng, layout, cyl, boxes):
        B = self.config.bounds
        agent = fx.agent(0, 0.0, 0.0, team=fx.HIDER,
                         heading=float(rng.uniform(-math.pi, math.pi)))
        cyl.id = 1
        for i, b in enumerate(boxes):
            b.id = 2 + i
        walls = layout.wall_bodies(2 + len(boxes))
        placer = Placer(rng, walls + [cyl])
        arena = Rect(0.0, 0.0, B, B)
        for b in [agent] + boxes:
            placer.place(b, arena)
        self.agent_id = agent.id
        self.cylinder_id = cyl.id
        self.learning_agents = [agent.id]
        self.scripted = {}
        world = WorldState(bodies=[agent, cyl] + boxes + walls, horizon=self.config.horizon,
                           bounds=B)
        return world, placer

    def _score(self, done):
        return R.shelter_reward(self.world, self.cylinder_id)
