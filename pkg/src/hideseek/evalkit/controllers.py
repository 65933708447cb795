"""Action sources for evaluation and trace recording.

Every controller is called as ``controller(env, obs) -> {agent id: ActionTriple}``
once per step, for the env's learning agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import torch

from hideseek.envs.layout import Segment
from hideseek.policy.batch import collate
from hideseek.policy.dist import ActionDist, sample_actions, to_action_triple
from hideseek.sim import geometry as geo
from hideseek.sim.bodies import Kind
from hideseek.sim.factory import AGENT_RADIUS, HIDER
from hideseek.sim.physics import N_BINS, ActionTriple, DEFAULT_PHYSICS, bin_value

_LEVELS = np.array([bin_value(i) for i in range(N_BINS)])


class RandomController:
    """Uniformly random bins and grab/lock flags for every learning agent."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng([seed, 0xA11])

    def __call__(self, env, obs) -> Dict[int, ActionTriple]:
        out = {}
        for aid in env.learning_agents:
            mx, my, tq = self.rng.integers(0, N_BINS, 3).tolist()
            g, lk = self.rng.integers(0, 2, 2).tolist()
            out[aid] = ActionTriple(mx, my, tq, bool(g), bool(lk))
        return out


class PolicyController:
    """Samples from a trained policy; one recurrent state per agent, reset per episode."""

    def __init__(self, policy, obs_norm=None, seed: int = 0, greedy: bool = False):
        self.policy = policy
        self.obs_norm = obs_norm
        self.rng = np.random.default_rng([seed, 0x9011])
        self.greedy = greedy
        self.state: Dict[int, Tuple[torch.Tensor, torch.Tensor]] = {}
        self.t_last: Optional[int] = None

    @classmethod
    def from_learner(cls, learner, seed: int = 0, greedy: bool = False) -> "PolicyController":
        return cls(learner.policy, learner.obs_norm, seed, greedy)

    @torch.no_grad()
    def __call__(self, env, obs) -> Dict[int, ActionTriple]:
        if self.t_last is None or env.world.t <= self.t_last:
            self.state = {}
        self.t_last = env.world.t
        aids = list(env.learning_agents)
        if not aids:
            return {}
        H = self.policy.cfg.lstm
        zero = torch.zeros(H)
        h = torch.stack([self.state.get(a, (zero, zero))[0] for a in aids])
        c = torch.stack([self.state.get(a, (zero, zero))[1] for a in aids])
        b = collate([obs[a] for a in aids], self.policy.entity_types, self.obs_norm)
        cat, binl, _, (h2, c2) = self.policy.forward(b, (h, c))
        dist = ActionDist(cat[0], binl[0])
        if self.greedy:
            acts = dist.mode()
        else:
            acts, _, _ = sample_actions(dist, self.rng)
        for j, a in enumerate(aids):
            self.state[a] = (h2[j], c2[j])
        return {a: to_action_triple(acts[j].tolist()) for j, a in enumerate(aids)}


# -- scripted fort building ----------------------------------------------------------------

def _bin_for(v_now: float, v_want: float, damping: float = DEFAULT_PHYSICS.damping,
             accel: float = DEFAULT_PHYSICS.max_accel) -> int:
    """Bin whose force brings the next velocity closest to ``v_want``."""
    f = (v_want - (1.0 - damping) * v_now) / accel
    return int(np.argmin(np.abs(_LEVELS - f)))


def _turn_bin(omega: float, err: float) -> int:
    want = float(np.clip(0.6 * err, -DEFAULT_PHYSICS.max_ang_speed, DEFAULT_PHYSICS.max_ang_speed))
    return _bin_for(omega, want, accel=DEFAULT_PHYSICS.max_ang_accel)


def door_blocked(door: Segment, world, agent_diameter: float = 2 * AGENT_RADIUS) -> bool:
    """True when boxes leave no gap along the door wider than an agent."""
    spans = []
    for b in world.bodies:
        if b.kind != Kind.BOX:
            continue
        hx, hy = b.aabb_half()
        normal_c, normal_h = (b.x, hx) if door.vertical else (b.y, hy)
        if abs(normal_c - door.fixed) > normal_h:
            continue                      # does not straddle the wall line
        along_c, along_h = (b.y, hy) if door.vertical else (b.x, hx)
        spans.append((along_c - along_h, along_c + along_h))
    edge = door.lo
    for lo, hi in sorted(spans):
        if lo - edge >= agent_diameter:
            return False
        edge = max(edge, hi)
    return door.hi - edge < agent_diameter


@dataclass
class _Task:
    agent: int
    box: int
    door: Segment
    phase: str = "approach"
    wait: int = 0
    entry: Optional[Segment] = None      # door used to enter the room


class FortScript:
    """Two hiders each carry one box into one doorway of the quadrant room and lock it.

    Each hider moves to the side of its box that faces away from its door,
    grabs it, slides along the wall until aligned with the door, pushes the box
    into the doorway, releases and locks. Everyone else does nothing.
    """

    def __init__(self, standoff: float = 1.0, tol: float = 0.06):
        self.standoff = standoff
        self.tol = tol
        self.tasks: List[_Task] = []
        self.seed = None

    def _plan(self, env) -> None:
        w = env.world
        doors = list(env.layout.doors)
        hiders = [a for a in env.learning_agents if w[a].team == HIDER]
        boxes = [b.id for b in w.bodies if b.kind == Kind.BOX]
        if len(doors) > len(hiders) or len(doors) > len(boxes):
            raise ValueError("fort script needs one hider and one box per door")
        best = None
        for perm_h in _perms(hiders, len(doors)):
            for perm_b in _perms(boxes, len(doors)):
                cost = 0.0
                for a, bx, d in zip(perm_h, perm_b, doors):
                    cx, cy = _door_center(d)
                    cost += math.hypot(w[a].x - w[bx].x, w[a].y - w[bx].y)
                    cost += math.hypot(w[bx].x - cx, w[bx].y - cy)
                if best is None or cost < best[0]:
                    best = (cost, perm_h, perm_b)
        _, ph, pb = best
        self.tasks = [_Task(a, bx, d) for a, bx, d in zip(ph, pb, doors)]
        half = w.bounds / 2
        for task in self.tasks:
            a = w[task.agent]
            if a.x < half + AGENT_RADIUS or a.y > half - AGENT_RADIUS:
                task.entry = min(doors, key=lambda d: math.hypot(a.x - _door_center(d)[0],
                                                                 a.y - _door_center(d)[1]))
                task.phase = "enter_out"

    def __call__(self, env, obs) -> Dict[int, ActionTriple]:
        if self.seed != env.seed or env.world.t == 0:
            self.seed = env.seed
            self._plan(env)
        out = {a: ActionTriple.noop() for a in env.learning_agents}
        for task in self.tasks:
            out[task.agent] = self._act(env.world, task)
        return out

    def _goal(self, world, task: _Task):
        """Target agent position and heading for the current phase."""
        d = task.door
        box = world[task.box]
        cx, cy = _door_center(d)
        inward = _inward(d, world.bounds)            # unit vector from the wall into the room
        off = self.standoff
        if task.phase in ("enter_out", "enter_in"):
            ex, ey = _door_center(task.entry)
            nx, ny = _inward(task.entry, world.bounds)
            sgn = -1.0 if task.phase == "enter_out" else 1.0
            return ex + sgn * nx * 1.2, ey + sgn * ny * 1.2
        if task.phase == "approach":
            return box.x + inward[0] * off, box.y + inward[1] * off
        if task.phase == "align":
            # keep the box on its side of the wall, line it up with the door centre
            bx = cx if d.vertical is False else box.x
            by = cy if d.vertical else box.y
            return bx + inward[0] * off, by + inward[1] * off
        if task.phase == "push":
            return cx + inward[0] * off, cy + inward[1] * off
        return world[task.agent].x, world[task.agent].y

    def _act(self, world, task: _Task) -> ActionTriple:
        a = world[task.agent]
        box = world[task.box]
        inward = _inward(task.door, world.bounds)
        face = math.atan2(-inward[1], -inward[0])     # look from the agent toward the box
        gx, gy = self._goal(world, task)
        ex, ey = gx - a.x, gy - a.y
        dist = math.hypot(ex, ey)
        herr = geo.wrap_angle(face - a.heading)
        holding = world.holding.get(a.id) == box.id
        grab = task.phase in ("align", "push") or (task.phase == "approach" and dist < 0.15)
        lock = False
        if task.phase == "enter_out" and dist < 0.3:
            task.phase = "enter_in"
        elif task.phase == "enter_in" and dist < 0.3:
            task.phase = "approach"
        elif task.phase == "approach" and dist < 0.15 and abs(herr) < 0.2:
            task.phase = "grab"
        elif task.phase == "grab":
            grab = True
            if holding:
                task.phase = "align"
        elif task.phase == "align" and dist < self.tol and math.hypot(a.vx, a.vy) < 0.15:
            task.phase = "push"
        elif task.phase == "push" and dist < self.tol and math.hypot(a.vx, a.vy) < 0.08:
            task.phase = "release"
        elif task.phase == "release":
            grab = False
            task.wait += 1
            if task.wait >= 2:
                task.phase = "lock"
                task.wait = 0
        elif task.phase == "lock":
            lock = task.wait == 0
            task.wait += 1
            if box.locked_by_team is not None:
                task.phase = "done"
            elif task.wait > 2:
                task.wait = 0
        if task.phase in ("release", "lock", "done", "grab"):
            ex = ey = 0.0
        speed = 0.8 if task.phase in ("align", "push") else 1.0
        vx, vy = _approach_speed(ex, speed, self.tol), _approach_speed(ey, speed, self.tol)
        return ActionTriple(_bin_for(a.vx, vx), _bin_for(a.vy, vy), _turn_bin(a.omega, herr),
                            grab and task.phase not in ("release", "lock", "done"), lock)


def _approach_speed(err: float, cap: float, tol: float) -> float:
    """Per-axis speed command: proportional far away, a slow creep near the goal."""
    if abs(err) < tol / 2:
        return 0.0
    return math.copysign(min(cap, max(0.12, 0.8 * abs(err))), err)


def _perms(items, k):
    import itertools
    return itertools.permutations(items, k)


def _door_center(d: Segment):
    mid = 0.5 * (d.lo + d.hi)
    return (d.fixed, mid) if d.vertical else (mid, d.fixed)


def _inward(d: Segment, bounds: float):
    # the quadrant room is the lower-right quarter: x > bounds/2, y < bounds/2
    return (1.0, 0.0) if d.vertical else (0.0, -1.0)
