"""Deterministic 2.5-D kinematics with grab, lock and two elevation levels.

Everything runs on plain Python floats in a fixed iteration order so that a
seed plus an action sequence always reproduces the same state stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

from hideseek.sim import geometry as geo
from hideseek.sim.bodies import Body, Elevation, EpisodeOver, Kind, UnknownAgent, WorldState

N_BINS = 5
LOCKABLE_DEFAULT = frozenset({Kind.BOX, Kind.RAMP})


def bin_value(index: int) -> float:
    """Map a bin index 0..4 onto {-1, -0.5, 0, 0.5, 1}."""
    if not 0 <= index < N_BINS:
        raise ValueError(f"bin index {index} outside 0..{N_BINS - 1}")
    return (index - (N_BINS - 1) / 2) / ((N_BINS - 1) / 2)


@dataclass(frozen=True)
class ActionTriple:
    move_x: int = 2
    move_y: int = 2
    torque: int = 2
    grab: bool = False
    lock: bool = False

    def __post_init__(self):
        for name in ("move_x", "move_y", "torque"):
            v = getattr(self, name)
            if not 0 <= v < N_BINS:
                raise ValueError(f"{name}={v} outside 0..{N_BINS - 1}")

    @classmethod
    def noop(cls) -> "ActionTriple":
        return cls()


@dataclass(frozen=True)
class PhysicsConfig:
    damping: float = 0.25
    max_accel: float = 0.25
    max_ang_accel: float = 0.1
    agent_speed_cap: float = 1.0
    grabbed_speed_cap: float = 0.8
    max_ang_speed: float = 0.5
    collision_iters: int = 4
    substep_len: float = 0.25
    grab_radius: float = 1.5
    lock_radius: float = 1.5
    reach_half_angle: float = math.radians(45.0)
    world_margin: float = 3.0
    lockable: frozenset = field(default=LOCKABLE_DEFAULT)


DEFAULT_PHYSICS = PhysicsConfig()
_EPS = 1e-6


def _agent(world: WorldState, agent_id: int) -> Body:
    if agent_id not in world or world[agent_id].kind != Kind.AGENT:
        raise UnknownAgent(agent_id)
    return world[agent_id]


def _reachable(world: WorldState, agent: Body, kinds, radius, half_angle):
    """Candidate bodies in front of the agent, nearest first."""
    found = []
    for b in world.bodies:
        if b.kind not in kinds or b.id == agent.id:
            continue
        d = math.hypot(b.x - agent.x, b.y - agent.y)
        if d > radius:
            continue
        if not geo.in_cone(agent.x, agent.y, agent.heading, b.x, b.y, half_angle):
            continue
        found.append((d, b.id, b))
    found.sort(key=lambda item: (item[0], item[1]))
    return [b for _, _, b in found]


def release(world: WorldState, agent_id: int) -> None:
    held = world.holding.pop(agent_id, None)
    if held is not None and held in world:
        world[held].grabbed_by = None


def attempt_grab(world: WorldState, agent_id: int,
                 cfg: PhysicsConfig = DEFAULT_PHYSICS) -> Optional[int]:
    """Bind the closest grabbable body in front of the agent, if any."""
    agent = _agent(world, agent_id)
    if agent_id in world.holding:
        return world.holding[agent_id]
    for b in _reachable(world, agent, (Kind.BOX, Kind.RAMP), cfg.grab_radius,
                        cfg.reach_half_angle):
        if not b.movable or b.locked_by_team is not None or b.grabbed_by is not None:
            continue
        b.grabbed_by = agent_id
        world.holding[agent_id] = b.id
        return b.id
    return None


def attempt_lock(world: WorldState, agent_id: int, cfg: PhysicsConfig = DEFAULT_PHYSICS,
                 gate: Optional[Callable[[WorldState, Body, Body], bool]] = None) -> Optional[int]:
    """Toggle the lock on the closest lockable body in front of the agent.

    Unlocked bodies get locked by the agent's team, bodies locked by the same
    team get unlocked, bodies locked by the other team are left alone.
    ``gate`` may veto a lock (never an unlock). Returns the id of the body
    whose lock state changed.
    """
    agent = _agent(world, agent_id)
    candidates = _reachable(world, agent, cfg.lockable, cfg.lock_radius, cfg.reach_half_angle)
    for b in candidates:
        if b.grabbed_by is not None and b.grabbed_by != agent_id:
            continue
        if b.locked_by_team is None:
            if gate is not None and not gate(world, agent, b):
                return None
            if b.grabbed_by == agent_id:
                release(world, agent_id)
            b.locked_by_team = agent.team
            b.vx = b.vy = b.omega = 0.0
            return b.id
        if b.locked_by_team == agent.team:
            b.locked_by_team = None
            return b.id
        return None
    return None


# Collision rules -------------------------------------------------------------

def _collides(a: Body, b: Body) -> bool:
    ka, kb = a.kind, b.kind
    if ka in (Kind.PELLET, Kind.SITE) or kb in (Kind.PELLET, Kind.SITE):
        return False
    if ka == Kind.AGENT and kb == Kind.AGENT:
        return a.elevation == b.elevation
    if ka == Kind.AGENT or kb == Kind.AGENT:
        agent, other = (a, b) if ka == Kind.AGENT else (b, a)
        if other.kind == Kind.CYLINDER:
            return True
        if agent.elevation == Elevation.RAISED:
            return False
        return other.kind in (Kind.WALL, Kind.BOX)
    return True


def _mtv(a: Body, b: Body):
    if a.is_round and b.is_round:
        return geo.mtv_circle_circle(a.x, a.y, a.hx, b.x, b.y, b.hx)
    if a.is_round:
        bhx, bhy = b.aabb_half()
        return geo.mtv_circle_rect(a.x, a.y, a.hx, b.x, b.y, bhx, bhy)
    ahx, ahy = a.aabb_half()
    if b.is_round:
        t = geo.mtv_circle_rect(b.x, b.y, b.hx, a.x, a.y, ahx, ahy)
        return None if t is None else (-t[0], -t[1])
    bhx, bhy = b.aabb_half()
    return geo.mtv_rect_rect(a.x, a.y, ahx, ahy, b.x, b.y, bhx, bhy)


def _reach(b: Body) -> float:
    hx, hy = b.aabb_half()
    return max(hx, hy) * 1.4143


class _Groups:
    """Rigid clusters: an agent and whatever it holds move as one."""

    def __init__(self, world: WorldState):
        self.of: Dict[int, int] = {}
        self.members: Dict[int, List[Body]] = {}
        for b in world.bodies:
            if b.kind == Kind.AGENT or (b.movable and b.locked_by_team is None):
                self.of[b.id] = b.id
                self.members[b.id] = [b]
        for aid, held in sorted(world.holding.items()):
            if held in self.of and aid in self.of:
                self.members[aid].append(world[held])
                del self.members[held]
                self.of[held] = aid

    def shift(self, gid: int, dx: float, dy: float) -> None:
        for m in self.members[gid]:
            m.x += dx
            m.y += dy


def _resolve(world: WorldState, groups: _Groups, cfg: PhysicsConfig) -> None:
    movers = [b for b in world.bodies if b.id in groups.of]
    statics = [b for b in world.bodies
               if b.id not in groups.of and b.kind not in (Kind.PELLET, Kind.SITE)]
    reach = {b.id: _reach(b) for b in world.bodies}

    def settle(a: Body, b: Body, static: bool) -> None:
        ra = reach[a.id] + reach[b.id]
        if abs(a.x - b.x) > ra or abs(a.y - b.y) > ra:
            return
        if not _collides(a, b):
            return
        t = _mtv(a, b)
        if t is None:
            return
        if static:
            groups.shift(groups.of[a.id], t[0], t[1])
        else:
            groups.shift(groups.of[a.id], 0.5 * t[0], 0.5 * t[1])
            groups.shift(groups.of[b.id], -0.5 * t[0], -0.5 * t[1])

    for _ in range(cfg.collision_iters):
        for i, a in enumerate(movers):
            for b in movers[i + 1:]:
                if groups.of[a.id] != groups.of[b.id]:
                    settle(a, b, False)
            for s in statics:
                settle(a, s, True)
    # Final static-only pass: nothing may be left inside a wall.
    for a in movers:
        for s in statics:
            settle(a, s, True)


def _clamp_groups(world: WorldState, groups: _Groups, cfg: PhysicsConfig) -> None:
    lo, hi = -cfg.world_margin, world.bounds + cfg.world_margin
    for gid, members in groups.members.items():
        lead = world[gid]
        dx = min(max(lead.x, lo), hi) - lead.x
        dy = min(max(lead.y, lo), hi) - lead.y
        if dx or dy:
            groups.shift(gid, dx, dy)


def _supported(agent: Body, world: WorldState, kinds) -> bool:
    for b in world.bodies:
        if b.kind in kinds:
            hx, hy = b.aabb_half()
            if geo.circle_rect_overlap(agent.x, agent.y, agent.hx, b.x, b.y, hx, hy) > _EPS:
                return True
    return False


def update_elevation(world: WorldState) -> WorldState:
    """Ramps lift agents; boxes and walls keep them up; otherwise they drop."""
    for agent in world.agents:
        if _supported(agent, world, (Kind.RAMP,)):
            agent.elevation = Elevation.RAISED
        elif agent.elevation == Elevation.RAISED and _supported(agent, world, (Kind.BOX, Kind.WALL)):
            agent.elevation = Elevation.RAISED
        else:
            agent.elevation = Elevation.GROUND
    return world


def _cap(vx: float, vy: float, cap: float):
    s = math.hypot(vx, vy)
    if s > cap:
        k = cap / s
        return vx * k, vy * k
    return vx, vy


def step(world: WorldState, actions: Mapping[int, ActionTriple],
         mobility: Optional[Mapping[int, bool]] = None,
         cfg: PhysicsConfig = DEFAULT_PHYSICS,
         lock_gate: Optional[Callable[[WorldState, Body, Body], bool]] = None) -> WorldState:
    """Advance the world by one timestep, mutating and returning it."""
    if world.t >= world.horizon:
        raise EpisodeOver(f"t={world.t} reached horizon {world.horizon}")
    for aid in actions:
        _agent(world, aid)
    if mobility is not None:
        for aid in mobility:
            _agent(world, aid)
    mobility = mobility or {}
    agents = sorted(world.agents, key=lambda b: b.id)

    def active(aid: int) -> Optional[ActionTriple]:
        if not mobility.get(aid, True):
            return None
        return actions.get(aid)

    # Locks fire on the rising edge of the lock flag.
    for agent in agents:
        act = active(agent.id)
        flag = bool(act is not None and act.lock)
        if flag and not world.lock_latch.get(agent.id, False):
            attempt_lock(world, agent.id, cfg, lock_gate)
        world.lock_latch[agent.id] = flag

    for agent in agents:
        act = active(agent.id)
        if act is not None and act.grab:
            attempt_grab(world, agent.id, cfg)
        else:
            release(world, agent.id)

    keep = 1.0 - cfg.damping
    for agent in agents:
        act = active(agent.id)
        if act is None and not mobility.get(agent.id, True):
            agent.vx = agent.vy = agent.omega = 0.0
            continue
        fx = bin_value(act.move_x) if act else 0.0
        fy = bin_value(act.move_y) if act else 0.0
        tq = bin_value(act.torque) if act else 0.0
        agent.vx = agent.vx * keep + fx * cfg.max_accel
        agent.vy = agent.vy * keep + fy * cfg.max_accel
        cap = cfg.grabbed_speed_cap if agent.id in world.holding else cfg.agent_speed_cap
        agent.vx, agent.vy = _cap(agent.vx, agent.vy, cap)
        agent.omega = max(-cfg.max_ang_speed, min(cfg.max_ang_speed,
                                                   agent.omega * keep + tq * cfg.max_ang_accel))
        agent.heading = geo.wrap_angle(agent.heading + agent.omega)

    for b in world.bodies:
        if b.kind == Kind.AGENT:
            continue
        if not b.movable or b.locked_by_team is not None:
            b.vx = b.vy = b.omega = 0.0
        elif b.grabbed_by is not None:
            holder = world[b.grabbed_by]
            b.vx, b.vy = holder.vx, holder.vy
        else:
            b.vx, b.vy = b.vx * keep, b.vy * keep
            if abs(b.vx) < 1e-9:
                b.vx = 0.0
            if abs(b.vy) < 1e-9:
                b.vy = 0.0

    groups = _Groups(world)
    start = {gid: (world[gid].x, world[gid].y) for gid in groups.members}
    vel = {gid: (world[gid].vx, world[gid].vy) for gid in groups.members}
    fastest = max((math.hypot(*v) for v in vel.values()), default=0.0)
    n_sub = max(1, math.ceil(fastest / cfg.substep_len - 1e-12))
    for _ in range(n_sub):
        for gid, (vx, vy) in vel.items():
            if vx or vy:
                groups.shift(gid, vx / n_sub, vy / n_sub)
        _resolve(world, groups, cfg)
        _clamp_groups(world, groups, cfg)

    # Velocity becomes the realised displacement.
    for gid, members in groups.members.items():
        x0, y0 = start[gid]
        lead = world[gid]
        dx, dy = lead.x - x0, lead.y - y0
        if lead.kind == Kind.AGENT:
            dx, dy = _cap(dx, dy, cfg.agent_speed_cap)
        for m in members:
            m.vx, m.vy = dx, dy

    update_elevation(world)
    world.t += 1
    return world
