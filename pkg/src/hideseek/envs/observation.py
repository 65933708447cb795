"""Ego-centric observations: self features, typed entity rows, lidar."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional

import numpy as np

from hideseek.sim import sensing
from hideseek.sim.bodies import Body, Elevation, Kind, WorldState
from hideseek.sim.factory import HIDER, SEEKER

SELF_DIM = 10
ENTITY_DIMS = {
    "agent": 12,
    "box": 13,
    "ramp": 13,
    "pellet": 5,
    "site": 13,
}
HNS_ENTITY_TYPES = ("agent", "box", "ramp", "pellet")

_KIND_TYPE = {
    Kind.AGENT: "agent",
    Kind.BOX: "box",
    Kind.CYLINDER: "box",
    Kind.RAMP: "ramp",
    Kind.PELLET: "pellet",
    Kind.SITE: "site",
}


@dataclass
class Observation:
    """What one agent sees at one timestep.

    ``visible`` is the policy mask; rows with ``visible`` false must not
    influence the action distribution. The omniscient value function reads
    the same rows with every mask set.
    """
    self_feat: np.ndarray
    lidar: np.ndarray
    entities: Dict[str, np.ndarray]
    visible: Dict[str, np.ndarray]
    entity_ids: Dict[str, List[int]] = field(default_factory=dict)

    def omniscient(self) -> "Observation":
        return replace(self, visible={k: np.ones_like(v) for k, v in self.visible.items()})

    def n_entities(self) -> int:
        return sum(len(v) for v in self.entities.values())


def entity_type(body: Body) -> Optional[str]:
    return _KIND_TYPE.get(body.kind)


def _team_flags(team: Optional[int]):
    return (1.0 if team == HIDER else 0.0, 1.0 if team == SEEKER else 0.0)


def self_features(agent: Body, bounds: float, prep_remaining: float,
                  hide_team: bool = False) -> np.ndarray:
    hider, seeker = (0.0, 0.0) if hide_team else _team_flags(agent.team)
    return np.array([
        agent.x / bounds, agent.y / bounds, agent.vx, agent.vy,
        math.cos(agent.heading), math.sin(agent.heading), hider, seeker,
        prep_remaining, float(agent.elevation == Elevation.RAISED),
    ], dtype=np.float32)


def _rel(agent: Body, b: Body, bounds: float):
    dx, dy = b.x - agent.x, b.y - agent.y
    return [b.x / bounds, b.y / bounds, dx / bounds, dy / bounds, math.hypot(dx, dy) / bounds]


def entity_features(agent: Body, b: Body, bounds: float, hide_team: bool = False) -> np.ndarray:
    kind = entity_type(b)
    head = _rel(agent, b, bounds)
    if kind == "agent":
        hider, seeker = (0.0, 0.0) if hide_team else _team_flags(b.team)
        row = head + [b.vx, b.vy, math.cos(b.heading), math.sin(b.heading), hider, seeker,
                      float(b.elevation == Elevation.RAISED)]
    elif kind in ("box", "ramp"):
        hx, hy = b.aabb_half()
        own = b.locked_by_team is not None and b.locked_by_team == agent.team
        other = b.locked_by_team is not None and not own
        row = head + [b.vx, b.vy, hx, hy, float(b.elongated), float(own), float(other),
                      float(b.grabbed_by is not None)]
    elif kind == "pellet":
        row = head
    elif kind == "site":
        row = head + [c / bounds for xy in b.corners() for c in xy]
    else:
        raise ValueError(f"body kind {b.kind!r} is not observed as an entity")
    return np.asarray(row, dtype=np.float32)


def build_observation(world: WorldState, agent_id: int, prep_remaining: float = 0.0,
                      entity_types: Iterable[str] = HNS_ENTITY_TYPES,
                      always_visible: Iterable[str] = ("site",),
                      hide_team: bool = False,
                      excluded: Iterable[int] = ()) -> Observation:
    agent = world[agent_id]
    bounds = world.bounds
    types = tuple(entity_types)
    rows: Dict[str, list] = {t: [] for t in types}
    masks: Dict[str, list] = {t: [] for t in types}
    ids: Dict[str, list] = {t: [] for t in types}
    skip = set(excluded)
    for b in world.bodies:
        if b.id == agent_id or b.id in skip:
            continue
        kind = entity_type(b)
        if kind not in rows:
            continue
        rows[kind].append(entity_features(agent, b, bounds, hide_team))
        seen = kind in always_visible or sensing.is_visible(world, agent, b)
        masks[kind].append(seen)
        ids[kind].append(b.id)
    entities = {t: (np.stack(rows[t]) if rows[t] else np.zeros((0, ENTITY_DIMS[t]), np.float32))
                for t in types}
    visible = {t: np.asarray(masks[t], dtype=bool) for t in types}
    lidar = sensing.compute_lidar(world, agent_id) / sensing.LIDAR_RANGE
    return Observation(self_features(agent, bounds, prep_remaining, hide_team),
                       lidar.astype(np.float32), entities, visible, ids)
