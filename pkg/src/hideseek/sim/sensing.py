"""Raycasting, lidar and line-of-sight visibility."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np

from hideseek.sim import geometry as geo
from hideseek.sim.bodies import Body, Elevation, Kind, UnknownAgent, Vec2, WorldState

N_LIDAR = 30
LIDAR_RANGE = 18.0
VISION_HALF_ANGLE = math.radians(135.0 / 2.0)

_OPAQUE = {
    Elevation.GROUND: frozenset({Kind.WALL, Kind.BOX, Kind.RAMP, Kind.CYLINDER}),
    # From raised elevation agents look over walls, boxes and ramps.
    Elevation.RAISED: frozenset({Kind.CYLINDER}),
}


@dataclass(frozen=True)
class RayHit:
    distance: float
    body_id: Optional[int] = None


def _hit_body(body: Body, ox, oy, dx, dy) -> Optional[float]:
    if body.is_round:
        return geo.ray_circle(ox, oy, dx, dy, body.x, body.y, body.hx)
    hx, hy = body.aabb_half()
    return geo.ray_aabb(ox, oy, dx, dy, body.x, body.y, hx, hy)


def raycast(world: WorldState, origin, direction: float, max_range: float,
            at_elevation: Elevation = Elevation.GROUND,
            exclude: Iterable[int] = ()) -> RayHit:
    """Nearest opaque footprint along a ray, clipped at ``max_range``."""
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    ox, oy = origin
    dx, dy = math.cos(direction), math.sin(direction)
    opaque = _OPAQUE[Elevation(at_elevation)]
    skip = set(exclude)
    best, best_id = max_range, None
    for body in world.bodies:
        if body.kind not in opaque or body.id in skip:
            continue
        s = _hit_body(body, ox, oy, dx, dy)
        if s is not None and s < best:
            best, best_id = s, body.id
    if best_id is None:
        return RayHit(max_range, None)
    return RayHit(best, best_id)


def _agent(world: WorldState, agent_id: int) -> Body:
    if agent_id not in world or world[agent_id].kind != Kind.AGENT:
        raise UnknownAgent(agent_id)
    return world[agent_id]


def compute_lidar(world: WorldState, agent_id: int, max_range: float = LIDAR_RANGE,
                  n_rays: int = N_LIDAR) -> np.ndarray:
    agent = _agent(world, agent_id)
    out = np.empty(n_rays, dtype=np.float64)
    step = 2.0 * math.pi / n_rays
    for k in range(n_rays):
        hit = raycast(world, (agent.x, agent.y), agent.heading + k * step, max_range,
                      agent.elevation, exclude=(agent.id,))
        out[k] = hit.distance
    return np.maximum(out, 1e-6)


def line_of_sight(world: WorldState, observer: Body, target: Body) -> bool:
    dist = math.hypot(target.x - observer.x, target.y - observer.y)
    if dist < 1e-9:
        return True
    direction = math.atan2(target.y - observer.y, target.x - observer.x)
    hit = raycast(world, (observer.x, observer.y), direction, dist,
                  observer.elevation, exclude=(observer.id, target.id))
    return hit.body_id is None


def is_visible(world: WorldState, observer: Body, target: Body,
               half_angle: float = VISION_HALF_ANGLE) -> bool:
    if not geo.in_cone(observer.x, observer.y, observer.heading, target.x, target.y, half_angle):
        return False
    return line_of_sight(world, observer, target)


def compute_visibility(world: WorldState, agent_id: int,
                       half_angle: float = VISION_HALF_ANGLE) -> Dict[int, bool]:
    """Visibility of every non-wall body from the agent's viewpoint."""
    agent = _agent(world, agent_id)
    return {b.id: is_visible(world, agent, b, half_angle)
            for b in world.bodies if b.kind != Kind.WALL and b.id != agent.id}
