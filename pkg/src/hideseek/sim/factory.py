"""Constructors for the standard body shapes."""

from __future__ import annotations

import math
from typing import List

from hideseek.sim.bodies import Body, Kind, WorldState

AGENT_RADIUS = 0.4
CUBE_HALF = 0.5
ELONGATED_HALF = (1.0, 0.5)
RAMP_HALF = (0.8, 0.6)
WALL_HALF_THICKNESS = 0.1
PELLET_RADIUS = 0.15

HIDER, SEEKER = 0, 1


def agent(bid: int, x: float, y: float, team: int = HIDER, heading: float = 0.0) -> Body:
    return Body(bid, Kind.AGENT, x, y, heading=heading, hx=AGENT_RADIUS, hy=AGENT_RADIUS,
                team=team)


def box(bid: int, x: float, y: float, elongated: bool = False, vertical: bool = False) -> Body:
    hx, hy = ELONGATED_HALF if elongated else (CUBE_HALF, CUBE_HALF)
    return Body(bid, Kind.BOX, x, y, heading=math.pi / 2 if vertical else 0.0, hx=hx, hy=hy,
                elongated=elongated)


def ramp(bid: int, x: float, y: float, vertical: bool = False) -> Body:
    return Body(bid, Kind.RAMP, x, y, heading=math.pi / 2 if vertical else 0.0,
                hx=RAMP_HALF[0], hy=RAMP_HALF[1])


def wall(bid: int, x0: float, y0: float, x1: float, y1: float,
         half_thickness: float = WALL_HALF_THICKNESS) -> Body:
    """Axis-aligned wall segment between two points on a common line."""
    if x0 != x1 and y0 != y1:
        raise ValueError("walls must be axis-aligned")
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    if y0 == y1:
        hx, hy = abs(x1 - x0) / 2 + half_thickness, half_thickness
    else:
        hx, hy = half_thickness, abs(y1 - y0) / 2 + half_thickness
    return Body(bid, Kind.WALL, cx, cy, hx=hx, hy=hy, movable=False)


def pellet(bid: int, x: float, y: float) -> Body:
    return Body(bid, Kind.PELLET, x, y, hx=PELLET_RADIUS, hy=PELLET_RADIUS, movable=False)


def cylinder(bid: int, x: float, y: float, diameter: float) -> Body:
    return Body(bid, Kind.CYLINDER, x, y, hx=diameter / 2, hy=diameter / 2, movable=False)


def site(bid: int, x: float, y: float, half: float = CUBE_HALF) -> Body:
    return Body(bid, Kind.SITE, x, y, hx=half, hy=half, movable=False)


def outer_walls(first_id: int, bounds: float) -> List[Body]:
    """Four walls whose inner faces lie on the play square edges."""
    t = WALL_HALF_THICKNESS
    return [
        wall(first_id, -t, -t, bounds + t, -t),
        wall(first_id + 1, -t, bounds + t, bounds + t, bounds + t),
        wall(first_id + 2, -t, -t, -t, bounds + t),
        wall(first_id + 3, bounds + t, -t, bounds + t, bounds + t),
    ]


def make_world(bodies: List[Body], horizon: int = 240, bounds: float = 18.0,
               walls: bool = False, seed: int = 0, t: int = 0) -> WorldState:
    bodies = list(bodies)
    if walls:
        start = max((b.id for b in bodies), default=-1) + 1
        bodies += outer_walls(start, bounds)
    return WorldState(bodies=bodies, horizon=horizon, bounds=bounds, seed=seed, t=t)


def enclosure(first_id: int, x0: float, y0: float, x1: float, y1: float) -> List[Body]:
    """A closed rectangular room with walls centred on its edges."""
    return [
        wall(first_id, x0, y0, x1, y0),
        wall(first_id + 1, x0, y1, x1, y1),
        wall(first_id + 2, x0, y0, x0, y1),
        wall(first_id + 3, x1, y0, x1, y1),
    ]
