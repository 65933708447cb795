"""Body and world-state containers for the 2.5-D simulator."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np


class Kind(IntEnum):
    AGENT = 0
    BOX = 1
    RAMP = 2
    WALL = 3
    PELLET = 4
    CYLINDER = 5
    SITE = 6


class Elevation(IntEnum):
    GROUND = 0
    RAISED = 1


# Kinds that can never be moved by physics.
STATIC_KINDS = frozenset({Kind.WALL, Kind.SITE, Kind.CYLINDER, Kind.PELLET})
# Kinds with a circular footprint (radius stored in half_extents[0]).
ROUND_KINDS = frozenset({Kind.AGENT, Kind.CYLINDER, Kind.PELLET})


class SimError(Exception):
    """Base class for simulator errors."""


class EpisodeOver(SimError):
    pass


class UnknownAgent(SimError, KeyError):
    pass


@dataclass
class Vec2:
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite Vec2 ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def __add__(self, other):
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s):
        return Vec2(self.x * s, self.y * s)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass
class Body:
    id: int
    kind: Kind
    x: float
    y: float
    heading: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0
    # Agents, cylinders and pellets keep their radius in hx; hy is ignored.
    hx: float = 0.5
    hy: float = 0.5
    elongated: bool = False
    elevation: Elevation = Elevation.GROUND
    movable: bool = True
    locked_by_team: Optional[int] = None
    grabbed_by: Optional[int] = None
    team: Optional[int] = None

    def __post_init__(self):
        self.kind = Kind(self.kind)
        self.elevation = Elevation(self.elevation)
        if self.kind in STATIC_KINDS:
            self.movable = False

    @property
    def position(self) -> Vec2:
        return Vec2(self.x, self.y)

    @property
    def velocity(self) -> Vec2:
        return Vec2(self.vx, self.vy)

    @property
    def radius(self) -> float:
        return self.hx

    @property
    def is_round(self) -> bool:
        return self.kind in ROUND_KINDS

    def aabb_half(self) -> Tuple[float, float]:
        """Half extents of the world-aligned footprint.

        Rectangles only rotate in quarter turns (elongated boxes may be
        spawned lying along either axis).
        """
        if self.is_round:
            return self.hx, self.hx
        quarter = int(round(self.heading / (math.pi / 2))) % 2
        return (self.hy, self.hx) if quarter else (self.hx, self.hy)

    def corners(self) -> List[Tuple[float, float]]:
        ax, ay = self.aabb_half()
        return [(self.x - ax, self.y - ay), (self.x + ax, self.y - ay),
                (self.x + ax, self.y + ay), (self.x - ax, self.y + ay)]


@dataclass
class WorldState:
    bodies: List[Body]
    horizon: int
    bounds: float = 18.0
    t: int = 0
    seed: int = 0
    rng: np.random.Generator = field(default=None, repr=False)
    # Per-agent previous lock flag, for edge-triggered locking.
    lock_latch: Dict[int, bool] = field(default_factory=dict)
    # Per-agent id of the body currently held.
    holding: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        ids = [b.id for b in self.bodies]
        if len(ids) != len(set(ids)):
            raise ValueError("body ids must be unique")
        if not 0 <= self.t <= self.horizon:
            raise ValueError(f"t={self.t} outside [0, {self.horizon}]")
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)
        self._index = {b.id: i for i, b in enumerate(self.bodies)}

    def __getitem__(self, body_id: int) -> Body:
        return self.bodies[self._index[body_id]]

    def __contains__(self, body_id: int) -> bool:
        return body_id in self._index

    def add(self, body: Body) -> Body:
        if body.id in self._index:
            raise ValueError(f"duplicate body id {body.id}")
        self._index[body.id] = len(self.bodies)
        self.bodies.append(body)
        return body

    def remove(self, body_id: int) -> Body:
        body = self[body_id]
        if body.grabbed_by is not None:
            self.holding.pop(body.grabbed_by, None)
        self.bodies = [b for b in self.bodies if b.id != body_id]
        self._index = {b.id: i for i, b in enumerate(self.bodies)}
        return body

    def next_id(self) -> int:
        return max(self._index, default=-1) + 1

    def of_kind(self, *kinds: Kind) -> Iterator[Body]:
        return (b for b in self.bodies if b.kind in kinds)

    @property
    def agents(self) -> List[Body]:
        return [b for b in self.bodies if b.kind == Kind.AGENT]

    def copy(self) -> "WorldState":
        return copy.deepcopy(self)
