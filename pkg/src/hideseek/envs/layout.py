"""Procedural room layouts and rejection-sampled spawning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from hideseek.sim import factory as fx
from hideseek.sim import geometry as geo
from hideseek.sim.bodies import Body

DOOR_WIDTH = 1.5
MAX_ATTEMPTS = 1000


class ResetError(RuntimeError):
    """Spawning failed; the caller should re-seed."""


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def shrink(self, m: float) -> "Rect":
        return Rect(self.x0 + m, self.y0 + m, self.x1 - m, self.y1 - m)


@dataclass(frozen=True)
class Segment:
    """Axis-aligned wall line; ``fixed`` is x for vertical, y for horizontal."""
    vertical: bool
    fixed: float
    lo: float
    hi: float


@dataclass
class RoomLayout:
    bounds: float
    walls: List[Segment] = field(default_factory=list)
    doors: List[Segment] = field(default_factory=list)
    rooms: List[Rect] = field(default_factory=list)
    exterior: bool = True

    def wall_bodies(self, first_id: int) -> List[Body]:
        bodies = []
        if self.exterior:
            bodies += fx.outer_walls(first_id, self.bounds)
        bid = first_id + len(bodies)
        for seg in self.walls:
            if seg.vertical:
                bodies.append(fx.wall(bid, seg.fixed, seg.lo, seg.fixed, seg.hi))
            else:
                bodies.append(fx.wall(bid, seg.lo, seg.fixed, seg.hi, seg.fixed))
            bid += 1
        return bodies

    def room_of(self, x: float, y: float) -> Optional[int]:
        for i, r in enumerate(self.rooms):
            if r.contains(x, y):
                return i
        return None


def _wall_with_door(vertical: bool, fixed: float, lo: float, hi: float,
                    door: Optional[float], width: float) -> Tuple[List[Segment], List[Segment]]:
    if door is None:
        return [Segment(vertical, fixed, lo, hi)], []
    a, b = door - width / 2, door + width / 2
    pieces = [Segment(vertical, fixed, lo, a), Segment(vertical, fixed, b, hi)]
    return [p for p in pieces if p.hi - p.lo > 1e-9], [Segment(vertical, fixed, a, b)]


def open_layout(bounds: float, exterior: bool = True) -> RoomLayout:
    return RoomLayout(bounds, rooms=[Rect(0.0, 0.0, bounds, bounds)], exterior=exterior)


def bsp_layout(rng: np.random.Generator, bounds: float, n_rooms: int, doors: bool = True,
               door_width: float = DOOR_WIDTH, min_room: float = 4.0,
               exterior: bool = True) -> RoomLayout:
    """Recursive binary partition with one door per split wall.

    Every split wall separates two connected sub-trees and carries a door, so
    all rooms stay reachable at ground level. Split lines avoid landing inside
    doors that already exist on the parent boundary.
    """
    layout = RoomLayout(bounds, exterior=exterior)
    regions = [Rect(0.0, 0.0, bounds, bounds)]
    clearance = 0.5
    stalls = 0
    while len(regions) < n_rooms:
        splittable = [r for r in regions
                      if r.width >= 2 * min_room or r.height >= 2 * min_room]
        if not splittable or stalls > 200:
            raise ResetError(f"cannot partition into {n_rooms} rooms")
        areas = np.array([r.width * r.height for r in splittable])
        region = splittable[int(rng.choice(len(splittable), p=areas / areas.sum()))]
        can_v = region.width >= 2 * min_room
        can_h = region.height >= 2 * min_room
        if can_v and can_h:
            vertical = region.width > region.height or (
                region.width == region.height and bool(rng.integers(2)))
        else:
            vertical = can_v
        lo, hi = (region.x0, region.x1) if vertical else (region.y0, region.y1)
        s = float(rng.uniform(lo + min_room, hi - min_room))
        # Where the new wall meets the parent boundary there must be no door.
        ends = (region.y0, region.y1) if vertical else (region.x0, region.x1)
        blocked = any(d.vertical != vertical and d.fixed in ends
                      and d.lo - clearance < s < d.hi + clearance for d in layout.doors)
        if blocked:
            stalls += 1
            continue
        span_lo, span_hi = ends
        door = None
        if doors:
            margin = door_width / 2 + 0.3
            door = float(rng.uniform(span_lo + margin, span_hi - margin))
        segs, ds = _wall_with_door(vertical, s, span_lo, span_hi, door, door_width)
        layout.walls += segs
        layout.doors += ds
        regions.remove(region)
        if vertical:
            regions += [Rect(region.x0, region.y0, s, region.y1), Rect(s, region.y0, region.x1, region.y1)]
        else:
            regions += [Rect(region.x0, region.y0, region.x1, s), Rect(region.x0, s, region.x1, region.y1)]
    layout.rooms = regions
    return layout


def quadrant_layout(rng: np.random.Generator, bounds: float,
                    door_width: float = DOOR_WIDTH) -> RoomLayout:
    """Fixed room in the lower-right quarter with one or two doors."""
    half = bounds / 2
    n_doors = int(rng.integers(1, 3))
    which = [True, True] if n_doors == 2 else [bool(rng.integers(2))]
    which = which + [not which[0]] if n_doors == 1 else which
    margin = door_width / 2 + 0.3
    layout = RoomLayout(bounds, exterior=True)
    # vertical wall x = half, y in [0, half]; horizontal wall y = half, x in [half, bounds]
    for vertical, has_door in zip((True, False), which):
        lo, hi = (0.0, half) if vertical else (half, bounds)
        door = float(rng.uniform(lo + margin, hi - margin)) if has_door else None
        segs, ds = _wall_with_door(vertical, half, lo, hi, door, door_width)
        layout.walls += segs
        layout.doors += ds
    layout.rooms = [Rect(half, 0.0, bounds, half), Rect(0.0, 0.0, half, bounds),
                    Rect(half, half, bounds, bounds)]
    return layout


# --- spawning ------------------------------------------------------------------

def footprints_overlap(a: Body, b: Body, clearance: float = 0.0) -> bool:
    if a.is_round and b.is_round:
        return math.hypot(a.x - b.x, a.y - b.y) < a.hx + b.hx + clearance
    if a.is_round or b.is_round:
        circ, rect = (a, b) if a.is_round else (b, a)
        hx, hy = rect.aabb_half()
        return geo.circle_rect_overlap(circ.x, circ.y, circ.hx + clearance,
                                       rect.x, rect.y, hx, hy) > 0.0
    ahx, ahy = a.aabb_half()
    bhx, bhy = b.aabb_half()
    return (abs(a.x - b.x) < ahx + bhx + clearance
            and abs(a.y - b.y) < ahy + bhy + clearance)


class Placer:
    """Rejection sampler that keeps spawned footprints disjoint."""

    def __init__(self, rng: np.random.Generator, placed: Sequence[Body], clearance: float = 0.15):
        self.rng = rng
        self.placed = list(placed)
        self.clearance = clearance

    def place(self, body: Body, region: Rect, accept=None) -> Body:
        hx, hy = body.aabb_half()
        inner = Rect(region.x0 + hx + self.clearance, region.y0 + hy + self.clearance,
                     region.x1 - hx - self.clearance, region.y1 - hy - self.clearance)
        if inner.x0 > inner.x1 or inner.y0 > inner.y1:
            raise ResetError(f"region too small for body {body.id}")
        for _ in range(MAX_ATTEMPTS):
            body.x = float(self.rng.uniform(inner.x0, inner.x1))
            body.y = float(self.rng.uniform(inner.y0, inner.y1))
            if accept is not None and not accept(body):
                continue
            if any(footprints_overlap(body, other, self.clearance) for other in self.placed):
                continue
            self.placed.append(body)
            return body
        raise ResetError(f"could not place body {body.id} ({body.kind.name}) "
                         f"after {MAX_ATTEMPTS} attempts")
