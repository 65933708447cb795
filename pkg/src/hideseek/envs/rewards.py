"""Reward rules for hide-and-seek, its food variants and the transfer tasks."""

from __future__ import annotations

import math
from typing import Dict, Iterable, List, Optional, Sequence, Set

import numpy as np

from hideseek.sim import sensing
from hideseek.sim.bodies import Body, Elevation, Kind, WorldState
from hideseek.sim.factory import HIDER, SEEKER

OUT_OF_BOUNDS_PENALTY = -10.0
EAT_RADIUS = 0.75
FOOD_PROTECTION_BONUS = 3.0
BOUNDARY_MARGIN = 1.5

BLUEPRINT_ALPHA = -1.5
BLUEPRINT_DISTANCE_SCALE = 0.05
BLUEPRINT_COMPLETION_SCALE = 3.0
BLUEPRINT_DMIN = 0.1

SHELTER_RAYS = 100
SHELTER_SCALE = 0.001

LOCK_BONUS = 5.0
SHAPING_COEF = 0.5
RETURN_RADIUS = 0.1


def team(world: WorldState, which: int) -> List[Body]:
    return [a for a in world.agents if a.team == which]


def out_of_bounds(body: Body, bounds: float) -> bool:
    return not (0.0 <= body.x <= bounds and 0.0 <= body.y <= bounds)


def seen_hiders(world: WorldState) -> Set[int]:
    """Hiders visible to at least one seeker."""
    seekers = team(world, SEEKER)
    seen = set()
    for h in team(world, HIDER):
        if any(sensing.is_visible(world, s, h) for s in seekers):
            seen.add(h.id)
    return seen


def hns_reward(world: WorldState, in_prep: bool,
               penalty: float = OUT_OF_BOUNDS_PENALTY) -> Dict[int, float]:
    """Team reward: +1 to hiders if every hider is hidden, -1 otherwise.

    Seekers receive the negation. Agents whose centre leaves the play square
    additionally receive ``penalty``. Everything is zero during preparation.
    """
    if in_prep:
        return {a.id: 0.0 for a in world.agents}
    hider_r = -1.0 if seen_hiders(world) else 1.0
    out = {}
    for a in world.agents:
        r = hider_r if a.team == HIDER else -hider_r
        if out_of_bounds(a, world.bounds):
            r += penalty
        out[a.id] = r
    return out


def edible_pellets(world: WorldState, eaters: Sequence[Body], radius: float = EAT_RADIUS,
                   need_visible: bool = True) -> List[int]:
    """Pellets within reach of at least one eater (and visible to it)."""
    eaten = []
    for p in world.of_kind(Kind.PELLET):
        for e in eaters:
            if math.hypot(p.x - e.x, p.y - e.y) > radius:
                continue
            if need_visible and not sensing.is_visible(world, e, p):
                continue
            eaten.append(p.id)
            break
    return eaten


def hns_food_reward(world: WorldState, in_prep: bool,
                    radius: float = EAT_RADIUS) -> Dict[int, float]:
    """Hide-and-seek reward plus a shared +1 per edible pellet for the hiders.

    Food only counts after preparation and while no hider is seen.
    """
    rewards = hns_reward(world, in_prep)
    if in_prep or seen_hiders(world):
        return rewards
    food = float(len(edible_pellets(world, team(world, HIDER), radius)))
    for h in team(world, HIDER):
        rewards[h.id] += food
    return rewards


def near_boundary(body: Body, bounds: float, margin: float = BOUNDARY_MARGIN) -> bool:
    return min(body.x, body.y, bounds - body.x, bounds - body.y) < margin


def food_protection_reward(world: WorldState, in_prep: bool, consumed: int,
                           margin: float = BOUNDARY_MARGIN) -> Dict[int, float]:
    """+3 per collected pellet to every seeker, the negation to every hider,
    and -1 per step to hiders hugging the boundary after preparation."""
    if in_prep:
        return {a.id: 0.0 for a in world.agents}
    gain = FOOD_PROTECTION_BONUS * consumed
    out = {}
    for a in world.agents:
        if a.team == SEEKER:
            out[a.id] = gain
        else:
            out[a.id] = -gain - (1.0 if near_boundary(a, world.bounds, margin) else 0.0)
    return out


# --- construction from blueprint ---------------------------------------------------

def smooth_min(distances: np.ndarray, alpha: float = BLUEPRINT_ALPHA) -> np.ndarray:
    """Row-wise exponentially weighted mean; alpha=0 is the mean, -inf the min."""
    d = np.asarray(distances, dtype=np.float64)
    z = alpha * d
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return (d * w).sum(axis=-1) / w.sum(axis=-1)


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def blueprint_reward(site_corners: np.ndarray, box_corners: np.ndarray,
                     alpha: float = BLUEPRINT_ALPHA,
                     scale: float = BLUEPRINT_DISTANCE_SCALE) -> float:
    """Penalty proportional to the mean smooth-min corner distance.

    ``site_corners`` is (4k, 2), ``box_corners`` is (4n, 2).
    """
    d_i = smooth_min(_pairwise(np.asarray(site_corners, float), np.asarray(box_corners, float)),
                     alpha)
    return -scale * float(d_i.mean())


def blueprint_complete(site_centres: np.ndarray, site_corners: np.ndarray,
                       box_centres: np.ndarray, box_corners: np.ndarray,
                       d_min: float = BLUEPRINT_DMIN) -> bool:
    if len(box_centres) == 0:
        return False
    centre_ok = _pairwise(np.asarray(site_centres, float), np.asarray(box_centres, float)).min(1)
    corner_ok = _pairwise(np.asarray(site_corners, float), np.asarray(box_corners, float)).min(1)
    return bool((centre_ok <= d_min).all() and (corner_ok <= d_min).all())


# --- shelter construction ------------------------------------------------------------

def perimeter_points(bounds: float, n: int = SHELTER_RAYS) -> np.ndarray:
    """``n`` evenly spaced points along the boundary of the play square."""
    s = (np.arange(n) + 0.5) * (4.0 * bounds / n)
    pts = np.empty((n, 2))
    for i, u in enumerate(s):
        side, off = divmod(u, bounds)
        side = int(side)
        pts[i] = [(off, 0.0), (bounds, off), (bounds - off, bounds), (0.0, bounds - off)][side]
    return pts


def shelter_ray_count(world: WorldState, cylinder_id: int, n_rays: int = SHELTER_RAYS) -> int:
    """Number of boundary rays aimed at the cylinder that reach it first."""
    cyl = world[cylinder_id]
    walls = [b.id for b in world.of_kind(Kind.WALL)]
    count = 0
    for ox, oy in perimeter_points(world.bounds, n_rays):
        direction = math.atan2(cyl.y - oy, cyl.x - ox)
        hit = sensing.raycast(world, (ox, oy), direction, 4.0 * world.bounds,
                              Elevation.GROUND, exclude=walls)
        if hit.body_id == cylinder_id:
            count += 1
    return count


def shelter_reward(world: WorldState, cylinder_id: int, n_rays: int = SHELTER_RAYS,
                   scale: float = SHELTER_SCALE) -> float:
    return -scale * shelter_ray_count(world, cylinder_id, n_rays)


# --- lock tasks -------------------------------------------------------------------

class LockReturnScorer:
    """Lock the box, then come back to where you started.

    +5 on lock, -5 on unlock, -5 at the end if the box is unlocked, +1 per
    step while back within 0.1 of the start with the box locked, plus 0.5 times
    the per-step decrease in distance to the current target (the box while it
    is unlocked, the start afterwards).
    """

    def __init__(self, start, box_id: int, agent_id: int):
        self.start = (float(start[0]), float(start[1]))
        self.box_id = box_id
        self.agent_id = agent_id
        self.prev = None

    def _target(self, world):
        box = world[self.box_id]
        return self.start if box.locked_by_team is not None else (box.x, box.y)

    def begin(self, world: WorldState) -> None:
        a = world[self.agent_id]
        self.prev = ((a.x, a.y), self._target(world))

    def __call__(self, world: WorldState, was_locked: bool, done: bool) -> float:
        a = world[self.agent_id]
        box = world[self.box_id]
        locked = box.locked_by_team is not None
        r = 0.0
        if locked and not was_locked:
            r += LOCK_BONUS
        if was_locked and not locked:
            r -= LOCK_BONUS
        (px, py), target = self.prev
        r += SHAPING_COEF * (math.hypot(target[0] - px, target[1] - py)
                             - math.hypot(target[0] - a.x, target[1] - a.y))
        if locked and math.hypot(a.x - self.start[0], a.y - self.start[1]) <= RETURN_RADIUS:
            r += 1.0
        if done and not locked:
            r -= LOCK_BONUS
        self.prev = ((a.x, a.y), self._target(world))
        return r


class SequentialLockScorer:
    """Boxes must be locked in a hidden order.

    +5 per correct lock, -5 per unlock, +1 per step once every box is
    locked, plus distance shaping toward the next box in the order.
    """

    def __init__(self, order: Sequence[int], agent_id: int):
        self.order = list(order)
        self.agent_id = agent_id
        self.prev = None

    def next_box(self, world: WorldState) -> Optional[int]:
        for bid in self.order:
            if world[bid].locked_by_team is None:
                return bid
        return None

    def gate(self, world: WorldState, agent: Body, body: Body) -> bool:
        return body.id == self.next_box(world)

    def _target(self, world):
        nb = self.next_box(world)
        return None if nb is None else (world[nb].x, world[nb].y)

    def begin(self, world: WorldState) -> None:
        a = world[self.agent_id]
        self.prev = ((a.x, a.y), self._target(world))

    def __call__(self, world: WorldState, locked_before: Iterable[int]) -> float:
        before = set(locked_before)
        now = {bid for bid in self.order if world[bid].locked_by_team is not None}
        r = LOCK_BONUS * len(now - before) - LOCK_BONUS * len(before - now)
        a = world[self.agent_id]
        (px, py), target = self.prev
        if target is not None:
            r += SHAPING_COEF * (math.hypot(target[0] - px, target[1] - py)
                                 - math.hypot(target[0] - a.x, target[1] - a.y))
        if len(now) == len(self.order):
            r += 1.0
        self.prev = ((a.x, a.y), self._target(world))
        return r
