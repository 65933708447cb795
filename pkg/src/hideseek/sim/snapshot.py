"""Versioned binary world snapshots.

Layout (little-endian)::

    header:  magic b"HSWS" | u16 version | u32 body count | u32 t | u32 horizon | f64 bounds
    body:    i32 id | u8 kind | f64 x y heading vx vy omega hx hy
             | u8 elongated | u8 elevation | u8 movable
             | i8 locked_by_team | i32 grabbed_by | i8 team

Missing optional fields are stored as -1. Equal worlds serialise to equal bytes.
"""

from __future__ import annotations

import struct
from typing import List

from hideseek.sim.bodies import Body, WorldState

MAGIC = b"HSWS"
VERSION = 1
_HEADER = struct.Struct("<4sHIIId")
_BODY = struct.Struct("<iB8dBBBbib")


class SnapshotError(ValueError):
    pass


def _opt(v) -> int:
    return -1 if v is None else int(v)


def _unopt(v: int):
    return None if v < 0 else v


def dumps(world: WorldState) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, len(world.bodies), world.t, world.horizon,
                          world.bounds)]
    for b in sorted(world.bodies, key=lambda b: b.id):
        parts.append(_BODY.pack(b.id, int(b.kind), b.x, b.y, b.heading, b.vx, b.vy,
                                b.omega, b.hx, b.hy, int(b.elongated), int(b.elevation),
                                int(b.movable), _opt(b.locked_by_team), _opt(b.grabbed_by),
                                _opt(b.team)))
    return b"".join(parts)


def loads(data: bytes, seed: int = 0) -> WorldState:
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated snapshot header")
    magic, version, count, t, horizon, bounds = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    expected = _HEADER.size + count * _BODY.size
    if len(data) != expected:
        raise SnapshotError(f"snapshot length {len(data)} != {expected}")
    bodies: List[Body] = []
    off = _HEADER.size
    for _ in range(count):
        (bid, kind, x, y, heading, vx, vy, omega, hx, hy, elongated, elevation, movable,
         locked, grabbed, team) = _BODY.unpack_from(data, off)
        off += _BODY.size
        body = Body(bid, kind, x, y, heading, vx, vy, omega, hx, hy, bool(elongated),
                    elevation, bool(movable), _unopt(locked), _unopt(grabbed), _unopt(team))
        body.movable = bool(movable)
        bodies.append(body)
    world = WorldState(bodies=bodies, horizon=horizon, bounds=bounds, t=t, seed=seed)
    world.holding = {b.grabbed_by: b.id for b in bodies if b.grabbed_by is not None}
    return world
