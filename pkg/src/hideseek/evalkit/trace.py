"""Episode traces: record env config, seed, actions, rewards and world-state deltas; replay them.

A trace is an ndjson file: one ``header`` record, one ``step`` record per
environment step and one ``end`` record. Each step stores the snapshot header
plus the body records that changed since the previous step (or the full
snapshot when the body count changed). Replay re-simulates from the seed and
the recorded actions and compares the serialized world after every step.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

from hideseek.config import env_to_mapping
from hideseek.envs import EnvConfig, make_env, reset_with_retry
from hideseek.envs.config import config_from_mapping
from hideseek.evalkit.rundir import read_ndjson, write_ndjson
from hideseek.sim import snapshot
from hideseek.sim.bodies import Kind, WorldState
from hideseek.sim.physics import ActionTriple

HEAD = snapshot._HEADER.size
BODY = snapshot._BODY.size


class TraceError(ValueError):
    """The trace file is malformed or truncated."""


class ReplayMismatch(AssertionError):
    def __init__(self, step: int, detail: str = ""):
        super().__init__(f"replayed state differs from the trace at step {step} {detail}".strip())
        self.step = step


def _b64(b: bytes) -> str:
    return base64.b64encode(b).decode("ascii")


def _unb64(s: str) -> bytes:
    return base64.b64decode(s.encode("ascii"))


def encode_action(a: ActionTriple) -> List[int]:
    return [a.move_x, a.move_y, a.torque, int(a.grab), int(a.lock)]


def decode_action(v) -> ActionTriple:
    return ActionTriple(int(v[0]), int(v[1]), int(v[2]), bool(v[3]), bool(v[4]))


def delta(prev: bytes, cur: bytes) -> dict:
    if len(prev) != len(cur):
        return {"full": _b64(cur)}
    changed = [[i, _b64(cur[HEAD + i * BODY: HEAD + (i + 1) * BODY])]
               for i in range((len(cur) - HEAD) // BODY)
               if cur[HEAD + i * BODY: HEAD + (i + 1) * BODY]
               != prev[HEAD + i * BODY: HEAD + (i + 1) * BODY]]
    return {"head": _b64(cur[:HEAD]), "bodies": changed}


def apply_delta(prev: bytes, d: Mapping) -> bytes:
    if "full" in d:
        return _unb64(d["full"])
    buf = bytearray(prev)
    buf[:HEAD] = _unb64(d["head"])
    for i, rec in d["bodies"]:
        buf[HEAD + i * BODY: HEAD + (i + 1) * BODY] = _unb64(rec)
    return bytes(buf)


def digest(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


Controller = Callable[[object, Mapping], Dict[int, ActionTriple]]


@dataclass
class TrajectoryRecord:
    env: EnvConfig
    seed: int
    actions: List[Dict[int, ActionTriple]] = field(default_factory=list)
    rewards: List[Dict[int, float]] = field(default_factory=list)
    states: List[bytes] = field(default_factory=list)     # snapshot after reset and after each step

    @property
    def final_state(self) -> bytes:
        return self.states[-1]

    def final_world(self) -> WorldState:
        return snapshot.loads(self.final_state, self.seed)

    def save(self, path: Union[str, Path]) -> None:
        recs = [{"kind": "header", "env": env_to_mapping(self.env), "seed": self.seed,
                 "initial": _b64(self.states[0])}]
        for t, (a, r) in enumerate(zip(self.actions, self.rewards)):
            recs.append({"kind": "step", "t": t,
                         "actions": {str(k): encode_action(v) for k, v in a.items()},
                         "rewards": {str(k): float(v) for k, v in r.items()},
                         "delta": delta(self.states[t], self.states[t + 1])})
        recs.append({"kind": "end", "steps": len(self.actions), "digest": digest(self.final_state)})
        write_ndjson(path, recs)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TrajectoryRecord":
        try:
            recs = read_ndjson(path)
        except (ValueError, OSError) as e:
            raise TraceError(f"{path}: unreadable trace ({e})") from e
        if not recs or recs[0].get("kind") != "header":
            raise TraceError(f"{path}: missing header")
        if recs[-1].get("kind") != "end":
            raise TraceError(f"{path}: truncated trace (no end record)")
        head, steps, end = recs[0], recs[1:-1], recs[-1]
        if end["steps"] != len(steps) or any(s.get("kind") != "step" or s["t"] != t
                                             for t, s in enumerate(steps)):
            raise TraceError(f"{path}: truncated trace ({len(steps)} of {end['steps']} steps)")
        rec = cls(config_from_mapping(head["env"]), int(head["seed"]))
        state = _unb64(head["initial"])
        rec.states.append(state)
        for s in steps:
            rec.actions.append({int(k): decode_action(v) for k, v in s["actions"].items()})
            rec.rewards.append({int(k): float(v) for k, v in s["rewards"].items()})
            state = apply_delta(state, s["delta"])
            rec.states.append(state)
        if digest(state) != end["digest"]:
            raise TraceError(f"{path}: final state digest mismatch")
        return rec


def record_episode(env_config: EnvConfig, seed: int, controller: Controller,
                   max_steps: Optional[int] = None) -> TrajectoryRecord:
    """Run one episode under ``controller(env, obs) -> actions`` and record it."""
    env = make_env(env_config)
    obs = reset_with_retry(env, seed)
    rec = TrajectoryRecord(env_config, int(env.seed))
    rec.states.append(snapshot.dumps(env.world))
    done = False
    while not done and (max_steps is None or len(rec.actions) < max_steps):
        acts = dict(controller(env, obs))
        obs, rewards, done, _ = env.step(acts)
        rec.actions.append(acts)
        rec.rewards.append(dict(rewards))
        rec.states.append(snapshot.dumps(env.world))
    return rec


@dataclass
class ReplayResult:
    final_state: bytes
    positions: List[List[Tuple[int, int, float, float]]]   # per step: (id, kind, x, y)
    rewards: List[Dict[int, float]]


def _positions(world: WorldState):
    return [(b.id, int(b.kind), b.x, b.y) for b in world.bodies if b.kind != Kind.WALL]


def replay(rec: TrajectoryRecord) -> ReplayResult:
    """Re-simulate from the seed and the actions; raise ReplayMismatch on any difference."""
    env = make_env(rec.env)
    env.reset(rec.seed)
    if snapshot.dumps(env.world) != rec.states[0]:
        raise ReplayMismatch(0, "(initial state)")
    positions = [_positions(env.world)]
    rewards = []
    for t, acts in enumerate(rec.actions):
        _, r, _, _ = env.step(acts)
        if snapshot.dumps(env.world) != rec.states[t + 1]:
            raise ReplayMismatch(t + 1)
        rewards.append(dict(r))
        positions.append(_positions(env.world))
    return ReplayResult(snapshot.dumps(env.world), positions, rewards)


def replay_file(path: Union[str, Path]) -> ReplayResult:
    return replay(TrajectoryRecord.load(path))


def write_positions(result: ReplayResult, path: Union[str, Path]) -> None:
    write_ndjson(path, ({"t": t, "bodies": [list(p) for p in frame]}
                        for t, frame in enumerate(result.positions)))
