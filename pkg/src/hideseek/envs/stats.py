"""Episode traces and the object-interaction statistics used to track emergence."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from hideseek.sim.bodies import Kind, WorldState


@dataclass
class EpisodeTrace:
    """Per-step positions and lock flags of boxes, ramps and agents.

    Row 0 is the state right after reset; row t the state after t steps.
    """
    prep_steps: int
    box_ids: List[int] = field(default_factory=list)
    ramp_ids: List[int] = field(default_factory=list)
    agent_ids: List[int] = field(default_factory=list)
    box_pos: List[np.ndarray] = field(default_factory=list)
    ramp_pos: List[np.ndarray] = field(default_factory=list)
    agent_pos: List[np.ndarray] = field(default_factory=list)
    box_locked: List[np.ndarray] = field(default_factory=list)
    ramp_locked: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def start(cls, world: WorldState, prep_steps: int) -> "EpisodeTrace":
        tr = cls(prep_steps=prep_steps,
                 box_ids=[b.id for b in world.of_kind(Kind.BOX)],
                 ramp_ids=[b.id for b in world.of_kind(Kind.RAMP)],
                 agent_ids=[b.id for b in world.agents])
        tr.record(world)
        return tr

    def record(self, world: WorldState) -> None:
        def pos(ids):
            return np.array([[world[i].x, world[i].y] for i in ids if i in world],
                            dtype=np.float64).reshape(-1, 2)

        def locked(ids):
            return np.array([world[i].locked_by_team is not None for i in ids if i in world],
                            dtype=bool)

        self.box_pos.append(pos(self.box_ids))
        self.ramp_pos.append(pos(self.ramp_ids))
        self.agent_pos.append(pos(self.agent_ids))
        self.box_locked.append(locked(self.box_ids))
        self.ramp_locked.append(locked(self.ramp_ids))

    def __len__(self) -> int:
        return len(self.box_pos)


@dataclass
class BehaviorStats:
    max_box_move: float = 0.0
    max_box_move_prep: float = 0.0
    max_ramp_move: float = 0.0
    max_ramp_move_prep: float = 0.0
    boxes_locked_end: int = 0
    boxes_locked_prep: int = 0
    ramps_locked_end: int = 0
    ramps_locked_prep: int = 0

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def _max_path(frames: List[np.ndarray], upto: int) -> float:
    if upto < 1 or len(frames) < 2 or frames[0].size == 0:
        return 0.0
    arr = np.stack(frames[:upto + 1])
    steps = np.linalg.norm(np.diff(arr, axis=0), axis=-1)
    return float(steps.sum(axis=0).max())


def behavior_stats(trace: EpisodeTrace) -> BehaviorStats:
    """Largest path length travelled by any box/ramp, whole episode and
    preparation only, plus lock counts at the end and at the end of prep."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    last = len(trace) - 1
    prep = min(trace.prep_steps, last)
    return BehaviorStats(
        max_box_move=_max_path(trace.box_pos, last),
        max_box_move_prep=_max_path(trace.box_pos, prep),
        max_ramp_move=_max_path(trace.ramp_pos, last),
        max_ramp_move_prep=_max_path(trace.ramp_pos, prep),
        boxes_locked_end=int(trace.box_locked[last].sum()),
        boxes_locked_prep=int(trace.box_locked[prep].sum()),
        ramps_locked_end=int(trace.ramp_locked[last].sum()),
        ramps_locked_prep=int(trace.ramp_locked[prep].sum()),
    )


def movement_summary(trace: EpisodeTrace) -> Dict[str, float]:
    """Net box displacement (summed over boxes) and the farthest any agent
    got from its spawn point."""
    net_box = 0.0
    if trace.box_pos and trace.box_pos[0].size:
        net_box = float(np.linalg.norm(trace.box_pos[-1] - trace.box_pos[0], axis=-1).sum())
    max_agent = 0.0
    if trace.agent_pos and trace.agent_pos[0].size:
        arr = np.stack(trace.agent_pos)
        max_agent = float(np.linalg.norm(arr - arr[0], axis=-1).max())
    return {"net_box_movement": net_box, "max_agent_movement": max_agent}
