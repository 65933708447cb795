"""Count-based exploration over discretised, randomly embedded, type-pooled state keys."""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from hideseek.envs.observation import ENTITY_DIMS, SELF_DIM, Observation
from hideseek.sim.factory import ELONGATED_HALF, RAMP_HALF
from hideseek.sim.physics import DEFAULT_PHYSICS
from hideseek.sim.sensing import N_LIDAR

N_BINS = 30
EMBED_DIM = 16
EMBED_MAX = 9
COUNT_SCALE = 0.1
SELECTORS = ("box2d", "boxfull", "full")

_V = DEFAULT_PHYSICS.agent_speed_cap
_H = max(max(ELONGATED_HALF), max(RAMP_HALF))
_D = math.sqrt(2.0)

# (low, high) per feature column, matching the observation layouts.
_SELF = [(0, 1), (0, 1), (-_V, _V), (-_V, _V), (-1, 1), (-1, 1), (0, 1), (0, 1), (0, 1), (0, 1)]
_HEAD = [(0, 1), (0, 1), (-1, 1), (-1, 1), (0, _D)]
RANGES: Dict[str, List[Tuple[float, float]]] = {
    "self": _SELF,
    "lidar": [(0, 1)] * N_LIDAR,
    "agent": _HEAD + [(-_V, _V), (-_V, _V), (-1, 1), (-1, 1), (0, 1), (0, 1), (0, 1)],
    "box": _HEAD + [(-_V, _V), (-_V, _V), (0, _H), (0, _H)] + [(0, 1)] * 4,
    "ramp": _HEAD + [(-_V, _V), (-_V, _V), (0, _H), (0, _H)] + [(0, 1)] * 4,
    "pellet": _HEAD,
    "site": _HEAD + [(0, 1)] * 8,
}
# Columns of a box row: absolute position; rotation is carried by the
# axis-aligned half extents (quarter turns swap them); velocity.
BOX_POS = (0, 1)
BOX_FULL = (0, 1, 5, 6, 7, 8)


def discretize(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, bins: int = N_BINS) -> np.ndarray:
    """Equal-width bins over [lo, hi]; values outside are clamped to the edge bins."""
    u = (np.asarray(x, np.float64) - lo) / (hi - lo)
    return np.clip(np.floor(u * bins), 0, bins - 1).astype(np.int64)


class CountEmbedder:
    """Maps an observation to a hashable key.

    Each selected real value is binned (30 bins); each bin index is looked up
    in a seeded random table giving 16 integers in 0..9; an entity's vectors
    are concatenated; entities of one type are max-pooled; the pooled vectors
    of all types are concatenated. Equal seeds give equal tables in every process.
    """

    def __init__(self, selector: str = "box2d", seed: int = 0, bins: int = N_BINS,
                 dim: int = EMBED_DIM, types: Sequence[str] = ("agent", "box", "ramp")):
        if selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}")
        self.selector = selector
        self.bins = bins
        self.dim = dim
        self.types = ("box",) if selector != "full" else tuple(types)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0DE]))
        self.columns: Dict[str, Tuple[int, ...]] = {}
        if selector == "box2d":
            self.columns["box"] = BOX_POS
        elif selector == "boxfull":
            self.columns["box"] = BOX_FULL
        else:
            self.columns["self"] = tuple(range(SELF_DIM))
            self.columns["lidar"] = tuple(range(N_LIDAR))
            for t in self.types:
                self.columns[t] = tuple(range(ENTITY_DIMS[t]))
        self.tables: Dict[str, np.ndarray] = {}
        self.lo: Dict[str, np.ndarray] = {}
        self.hi: Dict[str, np.ndarray] = {}
        for block, cols in self.columns.items():
            self.tables[block] = rng.integers(0, EMBED_MAX + 1, size=(len(cols), bins, dim),
                                              dtype=np.int64).astype(np.uint8)
            r = np.array([RANGES[block][c] for c in cols], np.float64)
            self.lo[block], self.hi[block] = r[:, 0], r[:, 1]

    def embed_rows(self, block: str, rows: np.ndarray) -> np.ndarray:
        """(n, F) raw values -> (n, F * dim) integer embeddings."""
        cols = self.columns[block]
        rows = np.asarray(rows, np.float64).reshape(-1, len(RANGES[block]))[:, cols]
        idx = discretize(rows, self.lo[block], self.hi[block], self.bins)
        tab = self.tables[block]
        emb = tab[np.arange(len(cols))[None, :], idx]        # (n, F, dim)
        return emb.reshape(len(rows), -1)

    def pooled(self, obs: Observation) -> Dict[str, np.ndarray]:
        out = {}
        for block in self.columns:
            if block == "self":
                rows = obs.self_feat[None]
            elif block == "lidar":
                rows = obs.lidar[None]
            else:
                rows = obs.entities.get(block, np.zeros((0, ENTITY_DIMS[block])))
            width = len(self.columns[block]) * self.dim
            if len(rows) == 0:
                out[block] = np.zeros(width, np.uint8)
            else:
                out[block] = self.embed_rows(block, rows).max(axis=0).astype(np.uint8)
        return out

    def key(self, obs: Observation) -> bytes:
        pooled = self.pooled(obs)
        return b"".join(pooled[b].tobytes() for b in self.columns)


class CountTable:
    """Visit counts keyed by state key; one table per worker."""

    def __init__(self):
        self.counts: Dict[bytes, int] = {}

    def visit(self, key: bytes) -> int:
        n = self.counts.get(key, 0) + 1
        self.counts[key] = n
        return n

    def __len__(self) -> int:
        return len(self.counts)


def count_reward(table: CountTable, key: bytes, scale: float = COUNT_SCALE) -> float:
    """Increment the visit count of ``key`` and return scale / sqrt(N)."""
    return scale / math.sqrt(table.visit(key))


class CountIntrinsic:
    """Per-agent count reward from the agent's own observation key."""

    def __init__(self, selector: str, seed: int = 0):
        self.embedder = CountEmbedder(selector, seed)
        self.tables: Dict[int, CountTable] = {}

    def table(self, worker_id: int) -> CountTable:
        return self.tables.setdefault(worker_id, CountTable())

    def on_reset(self, worker_id: int, env_index: int) -> None:
        pass

    def reward(self, worker_id: int, env_index: int, agent_id: int, obs: Observation, env) -> float:
        return count_reward(self.table(worker_id), self.embedder.key(obs))

    def broadcast_state(self):
        return None

    def load_state(self, state) -> None:
        pass

    def learner_update(self, chunks) -> dict:
        # counts live in the workers; nothing to train centrally
        return {}
