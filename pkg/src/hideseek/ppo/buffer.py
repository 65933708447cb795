"""Training chunks and the reuse-limited chunk buffer."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from hideseek.envs.observation import Observation

CHUNK_LEN = 10
MAX_REUSE = 4

@dataclass
class Chunk:
    """``CHUNK_LEN`` consecutive steps of one agent plus the recurrent state at step 0.

    ``mask`` is false on padding steps at the end of a short window. ``resets[t]``
    marks an episode start inside the chunk (the recurrent state is zeroed first).
    """
    obs: List[Observation]
    actions: np.ndarray       # (L, 5) int64
    logp: np.ndarray          # (L,)
    rewards: np.ndarray       # (L,)
    values: np.ndarray        # (L,) raw-scale value estimates
    adv: np.ndarray           # (L,)
    ret: np.ndarray           # (L,) raw-scale returns
    mask: np.ndarray          # (L,) bool
    resets: np.ndarray        # (L,) bool
    pol_state: Tuple[np.ndarray, np.ndarray]
    val_state: Tuple[np.ndarray, np.ndarray]
    version: int = 0
    worker: int = 0
    seq: int = 0
    reuse: int = 0
    uid: int = -1             # assigned by the buffer on insertion

    def __len__(self) -> int:
        return len(self.obs)

    @property
    def n_valid(self) -> int:
        return int(self.mask.sum())


class InsufficientBuffer(RuntimeError):
    pass


class ChunkBuffer:
    """Holds chunks until each has fed ``max_reuse`` optimization steps.

    Counts every insertion and eviction so that
    ``inserted - evicted == len(self)`` can be audited at any time.
    """

    def __init__(self, capacity: int, max_reuse: int = MAX_REUSE):
        if capacity <= 0 or max_reuse <= 0:
            raise ValueError("capacity and max_reuse must be positive")
        self.capacity = capacity
        self.max_reuse = max_reuse
        self.chunks: List[Chunk] = []
        self.inserted = 0
        self.evicted = 0
        self.evicted_uids: set = set()
        self._uids = itertools.count()

    def __len__(self) -> int:
        return len(self.chunks)

    def add(self, chunks: Sequence[Chunk]) -> int:
        """Insert chunks; the oldest are dropped past capacity. Returns the number dropped."""
        for c in chunks:
            if c.reuse != 0:
                raise ValueError("only fresh chunks can be inserted")
            # workers build chunks in other processes, so identity is assigned here
            c.uid = next(self._uids)
            self.chunks.append(c)
            self.inserted += 1
        over = max(0, len(self.chunks) - self.capacity)
        if over:
            self._evict(self.chunks[:over])
        self.audit()
        return over

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """Indices of ``m`` distinct chunks (uniform without replacement)."""
        if m > len(self.chunks):
            raise InsufficientBuffer(f"minibatch {m} larger than buffer {len(self.chunks)}")
        return rng.choice(len(self.chunks), size=m, replace=False)

    def mark_used(self, indices) -> None:
        """One optimization step drew these chunks: each reuse counter rises by one."""
        for i in sorted(set(int(i) for i in indices)):
            c = self.chunks[i]
            c.reuse += 1
            assert c.reuse <= self.max_reuse, f"chunk {c.uid} reused {c.reuse} times"

    def evict_spent(self) -> int:
        spent = [c for c in self.chunks if c.reuse >= self.max_reuse]
        self._evict(spent)
        return len(spent)

    def _evict(self, chunks: Sequence[Chunk]) -> None:
        drop = {c.uid for c in chunks}
        self.chunks = [c for c in self.chunks if c.uid not in drop]
        self.evicted += len(drop)
        self.evicted_uids |= drop

    def audit(self) -> None:
        assert self.inserted - self.evicted == len(self.chunks), "buffer accounting broken"
        assert all(c.reuse <= self.max_reuse for c in self.chunks), "reuse bound exceeded"

    def stats(self) -> dict:
        reuse = [c.reuse for c in self.chunks]
        return {"size": len(self.chunks), "inserted": self.inserted, "evicted": self.evicted,
                "mean_reuse": float(np.mean(reuse)) if reuse else 0.0}
