"""Collating per-agent observations into padded tensors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import torch

from hideseek.envs.observation import ENTITY_DIMS, Observation


@dataclass
class Batch:
    """N observations. ``valid`` marks real (non-padding) rows, ``visible``
    the rows the policy may attend to."""
    self_feat: torch.Tensor                 # (N, SELF_DIM)
    lidar: torch.Tensor                     # (N, L)
    entities: Dict[str, torch.Tensor]       # (N, M_t, D_t)
    valid: Dict[str, torch.Tensor]          # (N, M_t) bool
    visible: Dict[str, torch.Tensor]        # (N, M_t) bool

    def __len__(self) -> int:
        return self.self_feat.shape[0]

    def index(self, idx) -> "Batch":
        return Batch(self.self_feat[idx], self.lidar[idx],
                     {k: v[idx] for k, v in self.entities.items()},
                     {k: v[idx] for k, v in self.valid.items()},
                     {k: v[idx] for k, v in self.visible.items()})

    def to(self, dtype: torch.dtype) -> "Batch":
        if self.self_feat.dtype == dtype:
            return self
        return Batch(self.self_feat.to(dtype), self.lidar.to(dtype),
                     {k: v.to(dtype) for k, v in self.entities.items()}, self.valid, self.visible)


def collate(observations: Sequence[Observation], types: Iterable[str],
            normalizer=None) -> Batch:
    """Pad every entity type to the largest count in the batch.

    ``normalizer`` (optional) maps raw arrays to normalised ones and must
    expose ``apply(block_name, array)``.
    """
    types = tuple(types)
    n = len(observations)
    self_feat = np.stack([o.self_feat for o in observations]).astype(np.float32) if n else \
        np.zeros((0, 10), np.float32)
    lidar = np.stack([o.lidar for o in observations]).astype(np.float32) if n else \
        np.zeros((0, 30), np.float32)
    if normalizer is not None:
        self_feat = normalizer.apply("self", self_feat)
        lidar = normalizer.apply("lidar", lidar)
    ents, valid, vis = {}, {}, {}
    for t in types:
        dim = ENTITY_DIMS[t]
        m = max((len(o.entities[t]) for o in observations if t in o.entities), default=0)
        arr = np.zeros((n, m, dim), np.float32)
        ok = np.zeros((n, m), bool)
        seen = np.zeros((n, m), bool)
        for i, o in enumerate(observations):
            rows = o.entities.get(t)
            if rows is None or len(rows) == 0:
                continue
            k = len(rows)
            arr[i, :k] = rows
            ok[i, :k] = True
            seen[i, :k] = o.visible[t]
        if normalizer is not None and m:
            arr = normalizer.apply(t, arr, ok)
        ents[t] = torch.from_numpy(arr)
        valid[t] = torch.from_numpy(ok)
        vis[t] = torch.from_numpy(seen)
    return Batch(torch.from_numpy(np.ascontiguousarray(self_feat)),
                 torch.from_numpy(np.ascontiguousarray(lidar)), ents, valid, vis)
