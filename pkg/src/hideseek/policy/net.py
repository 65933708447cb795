"""Entity-attention policy and omniscient value network."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import torch

from hideseek.envs.observation import ENTITY_DIMS, HNS_ENTITY_TYPES, SELF_DIM
from hideseek.nn import layers as L
from hideseek.nn.params import (
    ParamStore,
    attention_params,
    init_attention,
    init_conv,
    init_dense,
    init_layernorm,
    init_lstm,
)
from hideseek.sim.physics import N_BINS
from hideseek.sim.sensing import N_LIDAR

N_CATEGORICAL = 3
N_BINARY = 2


@dataclass(frozen=True)
class PolicyConfig:
    embed: int = 128
    mlp: int = 256
    lstm: int = 256
    heads: int = 4
    head_dim: int = 32
    conv_channels: int = 9
    conv_kernel: int = 3
    entity_types: Tuple[str, ...] = HNS_ENTITY_TYPES
    pooling_only: bool = False
    masked_value: bool = False
    seed: int = 0

    def replace(self, **kw) -> "PolicyConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def paper(cls, **kw) -> "PolicyConfig":
        return cls(**kw)

    @classmethod
    def desk(cls, **kw) -> "PolicyConfig":
        base = dict(embed=32, mlp=64, lstm=64, heads=4, head_dim=8, conv_channels=4)
        base.update(kw)
        return cls(**base)


State = Tuple[torch.Tensor, torch.Tensor]


class Trunk:
    """Shared architecture; each instance owns its own ParamStore."""

    def __init__(self, cfg: PolicyConfig, seed_offset: int = 0, use_lstm: bool = True):
        self.cfg = cfg
        self.use_lstm = use_lstm
        self.store = ParamStore()
        self.gen = torch.Generator().manual_seed(cfg.seed * 7919 + seed_offset)
        g = self.gen
        c = cfg
        s = self.store
        init_conv(s, "lidar_conv", 1, c.conv_channels, c.conv_kernel, g)
        init_dense(s, "self_embed", self.self_dim, c.embed, g)
        init_layernorm(s, "self_ln", c.embed)
        for t in c.entity_types:
            self.add_entity_type(t)
        if c.pooling_only:
            inner = c.heads * c.head_dim
            attn_params = 4 * c.embed * inner + c.embed
            hidden = max(1, round((attn_params - c.embed) / (2 * c.embed + 1)))
            init_dense(s, "pool_mlp.0", c.embed, hidden, g)
            init_dense(s, "pool_mlp.1", hidden, c.embed, g)
        else:
            init_attention(s, "attn", c.embed, c.heads, c.head_dim, g)
        init_layernorm(s, "attn_ln", c.embed)
        init_dense(s, "mlp", c.embed + self.self_dim, c.mlp, g)
        init_layernorm(s, "mlp_ln", c.mlp)
        if use_lstm:
            init_lstm(s, "lstm", c.mlp, c.lstm, g)
        init_layernorm(s, "final_norm", self.out_dim)

    @property
    def self_dim(self) -> int:
        return SELF_DIM + self.cfg.conv_channels * N_LIDAR

    @property
    def out_dim(self) -> int:
        return self.cfg.lstm if self.use_lstm else self.cfg.mlp

    @property
    def entity_types(self) -> Tuple[str, ...]:
        return tuple(n[len("embed."):-len(".w")] for n in self.store.names("embed.")
                     if n.endswith(".w"))

    def add_entity_type(self, t: str) -> None:
        """Attach an embedding path for a new entity type (e.g. at transfer time)."""
        init_dense(self.store, f"embed.{t}", ENTITY_DIMS[t] + self.self_dim, self.cfg.embed, self.gen)
        init_layernorm(self.store, f"embed_ln.{t}", self.cfg.embed)

    def initial_state(self, n: int) -> State:
        z = torch.zeros(n, self.cfg.lstm)
        return z, z.clone()

    # -- forward pieces ---------------------------------------------------------------
    def _ln(self, name, x):
        s = self.store
        return L.layernorm(x, s[f"{name}.g"], s[f"{name}.b"])

    def _dense(self, name, x):
        s = self.store
        return L.dense(x, s[f"{name}.w"], s[f"{name}.b"])

    def encode(self, batch, omniscient: bool) -> torch.Tensor:
        """Everything before the recurrent core; returns (N, mlp)."""
        s = self.store
        n = len(batch)
        lid = L.circular_conv1d(batch.lidar[:, None, :], s["lidar_conv.w"], s["lidar_conv.b"])
        x_self = torch.cat([batch.self_feat, torch.relu(lid).reshape(n, -1)], dim=-1)
        rows = [torch.relu(self._ln("self_ln", self._dense("self_embed", x_self)))[:, None]]
        masks = [torch.ones(n, 1, dtype=torch.bool)]
        for t in self.entity_types:
            if t not in batch.entities or batch.entities[t].shape[1] == 0:
                continue
            e = batch.entities[t]
            m = e.shape[1]
            inp = torch.cat([e, x_self[:, None, :].expand(n, m, x_self.shape[-1])], dim=-1)
            rows.append(torch.relu(self._ln(f"embed_ln.{t}", self._dense(f"embed.{t}", inp))))
            use = batch.valid[t] if omniscient else batch.valid[t] & batch.visible[t]
            masks.append(use)
        x = torch.cat(rows, dim=1)
        mask = torch.cat(masks, dim=1)
        if self.cfg.pooling_only:
            h = torch.relu(self._dense("pool_mlp.0", x))
            x = self._dense("pool_mlp.1", h) + x
        else:
            x = L.masked_self_attention(x, mask, attention_params(s, "attn"), self.cfg.heads)
        x = self._ln("attn_ln", x)
        pooled = L.masked_mean_pool(x, mask)
        z = self._dense("mlp", torch.cat([pooled, x_self], dim=-1))
        return torch.relu(self._ln("mlp_ln", z))

    def core(self, feats: torch.Tensor, state: Optional[State],
             resets: Optional[torch.Tensor] = None):
        """feats: (T, B, mlp). Returns (T, B, out) after the final layernorm,
        the raw recurrent outputs and the new state."""
        if not self.use_lstm:
            return self._ln("final_norm", feats), feats, state
        s = self.store
        if state is None:
            state = self.initial_state(feats.shape[1])
        out, h, c = L.lstm_unroll(feats, state[0], state[1], s["lstm.wx"], s["lstm.wh"],
                                  s["lstm.b"], resets)
        return self._ln("final_norm", out), out, (h, c)


class PolicyNet(Trunk):
    def __init__(self, cfg: PolicyConfig):
        super().__init__(cfg, seed_offset=1)
        for name in ("move_x", "move_y", "torque"):
            init_dense(self.store, f"heads.{name}", self.out_dim, N_BINS, self.gen)
        for name in ("grab", "lock"):
            init_dense(self.store, f"heads.{name}", self.out_dim, 1, self.gen)

    def heads(self, z: torch.Tensor):
        cat = torch.stack([self._dense(f"heads.{n}", z) for n in ("move_x", "move_y", "torque")],
                          dim=-2)
        binary = torch.cat([self._dense(f"heads.{n}", z) for n in ("grab", "lock")], dim=-1)
        return cat, binary

    def forward(self, batch, state: Optional[State] = None, T: int = 1,
                resets: Optional[torch.Tensor] = None):
        """``batch`` holds T*B observations in time-major order.

        Returns (categorical logits (T,B,3,5), binary logits (T,B,2), lstm
        outputs (T,B,H), new state).
        """
        feats = self.encode(batch, omniscient=False)
        feats = feats.reshape(T, -1, feats.shape[-1])
        z, raw, state = self.core(feats, state, resets)
        cat, binary = self.heads(z)
        return cat, binary, raw, state


class ValueNet(Trunk):
    """Same trunk, separate parameters, reads every entity unless ``masked_value``."""

    def __init__(self, cfg: PolicyConfig):
        super().__init__(cfg, seed_offset=2)
        init_dense(self.store, "heads.value", self.out_dim, 1, self.gen)

    def forward(self, batch, state: Optional[State] = None, T: int = 1,
                resets: Optional[torch.Tensor] = None):
        feats = self.encode(batch, omniscient=not self.cfg.masked_value)
        feats = feats.reshape(T, -1, feats.shape[-1])
        z, _, state = self.core(feats, state, resets)
        return self._dense("heads.value", z)[..., 0], state
