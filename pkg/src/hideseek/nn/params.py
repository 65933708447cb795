"""Named parameter storage, initialisation and Adam with decoupled weight decay."""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Mapping, Optional, Tuple

import torch

DTYPE = torch.float32


class ParamStore:
    """Ordered name -> tensor map. Names are unique, tensors require grad."""

    def __init__(self):
        self._p: "OrderedDict[str, torch.Tensor]" = OrderedDict()

    def add(self, name: str, value: torch.Tensor, trainable: bool = True) -> torch.Tensor:
        if name in self._p:
            raise KeyError(f"duplicate parameter {name!r}")
        t = value.detach().to(DTYPE).clone().requires_grad_(trainable)
        self._p[name] = t
        return t

    def __getitem__(self, name: str) -> torch.Tensor:
        return self._p[name]

    def __contains__(self, name: str) -> bool:
        return name in self._p

    def __iter__(self) -> Iterator[str]:
        return iter(self._p)

    def __len__(self) -> int:
        return len(self._p)

    def items(self):
        return self._p.items()

    def names(self, prefix: str = "") -> list:
        return [n for n in self._p if n.startswith(prefix)]

    def sub(self, prefix: str) -> Dict[str, torch.Tensor]:
        """Tensors under ``prefix`` with the prefix stripped."""
        return {n[len(prefix):]: t for n, t in self._p.items() if n.startswith(prefix)}

    def numel(self) -> int:
        return sum(t.numel() for t in self._p.values())

    def state_dict(self) -> Dict[str, torch.Tensor]:
        return {n: t.detach().clone() for n, t in self._p.items()}

    def load_state_dict(self, state: Mapping[str, torch.Tensor], strict: bool = True) -> None:
        if strict and set(state) != set(self._p):
            missing = set(self._p) - set(state)
            extra = set(state) - set(self._p)
            raise KeyError(f"state mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        with torch.no_grad():
            for n, v in state.items():
                if n not in self._p:
                    continue
                if tuple(v.shape) != tuple(self._p[n].shape):
                    raise ValueError(f"shape mismatch for {n}: {tuple(v.shape)}")
                self._p[n].copy_(v)

    def zero_grad(self) -> None:
        for t in self._p.values():
            t.grad = None

    def astype(self, dtype: torch.dtype) -> None:
        """Recast every tensor in place (float64 for finite-difference checks)."""
        for n, t in self._p.items():
            self._p[n] = t.detach().to(dtype).clone().requires_grad_(t.requires_grad)


# --- initialisation ----------------------------------------------------------------

def init_dense(store: ParamStore, name: str, d_in: int, d_out: int, gen: torch.Generator,
               bias: bool = True) -> None:
    bound = 1.0 / math.sqrt(max(d_in, 1))
    store.add(f"{name}.w", (torch.rand(d_in, d_out, generator=gen) * 2 - 1) * bound)
    if bias:
        store.add(f"{name}.b", torch.zeros(d_out))


def init_layernorm(store: ParamStore, name: str, d: int) -> None:
    store.add(f"{name}.g", torch.ones(d))
    store.add(f"{name}.b", torch.zeros(d))


def init_conv(store: ParamStore, name: str, c_in: int, c_out: int, k: int,
              gen: torch.Generator) -> None:
    bound = 1.0 / math.sqrt(c_in * k)
    store.add(f"{name}.w", (torch.rand(c_out, c_in, k, generator=gen) * 2 - 1) * bound)
    store.add(f"{name}.b", torch.zeros(c_out))


def init_lstm(store: ParamStore, name: str, d_in: int, hidden: int, gen: torch.Generator,
              forget_bias: float = 1.0) -> None:
    bx = 1.0 / math.sqrt(d_in)
    bh = 1.0 / math.sqrt(hidden)
    store.add(f"{name}.wx", (torch.rand(d_in, 4 * hidden, generator=gen) * 2 - 1) * bx)
    store.add(f"{name}.wh", (torch.rand(hidden, 4 * hidden, generator=gen) * 2 - 1) * bh)
    b = torch.zeros(4 * hidden)
    b[hidden:2 * hidden] = forget_bias
    store.add(f"{name}.b", b)


def init_attention(store: ParamStore, name: str, d: int, n_heads: int, head_dim: int,
                   gen: torch.Generator) -> None:
    inner = n_heads * head_dim
    bound = 1.0 / math.sqrt(d)
    for k in ("q", "k", "v"):
        store.add(f"{name}.{k}", (torch.rand(d, inner, generator=gen) * 2 - 1) * bound)
    init_dense(store, f"{name}.out", inner, d, gen)


def attention_params(store: ParamStore, name: str) -> Dict[str, torch.Tensor]:
    return {"q": store[f"{name}.q"], "k": store[f"{name}.k"], "v": store[f"{name}.v"],
            "out_w": store[f"{name}.out.w"], "out_b": store[f"{name}.out.b"]}


# --- Adam --------------------------------------------------------------------------

@dataclass
class AdamState:
    m: Dict[str, torch.Tensor] = field(default_factory=dict)
    v: Dict[str, torch.Tensor] = field(default_factory=dict)
    t: int = 0

    def as_tensors(self, prefix: str) -> Dict[str, torch.Tensor]:
        out = {f"{prefix}m.{k}": x for k, x in self.m.items()}
        out.update({f"{prefix}v.{k}": x for k, x in self.v.items()})
        return out

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, torch.Tensor], prefix: str, t: int) -> "AdamState":
        st = cls(t=t)
        for k, x in tensors.items():
            if k.startswith(prefix + "m."):
                st.m[k[len(prefix) + 2:]] = x.clone()
            elif k.startswith(prefix + "v."):
                st.v[k[len(prefix) + 2:]] = x.clone()
        return st


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-6
    grad_clip: float = 5.0


def global_norm(grads: Iterable[torch.Tensor]) -> float:
    return math.sqrt(sum(float((g.double() ** 2).sum()) for g in grads))


def adam_update(store: ParamStore, grads: Mapping[str, torch.Tensor], state: AdamState,
                cfg: AdamConfig = AdamConfig(), names: Optional[Iterable[str]] = None,
                decay_names: Optional[Iterable[str]] = None) -> Tuple[AdamState, float]:
    """One Adam step with global-norm clipping and decoupled weight decay.

    Updates ``store`` in place and returns the state and pre-clip gradient norm.
    Raises FloatingPointError without touching anything if a gradient is NaN/Inf.
    """
    names = list(names) if names is not None else list(store)
    missing = [n for n in names if n not in grads]
    if missing:
        raise KeyError(f"no gradient for {missing[:3]}")
    for n in names:
        if grads[n].shape != store[n].shape:
            raise ValueError(f"gradient shape mismatch for {n}")
        if not torch.isfinite(grads[n]).all():
            raise FloatingPointError(f"non-finite gradient for {n}; update aborted")
    decay = set(names if decay_names is None else decay_names)
    norm = global_norm(grads[n] for n in names)
    scale = cfg.grad_clip / norm if cfg.grad_clip and norm > cfg.grad_clip else 1.0
    state.t += 1
    c1 = 1.0 - cfg.beta1 ** state.t
    c2 = 1.0 - cfg.beta2 ** state.t
    with torch.no_grad():
        for n in names:
            p = store[n]
            g = grads[n].to(p.dtype) * scale
            m = state.m.get(n)
            v = state.v.get(n)
            if m is None:
                m = torch.zeros_like(p)
                v = torch.zeros_like(p)
            m = cfg.beta1 * m + (1 - cfg.beta1) * g
            v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
            state.m[n], state.v[n] = m, v
            if cfg.weight_decay and n in decay:
                p.mul_(1.0 - cfg.lr * cfg.weight_decay)
            p.sub_(cfg.lr * (m / c1) / (torch.sqrt(v / c2) + cfg.eps))
    return state, norm
