"""Functional layers over torch tensors.

Every op takes its parameters explicitly so the same code serves the policy,
the value net and the gradient checker. Autograd supplies the backward pass.
"""

from __future__ import annotations

import math
from typing import Mapping, Optional, Tuple

import torch

LN_EPS = 1e-5
MASK_FILL = -1e9
CHECK_FINITE = True


class NonFiniteError(FloatingPointError):
    """A forward pass produced NaN or Inf."""


def _finite(x: torch.Tensor, op: str) -> torch.Tensor:
    if CHECK_FINITE and x.numel() and not torch.isfinite(x).all():
        raise NonFiniteError(f"non-finite values after {op}")
    return x


def dense(x: torch.Tensor, W: torch.Tensor, b: Optional[torch.Tensor] = None) -> torch.Tensor:
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"dense: input dim {x.shape[-1]} != weight rows {W.shape[0]}")
    y = x @ W
    if b is not None:
        y = y + b
    return _finite(y, "dense")


def layernorm(x: torch.Tensor, gain: torch.Tensor, bias: torch.Tensor,
              eps: float = LN_EPS) -> torch.Tensor:
    mu = x.mean(-1, keepdim=True)
    var = ((x - mu) ** 2).mean(-1, keepdim=True)
    return _finite((x - mu) / torch.sqrt(var + eps) * gain + bias, "layernorm")


def circular_conv1d(x: torch.Tensor, W: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """x: (..., C_in, L), W: (C_out, C_in, K) with odd K, b: (C_out,).

    Output index i reads inputs (i + k - K//2) mod L, so a cyclic shift of the
    input shifts the output by the same amount.
    """
    K = W.shape[-1]
    if K % 2 != 1:
        raise ValueError("kernel width must be odd")
    L = x.shape[-1]
    half = K // 2
    idx = (torch.arange(L)[:, None] + torch.arange(K)[None, :] - half) % L  # (L, K)
    patches = x[..., idx]  # (..., C_in, L, K)
    y = torch.einsum("...clk,ock->...ol", patches, W) + b[:, None]
    return _finite(y, "circular_conv1d")


def lstm_step(x: torch.Tensor, h: torch.Tensor, c: torch.Tensor,
              Wx: torch.Tensor, Wh: torch.Tensor, b: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Gate layout along the last axis of the weights: input, forget, cell, output."""
    z = x @ Wx + h @ Wh + b
    i, f, g, o = z.chunk(4, dim=-1)
    c2 = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
    h2 = torch.sigmoid(o) * torch.tanh(c2)
    return _finite(h2, "lstm_step"), c2


def lstm_unroll(xs: torch.Tensor, h: torch.Tensor, c: torch.Tensor,
                Wx, Wh, b, resets: Optional[torch.Tensor] = None):
    """xs: (T, B, d). ``resets[t]`` zeroes the state before step t (episode start)."""
    outs = []
    for t in range(xs.shape[0]):
        if resets is not None:
            keep = (~resets[t]).to(h.dtype)[:, None]
            h, c = h * keep, c * keep
        h, c = lstm_step(xs[t], h, c, Wx, Wh, b)
        outs.append(h)
    return torch.stack(outs), h, c


def masked_self_attention(x: torch.Tensor, mask: torch.Tensor, p: Mapping[str, torch.Tensor],
                          n_heads: int) -> torch.Tensor:
    """Residual multi-head self-attention over entity rows.

    x: (B, N, d), mask: (B, N) true for usable rows. Masked keys receive exactly
    zero weight and masked rows come out as zeros, so the features of a masked
    row cannot reach any output bit. Uses p['q'], p['k'], p['v'] (d x H*dh) and
    p['out_w'], p['out_b'] (H*dh x d).
    """
    B, N, _ = x.shape
    mask = mask.bool()
    m = mask[..., None]
    x_in = torch.where(m, x, torch.zeros((), dtype=x.dtype))
    q, k, v = x_in @ p["q"], x_in @ p["k"], x_in @ p["v"]
    hd = q.shape[-1] // n_heads

    def heads(t):
        return t.reshape(B, N, n_heads, hd).transpose(1, 2)  # (B, H, N, hd)

    q, k, v = heads(q), heads(k), heads(v)
    scores = q @ k.transpose(-1, -2) / math.sqrt(hd)  # (B, H, N, N)
    key_ok = mask[:, None, None, :]
    scores = torch.where(key_ok, scores, torch.full((), MASK_FILL, dtype=x.dtype))
    w = torch.softmax(scores, dim=-1)
    w = torch.where(key_ok, w, torch.zeros((), dtype=x.dtype))
    att = (w @ v).transpose(1, 2).reshape(B, N, n_heads * hd)
    y = att @ p["out_w"] + p["out_b"] + x_in
    return _finite(torch.where(m, y, torch.zeros((), dtype=x.dtype)), "masked_self_attention")


def masked_mean_pool(x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Average over valid rows of (B, N, d); all-masked rows pool to zeros."""
    m = mask.to(x.dtype)[..., None]
    total = (torch.where(mask.bool()[..., None], x, torch.zeros((), dtype=x.dtype))).sum(-2)
    return total / m.sum(-2).clamp_min(1.0)


def masked_max_pool(x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    filled = torch.where(mask.bool()[..., None], x, torch.full((), -torch.inf, dtype=x.dtype))
    out = filled.max(-2).values
    return torch.where(torch.isfinite(out), out, torch.zeros((), dtype=x.dtype))
