"""Re-initialisation for fine-tuning and the object-counting classifier head."""

from __future__ import annotations

from typing import List

import torch

from hideseek.nn import layers as L
from hideseek.nn.params import ParamStore, init_dense, init_layernorm
from hideseek.policy.net import Trunk

REINIT_PREFIXES = ("final_norm.", "heads.")
N_COUNT_CLASSES = 7
COUNT_HIDDEN = 64


def reinit_for_transfer(net: Trunk, seed: int = 0) -> List[str]:
    """Resample the final layernorm and the output heads; every other tensor
    is left bit-identical. Returns the names that were resampled."""
    names = [n for n in net.store if n.startswith(REINIT_PREFIXES)]
    if not any(n.startswith("final_norm.") for n in names) or not any(
            n.startswith("heads.") for n in names):
        raise KeyError("network has no final_norm/heads tensors to reinitialise")
    gen = torch.Generator().manual_seed(10_007 + seed)
    fresh = ParamStore()
    for n in names:
        if n.endswith(".w"):
            d_in, d_out = net.store[n].shape
            init_dense(fresh, n[:-2], d_in, d_out, gen)
        elif n.startswith("final_norm.") and n.endswith(".g"):
            init_layernorm(fresh, n[:-2], net.store[n].shape[0])
    net.store.load_state_dict({n: fresh[n] for n in names}, strict=False)
    return names


class CountingHead:
    """layernorm -> dense 64 -> ReLU -> dense 7 over the recurrent state."""

    def __init__(self, d_in: int, seed: int = 0):
        gen = torch.Generator().manual_seed(20_011 + seed)
        self.store = ParamStore()
        init_layernorm(self.store, "count.ln", d_in)
        init_dense(self.store, "count.hidden", d_in, COUNT_HIDDEN, gen)
        init_dense(self.store, "count.out", COUNT_HIDDEN, N_COUNT_CLASSES, gen)

    def __call__(self, h: torch.Tensor) -> torch.Tensor:
        s = self.store
        z = L.layernorm(h, s["count.ln.g"], s["count.ln.b"])
        z = torch.relu(L.dense(z, s["count.hidden.w"], s["count.hidden.b"]))
        return L.dense(z, s["count.out.w"], s["count.out.b"])


def freeze(net: Trunk) -> None:
    for _, t in net.store.items():
        t.requires_grad_(False)
