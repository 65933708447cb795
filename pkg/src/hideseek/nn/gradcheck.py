"""Central finite-difference gradient checker."""

from __future__ import annotations

from typing import Callable, Dict, Mapping, Optional

import numpy as np
import torch


def max_relative_error(analytic: torch.Tensor, numeric: torch.Tensor, floor: float = 1e-6) -> float:
    a = analytic.detach().double().reshape(-1)
    n = numeric.detach().double().reshape(-1)
    if a.numel() == 0:
        return 0.0
    denom = torch.maximum(torch.maximum(a.abs(), n.abs()), torch.full_like(a, floor))
    return float(((a - n).abs() / denom).max())


def _central(fn, flat, i, h):
    old = flat[i].item()
    flat[i] = old + h
    fp = float(fn())
    flat[i] = old - h
    fm = float(fn())
    flat[i] = old
    return (fp - fm) / (2 * h)


def numeric_grad(fn: Callable[[], torch.Tensor], t: torch.Tensor, h: float = 1e-3,
                 coords: Optional[np.ndarray] = None, richardson: bool = True) -> torch.Tensor:
    """d fn / d t by central differences; fn returns a scalar and reads ``t``.

    With ``richardson`` the step-h and step-h/2 estimates are combined to
    cancel the h^2 truncation term.
    """
    flat = t.data.view(-1)
    out = torch.zeros_like(flat)
    idx = range(flat.numel()) if coords is None else coords
    with torch.no_grad():
        for i in idx:
            d_h = _central(fn, flat, i, h)
            if richardson:
                d_h2 = _central(fn, flat, i, h / 2)
                out[i] = (4 * d_h2 - d_h) / 3
            else:
                out[i] = d_h
    return out.view_as(t)


def check_gradients(fn: Callable[[], torch.Tensor], inputs: Mapping[str, torch.Tensor],
                    h: float = 1e-3, max_coords: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None) -> Dict[str, float]:
    """Compare autograd with central differences for every tensor in ``inputs``.

    Returns the max relative error per tensor. With ``max_coords`` a random
    subset of coordinates is checked for large tensors.
    """
    for t in inputs.values():
        t.grad = None
    loss = fn()
    grads = torch.autograd.grad(loss, list(inputs.values()), allow_unused=True)
    errors = {}
    for (name, t), g in zip(inputs.items(), grads):
        g = torch.zeros_like(t) if g is None else g
        coords = None
        if max_coords is not None and t.numel() > max_coords:
            rng = rng or np.random.default_rng(0)
            coords = rng.choice(t.numel(), size=max_coords, replace=False)
        num = numeric_grad(fn, t, h, coords)
        if coords is not None:
            errors[name] = max_relative_error(g.reshape(-1)[coords], num.reshape(-1)[coords])
        else:
            errors[name] = max_relative_error(g, num)
    return errors
