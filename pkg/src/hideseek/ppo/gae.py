"""Advantage and return targets, and buffer-wide advantage standardisation."""

from __future__ import annotations

import numpy as np

ADV_STD_FLOOR = 1e-8


def gae_targets(rewards, values, dones, bootstrap: float, gamma: float, lam: float):
    """Truncated GAE over one window.

    ``dones[t]`` marks the last step of an episode: the value after it counts
    as 0 and the advantage sum stops there, so the next step starts a fresh
    horizon that runs to the end of the window. ``bootstrap`` is V of the state
    that follows the window (ignored when the window's last step is terminal).
    Returns (advantages, returns) with returns = advantages + values.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=bool)
    T = len(r)
    adv = np.zeros(T)
    next_v = float(bootstrap)
    acc = 0.0
    for t in range(T - 1, -1, -1):
        if d[t]:
            next_v, acc = 0.0, 0.0
        delta = r[t] + gamma * next_v - v[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
        next_v = v[t]
    return adv, adv + v


def normalize_advantages(adv, floor: float = ADV_STD_FLOOR) -> np.ndarray:
    """Z-score over the whole buffer; a single element maps to 0."""
    a = np.asarray(adv, dtype=np.float64)
    if a.size == 0:
        raise ValueError("empty advantage buffer")
    if a.size == 1:
        return np.zeros_like(a)
    return (a - a.mean()) / max(a.std(), floor)
