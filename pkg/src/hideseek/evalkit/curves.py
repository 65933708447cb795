"""Learning-curve smoothing and confidence bands; data only, rendering is external."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from hideseek.evalkit.rundir import write_ndjson

EMA_COEF = 0.9          # weight on the running average at each point
CI_LEVEL = 0.90
N_BOOT = 2000


def ema(values: Sequence[float], coef: float = EMA_COEF) -> np.ndarray:
    """s_0 = x_0, s_t = coef * s_{t-1} + (1 - coef) * x_t. NaNs carry the previous value."""
    if not 0.0 <= coef < 1.0:
        raise ValueError("coef must lie in [0, 1)")
    x = np.asarray(values, np.float64)
    out = np.empty_like(x)
    s = np.nan
    for i, v in enumerate(x):
        if np.isnan(v):
            out[i] = s
            continue
        s = v if np.isnan(s) else coef * s + (1.0 - coef) * v
        out[i] = s
    return out


def bootstrap_band(curves: np.ndarray, level: float = CI_LEVEL, n_boot: int = N_BOOT,
                   seed: int = 0):
    """Percentile bootstrap of the mean over seeds at every x.

    ``curves`` is (n_seeds, n_points). Returns (mean, lo, hi). With one seed
    the band collapses onto the curve.
    """
    c = np.asarray(curves, np.float64)
    if c.ndim != 2 or c.shape[0] == 0:
        raise ValueError("curves must be (n_seeds, n_points) with at least one seed")
    mean = c.mean(0)
    if c.shape[0] == 1:
        return mean, mean.copy(), mean.copy()
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, c.shape[0], size=(n_boot, c.shape[0]))
    boots = c[idx].mean(1)                                # (n_boot, n_points)
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(boots, [a, 1.0 - a], axis=0)
    return mean, lo, hi


def mean_se(values: Sequence[float]):
    """Mean and standard error of the mean (ddof=1; zero for a single value)."""
    x = np.asarray(values, np.float64)
    if x.size == 0:
        raise ValueError("no values")
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def write_curves(path: Union[str, Path], x: Sequence[float], raw: Dict[str, Sequence[float]],
                 coef: float = EMA_COEF, level: float = CI_LEVEL) -> dict:
    """Persist raw per-seed curves next to their EMA and the bootstrap band.

    ``raw`` maps a seed label to its curve (all of equal length to ``x``).
    """
    labels = list(raw)
    mat = np.array([raw[k] for k in labels], np.float64)
    smooth = np.array([ema(r, coef) for r in mat])
    mean, lo, hi = bootstrap_band(smooth, level)
    recs = []
    for i, xv in enumerate(x):
        rec = {"x": float(xv), "mean": mean[i], "lo": lo[i], "hi": hi[i],
               "ema_coef": coef, "ci_level": level}
        for j, k in enumerate(labels):
            rec[f"raw.{k}"] = mat[j, i]
            rec[f"ema.{k}"] = smooth[j, i]
        recs.append(rec)
    write_ndjson(path, recs)
    return {"mean": mean, "lo": lo, "hi": hi, "smooth": smooth}
