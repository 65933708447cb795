"""Aggregates over a run directory."""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Union

import numpy as np

from hideseek.evalkit.curves import ema
from hideseek.evalkit.rundir import RunDir
from hideseek.nn import checkpoint as ckpt


def _finite(vals):
    return [float(v) for v in vals if v is not None and np.isfinite(v)]


def run_stats(root: Union[str, Path], tail: float = 0.1) -> dict:
    """Totals, last-iteration losses, the smoothed return and the mean over the
    final ``tail`` fraction of iterations, the phase histogram and checkpoints."""
    run = RunDir(root)
    recs = run.metrics()
    if not recs:
        raise FileNotFoundError(f"{run.metrics_path} has no records")
    last = recs[-1]
    rets = [r.get("ep_return_mean") for r in recs]
    finite = _finite(rets)
    k = max(1, int(round(len(recs) * tail)))
    tail_vals = _finite(rets[-k:])
    out = {
        "iterations": len(recs),
        "env_steps": last.get("env_steps"),
        "episodes": last.get("total_episodes"),
        "version": last.get("version"),
        "chunks_ingested": last.get("chunks_ingested"),
        "chunks_rejected": last.get("chunks_rejected"),
        "return_smoothed": float(ema([np.nan if v is None else v for v in rets])[-1])
        if finite else None,
        "return_tail_mean": float(np.mean(tail_vals)) if tail_vals else None,
        "return_best": max(finite) if finite else None,
        "phases": dict(Counter(r.get("phase") for r in recs)),
    }
    for key in ("loss", "policy_loss", "value_loss", "entropy", "approx_kl", "clip_frac"):
        vals = _finite(r.get(key) for r in recs)
        out[f"last_{key}"] = vals[-1] if vals else None
    cks = []
    for p in sorted(run.checkpoints.glob("ckpt_*.hsck")):
        _, meta = ckpt.load(p)
        cks.append({"path": p.name, "version": meta.get("version"), "phase": meta.get("phase")})
    out["checkpoints"] = cks
    return out
