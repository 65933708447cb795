"""Run directory layout: config, checkpoints/, metrics.ndjson, curves/, traces/."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Iterator, List, Mapping, Optional, Union

import numpy as np

SCHEMA_VERSION = 1


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_ndjson(path: Union[str, Path], records: Iterable[Mapping], append: bool = False) -> None:
    with open(path, "a" if append else "w") as f:
        for r in records:
            rec = {"schema_version": SCHEMA_VERSION, **_jsonable(dict(r))}
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def read_ndjson(path: Union[str, Path]) -> List[dict]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                rec = json.loads(line)
                if rec.get("schema_version") != SCHEMA_VERSION:
                    raise ValueError(f"{path}: unsupported schema_version {rec.get('schema_version')}")
                out.append(rec)
    return out


class RunDir:
    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        for sub in ("checkpoints", "curves", "traces"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    @property
    def config_path(self) -> Path:
        return self.root / "config"

    @property
    def metrics_path(self) -> Path:
        return self.root / "metrics.ndjson"

    @property
    def checkpoints(self) -> Path:
        return self.root / "checkpoints"

    @property
    def curves(self) -> Path:
        return self.root / "curves"

    @property
    def traces(self) -> Path:
        return self.root / "traces"

    def write_config(self, text: str) -> None:
        self.config_path.write_text(text)

    def append_metrics(self, record: Mapping) -> None:
        write_ndjson(self.metrics_path, [record], append=True)

    def metrics(self) -> List[dict]:
        if not self.metrics_path.exists():
            return []
        return read_ndjson(self.metrics_path)

    def checkpoint_path(self, version: int) -> Path:
        return self.checkpoints / f"ckpt_{version:06d}.hsck"

    def latest_checkpoint(self) -> Optional[Path]:
        found = sorted(self.checkpoints.glob("ckpt_*.hsck"))
        return found[-1] if found else None
