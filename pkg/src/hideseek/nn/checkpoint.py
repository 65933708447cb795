"""Binary checkpoint container.

Layout (little-endian):
    b"HSCK" | u16 version | u32 meta_len | meta (UTF-8 JSON) | u32 count
    count x [ u16 name_len | name | u8 ndim | ndim x u32 dims | float32 data ]
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union

import numpy as np
import torch

MAGIC = b"HSCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def config_hash(config: Mapping[str, Any]) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def torch_rng_state() -> str:
    return base64.b64encode(torch.get_rng_state().numpy().tobytes()).decode()


def restore_torch_rng(state: str) -> None:
    raw = np.frombuffer(base64.b64decode(state), dtype=np.uint8).copy()
    torch.set_rng_state(torch.from_numpy(raw))


def dumps(tensors: Mapping[str, torch.Tensor], meta: Mapping[str, Any] = None) -> bytes:
    meta_blob = json.dumps(dict(meta or {}), sort_keys=True).encode()
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<HI", VERSION, len(meta_blob)))
    out.write(meta_blob)
    out.write(struct.pack("<I", len(tensors)))
    for name, t in tensors.items():
        arr = t.detach().cpu().to(torch.float32).contiguous().numpy()
        nb = name.encode()
        out.write(struct.pack("<HB", len(nb), arr.ndim))
        out.write(nb)
        out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.write(arr.astype("<f4").tobytes())
    return out.getvalue()


def loads(blob: bytes) -> Tuple[Dict[str, torch.Tensor], Dict[str, Any]]:
    view = memoryview(blob)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, meta_len = struct.unpack("<HI", take(6))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    meta = json.loads(bytes(take(meta_len)).decode())
    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        name_len, ndim = struct.unpack("<HB", take(3))
        name = bytes(take(name_len)).decode()
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(bytes(take(4 * n)), dtype="<f4").reshape(shape)
        tensors[name] = torch.from_numpy(arr.astype(np.float32))
    if pos != len(view):
        raise CheckpointError("trailing bytes after checkpoint")
    return tensors, meta


def save(path: Union[str, Path], tensors: Mapping[str, torch.Tensor],
         meta: Mapping[str, Any] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(tensors, meta))
    tmp.replace(path)


def load(path: Union[str, Path]) -> Tuple[Dict[str, torch.Tensor], Dict[str, Any]]:
    return loads(Path(path).read_bytes())
