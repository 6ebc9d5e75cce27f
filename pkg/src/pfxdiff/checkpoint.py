"""Checkpoint file format: named float32 tensors plus a JSON metadata blob.

Layout (little endian throughout):
  magic "PFXCKPT1" (8 bytes)
  u32 entry count
  per entry: u16 name length, name (UTF-8), u8 rank, rank x u32 dims,
             row-major float32 data
  u32 metadata length, metadata (UTF-8 JSON)

Entries are written in the order given, and the JSON is serialized with sorted
keys, so writing the same state twice produces byte-identical files.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping

import numpy as np
import torch

from .binio import Reader, pack_f32_array, pack_u8, pack_u16, pack_u32
from .errors import BadConfig, BadMagic, BadVersion

MAGIC = b"PFXCKPT1"


def write_checkpoint(
    path: str | Path,
    tensors: Mapping[str, torch.Tensor | np.ndarray],
    metadata: dict,
) -> None:
    parts = [MAGIC, pack_u32(len(tensors))]
    for name, tensor in tensors.items():
        arr = tensor.detach().cpu().numpy() if isinstance(tensor, torch.Tensor) else np.asarray(tensor)
        arr = np.asarray(arr, dtype=np.float32)
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise BadConfig(f"tensor name too long: {name[:40]}...")
        if arr.ndim > 0xFF:
            raise BadConfig(f"tensor rank {arr.ndim} exceeds format limit")
        parts.append(pack_u16(len(name_bytes)))
        parts.append(name_bytes)
        parts.append(pack_u8(arr.ndim))
        for dim in arr.shape:
            parts.append(pack_u32(dim))
        parts.append(pack_f32_array(arr))
    meta_bytes = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts.append(pack_u32(len(meta_bytes)))
    parts.append(meta_bytes)

    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    os.replace(tmp, path)


def read_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    reader = Reader(Path(path).read_bytes())
    magic = reader.take(8)
    if magic[:7] != MAGIC[:7]:
        raise BadMagic(f"not a checkpoint file (magic {magic!r})")
    if magic != MAGIC:
        raise BadVersion(f"unsupported checkpoint version {magic!r}")
    count = reader.u32()
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = reader.utf8(reader.u16())
        rank = reader.u8()
        shape = tuple(reader.u32() for _ in range(rank))
        numel = 1
        for dim in shape:
            numel *= dim
        tensors[name] = reader.f32_array(numel).reshape(shape)
    metadata = json.loads(reader.utf8(reader.u32()))
    return tensors, metadata
