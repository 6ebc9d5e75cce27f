"""PFXFEAT1 feature files, written and checked with no outside dependencies.

Layout, all little-endian:

    8 bytes  magic "PFXFEAT1"
    u32      record count
    u32      feature width
    per record:
        u16 id byte length, then the UTF-8 id
        width x float32 feature values
        u8 caption count, then per caption: u16 byte length + UTF-8 bytes

The consumer of these files keeps its own reader; agreement between the two
implementations is pinned by integration tests, not shared code.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import BadLayout, BadMagic, BadNorm, BadVersion

MAGIC = b"PFXFEAT1"
NORM_TOL = 1e-5

Record = tuple[str, np.ndarray, Sequence[str]]


def write_feature_file(path: str | Path, records: Iterable[Record]) -> None:
    """Write (id, feature, captions) triples atomically (temp file + rename)."""
    rows = list(records)
    if not rows:
        raise BadLayout("refusing to write a feature file with no records")
    width = int(np.asarray(rows[0][1]).shape[0])
    parts = [MAGIC, struct.pack("<II", len(rows), width)]
    for rec_id, feat, captions in rows:
        feat = np.ascontiguousarray(feat, dtype="<f4")
        if feat.ndim != 1 or feat.shape[0] != width:
            raise BadLayout(f"record {rec_id!r}: feature shape {feat.shape} != ({width},)")
        id_bytes = rec_id.encode("utf-8")
        parts.append(struct.pack("<H", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(feat.tobytes())
        if not captions or len(captions) > 0xFF:
            raise BadLayout(f"record {rec_id!r}: caption count {len(captions)} outside 1..255")
        parts.append(struct.pack("<B", len(captions)))
        for cap in captions:
            cap_bytes = cap.encode("utf-8")
            parts.append(struct.pack("<H", len(cap_bytes)))
            parts.append(cap_bytes)
    out = Path(path)
    tmp = out.with_name(out.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    os.replace(tmp, out)


class _Cursor:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise BadLayout(f"{self.path}: truncated (needed {n} bytes at offset {self.pos})")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_feature_file(path: str | Path) -> list[tuple[str, np.ndarray, tuple[str, ...]]]:
    path = Path(path)
    cur = _Cursor(path.read_bytes(), path)
    magic = cur.take(8)
    if magic[:7] != MAGIC[:7]:
        raise BadMagic(f"{path}: not a feature file (magic {magic!r})")
    if magic != MAGIC:
        raise BadVersion(f"{path}: unsupported version {magic!r}")
    count = cur.u32()
    width = cur.u32()
    if width < 1:
        raise BadLayout(f"{path}: feature width must be positive")
    records = []
    for _ in range(count):
        rec_id = cur.take(cur.u16()).decode("utf-8")
        feat = np.frombuffer(cur.take(4 * width), dtype="<f4").copy()
        captions = tuple(cur.take(cur.u16()).decode("utf-8") for _ in range(cur.u8()))
        records.append((rec_id, feat, captions))
    if cur.pos != len(cur.blob):
        raise BadLayout(f"{path}: {len(cur.blob) - cur.pos} trailing bytes after the last record")
    return records


@dataclass(frozen=True)
class ValidationReport:
    path: str
    count: int
    width: int
    worst_norm_error: float

    def summary(self) -> str:
        return (
            f"ok: {self.count} records, width {self.width}, "
            f"worst |norm - 1| = {self.worst_norm_error:.2e}"
        )


def validate_file(path: str | Path, norm_tol: float = NORM_TOL) -> ValidationReport:
    """Check magic, structural counts, and that every feature is unit length."""
    records = read_feature_file(path)
    if not records:
        raise BadLayout(f"{path}: no records")
    worst = 0.0
    for rec_id, feat, _ in records:
        if not np.isfinite(feat).all():
            raise BadNorm(f"{path}: record {rec_id!r} has non-finite values")
        err = abs(float(np.linalg.norm(feat.astype(np.float64))) - 1.0)
        worst = max(worst, err)
        if err > norm_tol:
            raise BadNorm(
                f"{path}: record {rec_id!r} norm off by {err:.3g} (tolerance {norm_tol:g})"
            )
    return ValidationReport(
        path=str(path), count=len(records), width=records[0][1].shape[0], worst_norm_error=worst
    )
