"""Core operation: encode every manifest image and write the feature file.

Unreadable images are skipped with a warning and listed in a JSON sidecar next
to the output (out_path + ".report.json"); the sidecar also records which
encoder produced the file. If nothing survives, the run fails outright.
"""
from __future__ import annotations

import json
import os
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .encoders import make_encoder
from .errors import NoRecords
from .featfile import write_feature_file
from .manifest import ExtractManifest


@dataclass
class ExtractReport:
    encoder: str
    out_path: str
    written: int
    feat_dim: int
    skipped: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _load_image(path: Path) -> Image.Image:
    with Image.open(path) as img:
        return img.convert("RGB")


def extract(manifest: ExtractManifest) -> ExtractReport:
    encoder = make_encoder(manifest.encoder)
    rows = []
    skipped: list[dict] = []

    def skip(entry, reason: str) -> None:
        warnings.warn(f"skipping {entry.path}: {reason}")
        skipped.append({"id": entry.id, "path": str(entry.path), "error": reason})

    for entry in manifest.entries:
        try:
            image = _load_image(entry.path)
        except (OSError, ValueError) as exc:
            skip(entry, str(exc))
            continue
        feat = np.asarray(encoder.encode(image), dtype=np.float64).ravel()
        norm = float(np.linalg.norm(feat))
        if not np.isfinite(norm) or norm == 0.0:
            skip(entry, "degenerate feature vector")
            continue
        rows.append((entry.id, (feat / norm).astype(np.float32), entry.captions))

    if not rows:
        raise NoRecords("no manifest image could be encoded, nothing to write")
    write_feature_file(manifest.out_path, rows)

    report = ExtractReport(
        encoder=encoder.name,
        out_path=str(manifest.out_path),
        written=len(rows),
        feat_dim=rows[0][1].shape[0],
        skipped=skipped,
    )
    sidecar = Path(f"{manifest.out_path}.report.json")
    tmp = sidecar.with_name(sidecar.name + ".tmp")
    tmp.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, sidecar)
    return report
