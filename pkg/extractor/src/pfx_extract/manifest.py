"""Extraction manifests.

A manifest is a TSV file with one image per line:

    path<TAB>id<TAB>caption1|caption2|...

Relative image paths are resolved against the manifest file's directory.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    id: str
    captions: tuple[str, ...]


@dataclass(frozen=True)
class ExtractManifest:
    """Parsed manifest plus the encoder name and output path for the run."""

    entries: tuple[ManifestEntry, ...]
    encoder: str
    out_path: Path

    def __post_init__(self):
        if not self.entries:
            raise ManifestError("manifest holds no entries")
        seen: set[str] = set()
        for entry in self.entries:
            if entry.id in seen:
                raise ManifestError(f"duplicate id {entry.id!r}")
            seen.add(entry.id)
            if not entry.path.exists():
                raise ManifestError(f"{entry.path}: no such file")


def load_manifest(path: str | Path, encoder: str, out_path: str | Path) -> ExtractManifest:
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ManifestError(
                f"{path}: line {lineno}: expected 3 tab-separated fields, got {len(fields)}"
            )
        raw_path, rec_id, caption_field = fields
        if not rec_id:
            raise ManifestError(f"{path}: line {lineno}: empty id")
        captions = tuple(cap for cap in caption_field.split("|") if cap)
        if not captions:
            raise ManifestError(f"{path}: line {lineno}: no captions")
        image = Path(raw_path)
        if not image.is_absolute():
            image = base / image
        entries.append(ManifestEntry(path=image, id=rec_id, captions=captions))
    return ExtractManifest(entries=tuple(entries), encoder=encoder, out_path=Path(out_path))
