"""Toy scene generator, the deterministic joint encoder, and dataset file formats.

A scene is 1..3 objects, each a (color, shape, grid cell) triple on a 3x3 grid
with no two objects sharing a cell. Scenes and captions embed into the same
64-dim space: every possible triple owns a frozen random direction in the first
63 coordinates, a scene (or caption) is the normalized sum of its triples'
directions, and the last coordinate is reserved for captions that mention no
attributes at all, so the fallback never overlaps a real scene.

Feature files (magic PFXFEAT1) bundle per-record id, feature vector, and
reference captions; captions also round-trip through a plain TSV for eyeballing.
"""
from __future__ import annotations

import os
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .binio import Reader, pack_f32_array, pack_u8, pack_u16, pack_u32
from .errors import BadConfig, DataError, DimMismatch, BadMagic, BadVersion, EmptyInput, NonFinite, ZeroVector
from .vocab import tokenize

COLORS = ("red", "blue", "green", "yellow", "purple", "orange", "black", "white")
SHAPES = ("circle", "square", "triangle", "star", "diamond", "hexagon")
ROW_WORDS = ("top", "middle", "bottom")
COL_WORDS = ("left", "center", "right")

FEAT_DIM = 64
FEATURES_MAGIC = b"PFXFEAT1"

_NUM_TRIPLES = len(COLORS) * len(SHAPES) * 9
_BASIS_SEED = 613566757
_basis_cache: np.ndarray | None = None


@dataclass(frozen=True)
class SceneObject:
    color: int
    shape: int
    cell: int

    def __post_init__(self):
        if not 0 <= self.color < len(COLORS):
            raise BadConfig(f"color index {self.color} outside 0..{len(COLORS) - 1}")
        if not 0 <= self.shape < len(SHAPES):
            raise BadConfig(f"shape index {self.shape} outside 0..{len(SHAPES) - 1}")
        if not 0 <= self.cell < 9:
            raise BadConfig(f"cell index {self.cell} outside 0..8")


@dataclass(frozen=True)
class ToyScene:
    objects: tuple[SceneObject, ...]

    def __post_init__(self):
        if not 1 <= len(self.objects) <= 3:
            raise BadConfig(f"scene must hold 1..3 objects, got {len(self.objects)}")
        cells = [o.cell for o in self.objects]
        if len(set(cells)) != len(cells):
            raise BadConfig(f"objects share a grid cell: {cells}")

    def attribute_set(self) -> frozenset[tuple[int, int, int]]:
        return frozenset((o.color, o.shape, o.cell) for o in self.objects)


@dataclass
class FeatureRecord:
    id: str
    feat: np.ndarray
    captions: tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise BadConfig("record id must be non-empty")
        self.feat = np.asarray(self.feat, dtype=np.float32)
        if self.feat.ndim != 1:
            raise DimMismatch(f"feature must be 1-D, got shape {self.feat.shape}")
        if not np.isfinite(self.feat).all():
            raise NonFinite(f"record {self.id}: non-finite feature")
        self.captions = tuple(self.captions)
        if not self.captions or any(not c for c in self.captions):
            raise BadConfig(f"record {self.id}: needs at least one non-empty caption")


def gen_scene(seed: int) -> ToyScene:
    """Uniform random scene: object count 1..3, distinct cells, free attributes."""
    rng = random.Random(seed)
    count = rng.randint(1, 3)
    cells = rng.sample(range(9), count)
    objects = tuple(
        SceneObject(color=rng.randrange(len(COLORS)), shape=rng.randrange(len(SHAPES)), cell=cell)
        for cell in cells
    )
    return ToyScene(objects=objects)


def _triple_index(color: int, shape: int, cell: int) -> int:
    return (color * len(SHAPES) + shape) * 9 + cell


def _basis() -> np.ndarray:
    """Frozen (432, 64) float64 projection; last coordinate kept at zero."""
    global _basis_cache
    if _basis_cache is None:
        rng = np.random.default_rng(_BASIS_SEED)
        basis = rng.standard_normal((_NUM_TRIPLES, FEAT_DIM))
        basis[:, -1] = 0.0
        _basis_cache = basis
    return _basis_cache


def _encode_triples(triples: Iterable[tuple[int, int, int]]) -> np.ndarray:
    indices = sorted({_triple_index(c, s, cell) for c, s, cell in triples})
    if not indices:
        fallback = np.zeros(FEAT_DIM, dtype=np.float32)
        fallback[-1] = 1.0
        return fallback
    vec = _basis()[indices].sum(axis=0)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ZeroVector("triple directions cancelled out")
    return (vec / norm).astype(np.float32)


def toy_encode_scene(scene: ToyScene) -> np.ndarray:
    """Unit-norm float32 feature for a scene."""
    return _encode_triples(scene.attribute_set())


def parse_caption_attributes(caption: str) -> frozenset[tuple[int, int, int]]:
    """Read (color, shape, cell) triples out of caption text.

    Attribute words fill a pending slot per kind; once all of color, shape, row,
    and column are present the triple is emitted and the slots reset. Words that
    are not attribute words are ignored, as is a trailing partial triple.
    """
    pending: dict[str, int] = {}
    triples = set()
    for word in tokenize(caption):
        if word in COLORS:
            pending["color"] = COLORS.index(word)
        elif word in SHAPES:
            pending["shape"] = SHAPES.index(word)
        elif word in ROW_WORDS:
            pending["row"] = ROW_WORDS.index(word)
        elif word in COL_WORDS:
            pending["col"] = COL_WORDS.index(word)
        if len(pending) == 4:
            triples.add((pending["color"], pending["shape"], pending["row"] * 3 + pending["col"]))
            pending.clear()
    return frozenset(triples)


def toy_encode_caption(caption: str) -> np.ndarray:
    """Unit-norm float32 feature for caption text; no attributes -> fallback axis."""
    return _encode_triples(parse_caption_attributes(caption))


def _object_words(obj: SceneObject) -> tuple[str, str, str, str]:
    return COLORS[obj.color], SHAPES[obj.shape], ROW_WORDS[obj.cell // 3], COL_WORDS[obj.cell % 3]


def caption_templates(scene: ToyScene, rng: random.Random) -> list[str]:
    """Five distinct reference captions for a scene, each at most 15 words.

    Every caption names every object's full (color, shape, row, column) tuple,
    so all five parse back to the scene's exact attribute set. The rng only
    shuffles object order within each caption.
    """
    variants = []
    for style in range(5):
        objs = list(scene.objects)
        if len(objs) > 1:
            rng.shuffle(objs)
        words = [_object_words(o) for o in objs]
        if len(objs) == 1:
            c, s, r, col = words[0]
            variants.append(
                [
                    f"a {c} {s} in the {r} {col}",
                    f"the {r} {col} has a {c} {s}",
                    f"there is a {c} {s} at the {r} {col}",
                    f"{c} {s} in the {r} {col}",
                    f"a {c} {s} at the {r} {col}",
                ][style]
            )
        elif len(objs) == 2:
            (c1, s1, r1, l1), (c2, s2, r2, l2) = words
            variants.append(
                [
                    f"a {c1} {s1} in the {r1} {l1} and a {c2} {s2} in the {r2} {l2}",
                    f"the {r1} {l1} has a {c1} {s1} and the {r2} {l2} has a {c2} {s2}",
                    f"a {c1} {s1} at the {r1} {l1} and a {c2} {s2} at the {r2} {l2}",
                    f"{c1} {s1} in the {r1} {l1} and {c2} {s2} in the {r2} {l2}",
                    f"{c1} {s1} {r1} {l1} and {c2} {s2} {r2} {l2}",
                ][style]
            )
        else:
            p1, p2, p3 = (" ".join(w) for w in words)
            variants.append(
                [
                    f"{p1} and {p2} and {p3}",
                    f"{p1} then {p2} then {p3}",
                    f"{p1} and {p2} with {p3}",
                    f"see {p1} and {p2} and {p3}",
                    f"{p1} {p2} {p3}",
                ][style]
            )
    return variants


def make_toy_dataset(count: int, seed: int) -> list[FeatureRecord]:
    """count scenes with features and 5 reference captions each, fully seeded."""
    if count < 1:
        raise BadConfig(f"dataset size must be positive, got {count}")
    master = random.Random(seed)
    records = []
    for i in range(count):
        scene_seed = master.getrandbits(48)
        caption_seed = master.getrandbits(48)
        scene = gen_scene(scene_seed)
        records.append(
            FeatureRecord(
                id=f"scene{i:05d}",
                feat=toy_encode_scene(scene),
                captions=tuple(caption_templates(scene, random.Random(caption_seed))),
            )
        )
    return records


def write_features(path: str | Path, records: Sequence[FeatureRecord]) -> None:
    if not records:
        raise EmptyInput("no records to write")
    feat_dim = records[0].feat.shape[0]
    seen_ids = set()
    parts = [FEATURES_MAGIC, pack_u32(len(records)), pack_u32(feat_dim)]
    for rec in records:
        if rec.feat.shape[0] != feat_dim:
            raise DimMismatch(f"record {rec.id}: feature width {rec.feat.shape[0]} != {feat_dim}")
        if rec.id in seen_ids:
            raise BadConfig(f"duplicate record id {rec.id!r}")
        seen_ids.add(rec.id)
        id_bytes = rec.id.encode("utf-8")
        parts.append(pack_u16(len(id_bytes)))
        parts.append(id_bytes)
        parts.append(pack_f32_array(rec.feat))
        if len(rec.captions) > 0xFF:
            raise BadConfig(f"record {rec.id}: too many captions ({len(rec.captions)})")
        parts.append(pack_u8(len(rec.captions)))
        for cap in rec.captions:
            cap_bytes = cap.encode("utf-8")
            parts.append(pack_u16(len(cap_bytes)))
            parts.append(cap_bytes)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    os.replace(tmp, path)


def read_features(path: str | Path) -> list[FeatureRecord]:
    reader = Reader(Path(path).read_bytes())
    magic = reader.take(8)
    if magic[:7] != FEATURES_MAGIC[:7]:
        raise BadMagic(f"not a feature file (magic {magic!r})")
    if magic != FEATURES_MAGIC:
        raise BadVersion(f"unsupported feature file version {magic!r}")
    count = reader.u32()
    feat_dim = reader.u32()
    if feat_dim < 1:
        raise DimMismatch("feature width must be positive")
    records = []
    for _ in range(count):
        rec_id = reader.utf8(reader.u16())
        feat = reader.f32_array(feat_dim)
        captions = tuple(reader.utf8(reader.u16()) for _ in range(reader.u8()))
        records.append(FeatureRecord(id=rec_id, feat=feat, captions=captions))
    return records


def write_captions_tsv(path: str | Path, records: Sequence[FeatureRecord]) -> None:
    lines = []
    for rec in records:
        for cap in rec.captions:
            lines.append(f"{rec.id}\t{cap}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_captions_tsv(path: str | Path) -> dict[str, list[str]]:
    captions: dict[str, list[str]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise DataError(f"{path}: line {lineno} has no tab separator")
        rec_id, cap = line.split("\t", 1)
        captions.setdefault(rec_id, []).append(cap)
    return captions
