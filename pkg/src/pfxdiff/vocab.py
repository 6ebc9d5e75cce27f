"""Vocabulary, token embedding table, and the latent <-> token mapping.

Captions live in a small closed vocabulary. Ids 0..2 are reserved: <pad>, <eos>,
<unk>. A caption becomes a fixed-length id sequence (EOS-terminated, PAD-filled),
and the embedding table maps ids to continuous rows that diffusion operates on.
Rounding goes the other way: each latent row snaps to its nearest embedding row.
"""
from __future__ import annotations

import hashlib
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch

from .errors import BadConfig, BadToken, EmptyInput, NonFinite, ShapeMismatch

PAD_ID = 0
EOS_ID = 1
UNK_ID = 2
RESERVED = ("<pad>", "<eos>", "<unk>")

_PUNCT = str.maketrans("", "", string.punctuation)


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace. Empty pieces vanish."""
    words = []
    for raw in text.lower().split():
        word = raw.translate(_PUNCT)
        if word:
            words.append(word)
    return words


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token list; position in the tuple is the token id."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) < 4:
            raise BadConfig("vocabulary needs the 3 reserved tokens plus at least 1 word")
        if self.tokens[:3] != RESERVED:
            raise BadConfig(f"ids 0..2 must be {RESERVED}, got {self.tokens[:3]}")
        if len(set(self.tokens)) != len(self.tokens):
            seen = set()
            dupe = next(t for t in self.tokens if t in seen or seen.add(t))
            raise BadConfig(f"duplicate token {dupe!r}")
        object.__setattr__(self, "_stoi", {t: i for i, t in enumerate(self.tokens)})

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        """Build from a word collection; reserved tokens first, the rest sorted."""
        cleaned = sorted({w for w in words if w} - set(RESERVED))
        return cls(tokens=RESERVED + tuple(cleaned))

    @classmethod
    def from_captions(cls, captions: Iterable[str]) -> "Vocabulary":
        words: set[str] = set()
        for cap in captions:
            words.update(tokenize(cap))
        return cls.from_words(words)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, word: str) -> int:
        return self._stoi.get(word, UNK_ID)

    def __contains__(self, word: str) -> bool:
        return word in self._stoi

    def word_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise BadToken(f"id {token_id} outside vocabulary of size {len(self.tokens)}")
        return self.tokens[token_id]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tokens=tuple(lines))

    def sha256(self) -> str:
        payload = ("\n".join(self.tokens) + "\n").encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def encode(text: str, vocab: Vocabulary, seq_len: int) -> np.ndarray:
    """Text -> int64 id array of length seq_len: words, EOS, then PAD fill.

    Words beyond seq_len - 1 are dropped so the EOS always fits.
    """
    if seq_len < 2:
        raise BadConfig(f"seq_len must be >= 2, got {seq_len}")
    words = tokenize(text)
    if not words:
        raise EmptyInput("no tokens left after normalization")
    ids = [vocab.id_of(w) for w in words[: seq_len - 1]]
    ids.append(EOS_ID)
    ids.extend([PAD_ID] * (seq_len - len(ids)))
    return np.asarray(ids, dtype=np.int64)


def detokenize(seq: Sequence[int] | np.ndarray, vocab: Vocabulary) -> str:
    """Id sequence -> text: words up to the first EOS or PAD, space-joined."""
    words = []
    for token_id in np.asarray(seq).ravel().tolist():
        if token_id in (EOS_ID, PAD_ID):
            break
        words.append(vocab.word_of(int(token_id)))
    return " ".join(words)


class EmbeddingTable:
    """Learnable |V| x d matrix; row i embeds token id i."""

    def __init__(self, matrix: torch.Tensor):
        if matrix.dim() != 2:
            raise ShapeMismatch(f"embedding matrix must be 2-D, got shape {tuple(matrix.shape)}")
        if matrix.shape[0] < 1 or matrix.shape[1] < 2:
            raise BadConfig(f"embedding matrix shape {tuple(matrix.shape)} too small")
        if not torch.isfinite(matrix).all():
            raise NonFinite("embedding matrix contains non-finite entries")
        self.matrix = matrix

    @property
    def vocab_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def init_gaussian(cls, vocab_size: int, dim: int, std: float = 0.02, seed: int = 0) -> "EmbeddingTable":
        gen = torch.Generator().manual_seed(seed)
        matrix = torch.empty(vocab_size, dim).normal_(0.0, std, generator=gen)
        return cls(matrix)


def embed(seq: Sequence[int] | np.ndarray | torch.Tensor, table: EmbeddingTable) -> torch.Tensor:
    """Gather embedding rows for an id sequence; shape (len(seq), dim)."""
    ids = torch.as_tensor(np.asarray(seq), dtype=torch.long)
    if ids.dim() != 1:
        raise ShapeMismatch(f"expected a 1-D id sequence, got shape {tuple(ids.shape)}")
    if ids.numel() == 0:
        raise EmptyInput("empty id sequence")
    if ids.min() < 0 or ids.max() >= table.vocab_size:
        bad = ids[(ids < 0) | (ids >= table.vocab_size)][0].item()
        raise BadToken(f"id {bad} outside vocabulary of size {table.vocab_size}")
    return table.matrix[ids]


def nearest_rows(x: torch.Tensor | np.ndarray, matrix: torch.Tensor) -> np.ndarray:
    """Index of the Euclidean-nearest matrix row for each row of x (first on ties)."""
    pts = np.asarray(x.detach().cpu().numpy() if isinstance(x, torch.Tensor) else x, dtype=np.float64)
    rows = matrix.detach().cpu().numpy().astype(np.float64)
    if pts.shape[-1] != rows.shape[1]:
        raise ShapeMismatch(f"row width {pts.shape[-1]} != embedding width {rows.shape[1]}")
    flat = pts.reshape(-1, rows.shape[1])
    d2 = ((flat[:, None, :] - rows[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1).reshape(pts.shape[:-1]).astype(np.int64)


def round_to_tokens(x0: torch.Tensor | np.ndarray, table: EmbeddingTable) -> np.ndarray:
    """Latent (k, dim) -> id sequence: nearest row per position, then the tail rule.

    Everything after the first EOS or PAD becomes PAD, so the result is always a
    well-formed sequence.
    """
    arr = x0.detach() if isinstance(x0, torch.Tensor) else torch.as_tensor(np.asarray(x0, dtype=np.float32))
    if arr.dim() != 2:
        raise ShapeMismatch(f"expected a (seq_len, dim) latent, got shape {tuple(arr.shape)}")
    if not torch.isfinite(arr).all():
        raise NonFinite("latent contains non-finite entries")
    ids = nearest_rows(arr, table.matrix)
    for pos, token_id in enumerate(ids):
        if token_id in (EOS_ID, PAD_ID):
            ids[pos + 1 :] = PAD_ID
            break
    return ids
