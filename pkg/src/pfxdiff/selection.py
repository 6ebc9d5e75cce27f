"""Candidate generation and similarity-based selection.

For one conditioning feature we run n independent seeded reverse chains, decode
each latent to a caption, then keep the caption whose own encoding is most
similar (cosine) to the conditioning feature. Chain i always uses seed
base_seed + i, so a larger n strictly extends the candidate pool of a smaller n.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch

from . import data
from .diffusion import sample_batch
from .errors import BadConfig, DimMismatch, NoValidCandidate, ZeroVector
from .schedule import Schedule
from .vocab import EmbeddingTable, Vocabulary, detokenize, round_to_tokens

TextEncoder = Callable[[str], np.ndarray]


@dataclass
class Candidate:
    caption: str
    latent: torch.Tensor
    score: float | None = None


@dataclass
class CandidateSet:
    candidates: list[Candidate]
    chosen: int

    @property
    def best(self) -> Candidate:
        return self.candidates[self.chosen]


def cosine_similarity(a: np.ndarray | torch.Tensor, b: np.ndarray | torch.Tensor) -> float:
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    if va.shape != vb.shape:
        raise DimMismatch(f"vector lengths differ: {va.shape[0]} vs {vb.shape[0]}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity undefined for a zero vector")
    return float(va @ vb / (na * nb))


def generate_candidates(
    model,
    emb: EmbeddingTable,
    vocab: Vocabulary,
    feat: np.ndarray | torch.Tensor,
    sched: Schedule,
    n: int,
    eval_steps: int,
    base_seed: int,
    *,
    shape: tuple[int, int] | None = None,
    clamp: bool = True,
    parameterization: str = "eps",
) -> list[Candidate]:
    """n seeded reverse chains for one feature; chains run batched for speed."""
    if n < 1:
        raise BadConfig(f"candidate count must be positive, got {n}")
    if shape is None:
        if not hasattr(model, "cfg"):
            raise BadConfig("latent shape required when the denoiser has no config")
        shape = (model.cfg.seq_len, emb.dim)
    feat_t = torch.as_tensor(np.asarray(feat, dtype=np.float32))
    feats = feat_t.reshape(1, -1).expand(n, -1)
    seeds = [base_seed + i for i in range(n)]
    latents = sample_batch(
        model,
        feats,
        sched,
        eval_steps,
        seeds,
        shape,
        emb=emb,
        clamp=clamp,
        parameterization=parameterization,
    )
    out = []
    for i in range(n):
        ids = round_to_tokens(latents[i], emb)
        out.append(Candidate(caption=detokenize(ids, vocab), latent=latents[i]))
    return out


def score_candidates(
    feat: np.ndarray | torch.Tensor,
    captions: Sequence[str],
    text_encoder: TextEncoder | None = None,
) -> list[float | None]:
    """Cosine of each caption's encoding against feat; None where undefined."""
    encoder = text_encoder if text_encoder is not None else data.toy_encode_caption
    feat_vec = np.asarray(feat, dtype=np.float64).ravel()
    scores: list[float | None] = []
    for cap in captions:
        try:
            scores.append(cosine_similarity(feat_vec, encoder(cap)))
        except ZeroVector:
            scores.append(None)
    return scores


def select_best(
    feat: np.ndarray | torch.Tensor,
    captions: Sequence[str],
    text_encoder: TextEncoder | None = None,
) -> tuple[str, float]:
    """Caption with the highest similarity to feat; first index wins ties."""
    if not captions:
        raise NoValidCandidate("no candidates to select from")
    scores = score_candidates(feat, captions, text_encoder)
    best = None
    for idx, score in enumerate(scores):
        if score is not None and (best is None or score > scores[best]):
            best = idx
    if best is None:
        raise NoValidCandidate("every candidate had an undefined similarity")
    return captions[best], float(scores[best])


def choose_caption(
    feat: np.ndarray | torch.Tensor,
    candidates: list[Candidate],
    text_encoder: TextEncoder | None = None,
) -> CandidateSet:
    """Score a candidate list in place and wrap it with the argmax index."""
    scores = score_candidates(feat, [c.caption for c in candidates], text_encoder)
    best = None
    for idx, score in enumerate(scores):
        candidates[idx].score = score
        if score is not None and (best is None or score > scores[best]):
            best = idx
    if best is None:
        raise NoValidCandidate("every candidate had an undefined similarity")
    return CandidateSet(candidates=candidates, chosen=best)
