"""Training loop: noise-prediction loss with a rounding term, Adam, seeded batches.

Each step embeds a batch of caption id sequences, jumps them to per-example
random timesteps with fresh Gaussian noise, and asks the denoiser for the noise
(or x0, depending on parameterization). The loss is the mean squared prediction
error plus rounding_loss_weight times a cross-entropy that ties the
reconstructed x0 rows back to the true token ids through the embedding table.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .checkpoint import read_checkpoint, write_checkpoint
from .data import FeatureRecord
from .denoiser import DenoiserConfig, DenoiserModel, init_parameters
from .diffusion import PARAMETERIZATIONS
from .errors import BadConfig, EmptyInput, NonFinite
from .schedule import Schedule, make_schedule
from .vocab import EmbeddingTable, Vocabulary, encode


@dataclass
class TrainConfig:
    steps: int = 3000
    batch_size: int = 32
    lr: float = 1e-3
    grad_clip: float = 1.0
    rounding_loss_weight: float = 1.0
    schedule: str = "t_linear"
    timesteps: int = 1000
    beta_min: float = 0.01
    beta_max: float = 0.03
    parameterization: str = "eps"
    freeze_embeddings: bool = False
    embed_init_std: float = 0.02
    seed: int = 0
    checkpoint_every: int = 500
    check_finite: bool = False

    def __post_init__(self):
        if self.steps < 0:
            raise BadConfig(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise BadConfig(f"batch_size must be positive, got {self.batch_size}")
        if self.lr <= 0:
            raise BadConfig(f"lr must be positive, got {self.lr}")
        if self.rounding_loss_weight < 0:
            raise BadConfig(f"rounding_loss_weight must be >= 0, got {self.rounding_loss_weight}")
        if self.parameterization not in PARAMETERIZATIONS:
            raise BadConfig(f"parameterization must be one of {PARAMETERIZATIONS}")
        if self.checkpoint_every < 1:
            raise BadConfig(f"checkpoint_every must be positive, got {self.checkpoint_every}")


@dataclass
class TrainState:
    model: DenoiserModel
    emb: EmbeddingTable
    vocab: Vocabulary
    sched: Schedule
    cfg: TrainConfig
    optimizer: torch.optim.Adam
    rng: torch.Generator
    step: int = 0
    losses: list[float] = field(default_factory=list)

    def trainable(self) -> list[torch.nn.Parameter]:
        params = list(self.model.parameters())
        if not self.cfg.freeze_embeddings:
            params.append(self.emb.matrix)
        return params


def build_state(model_cfg: DenoiserConfig, train_cfg: TrainConfig, vocab: Vocabulary) -> TrainState:
    """Fresh model, embedding table, optimizer, and rng, all seeded from the config."""
    model = DenoiserModel(model_cfg)
    init_parameters(model, train_cfg.seed)
    table = EmbeddingTable.init_gaussian(
        vocab.size, model_cfg.embed_dim, std=train_cfg.embed_init_std, seed=train_cfg.seed + 1
    )
    emb = EmbeddingTable(torch.nn.Parameter(table.matrix))
    sched = make_schedule(train_cfg.schedule, train_cfg.timesteps, train_cfg.beta_min, train_cfg.beta_max)
    state = TrainState(
        model=model,
        emb=emb,
        vocab=vocab,
        sched=sched,
        cfg=train_cfg,
        optimizer=None,  # set right below, needs the param list
        rng=torch.Generator().manual_seed(train_cfg.seed + 2),
    )
    state.optimizer = torch.optim.Adam(state.trainable(), lr=train_cfg.lr, betas=(0.9, 0.999), eps=1e-8)
    return state


def loss_batch(
    model,
    emb: EmbeddingTable,
    seqs: torch.Tensor,
    feats: torch.Tensor,
    sched: Schedule,
    rng: torch.Generator,
    *,
    rounding_loss_weight: float = 1.0,
    parameterization: str = "eps",
    times: torch.Tensor | None = None,
    noise: torch.Tensor | None = None,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Diffusion loss for a batch of (id sequence, feature) pairs.

    seqs is (B, seq_len) int64, feats (B, feat_dim) float32. times and noise
    default to fresh draws from rng; passing them pins the stochastic parts down
    for testing. Returns the scalar loss and a stats dict.
    """
    if seqs.dim() != 2 or feats.dim() != 2 or seqs.shape[0] != feats.shape[0]:
        raise BadConfig(f"batch shapes incompatible: seqs {tuple(seqs.shape)}, feats {tuple(feats.shape)}")
    batch, seq_len = seqs.shape
    x0 = emb.matrix[seqs]
    if times is None:
        times = torch.randint(1, sched.timesteps + 1, (batch,), generator=rng)
    if noise is None:
        noise = torch.randn(x0.shape, generator=rng)
    abar = torch.as_tensor(sched.alpha_bar, dtype=torch.float32)[times - 1].reshape(batch, 1, 1)
    x_t = torch.sqrt(abar) * x0 + torch.sqrt(1.0 - abar) * noise
    pred = model(x_t, times, feats)
    if parameterization == "eps":
        mse = F.mse_loss(pred, noise)
        x0_hat = (x_t - torch.sqrt(1.0 - abar) * pred) / torch.sqrt(abar)
    else:
        mse = F.mse_loss(pred, x0)
        x0_hat = pred
    logits = x0_hat @ emb.matrix.t()
    rounding = F.cross_entropy(logits.reshape(batch * seq_len, -1), seqs.reshape(-1))
    loss = mse + rounding_loss_weight * rounding
    stats = {"mse": float(mse.detach()), "rounding": float(rounding.detach()), "loss": float(loss.detach())}
    return loss, stats


def apply_gradients(state: TrainState) -> float:
    """Clip the accumulated gradients and take one optimizer step."""
    total_norm = torch.nn.utils.clip_grad_norm_(state.trainable(), state.cfg.grad_clip)
    if not torch.isfinite(total_norm):
        raise NonFinite(f"gradient norm non-finite at step {state.step}")
    state.optimizer.step()
    return float(total_norm)


def train_step(state: TrainState, seqs: torch.Tensor, feats: torch.Tensor) -> float:
    """One optimization step; parameters are untouched if anything is non-finite."""
    state.optimizer.zero_grad(set_to_none=True)
    loss, _ = loss_batch(
        state.model,
        state.emb,
        seqs,
        feats,
        state.sched,
        state.rng,
        rounding_loss_weight=state.cfg.rounding_loss_weight,
        parameterization=state.cfg.parameterization,
    )
    if not torch.isfinite(loss):
        raise NonFinite(f"loss non-finite at step {state.step}: {loss.item()}")
    loss.backward()
    apply_gradients(state)
    state.step += 1
    value = float(loss.detach())
    state.losses.append(value)
    if state.cfg.check_finite:
        for name, param in state.model.named_parameters():
            if not torch.isfinite(param).all():
                raise NonFinite(f"parameter {name} non-finite after step {state.step}")
    return value


def training_pairs(records: Sequence[FeatureRecord], vocab: Vocabulary, seq_len: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Expand records into aligned (sequence, feature) tensors, one row per caption."""
    if not records:
        raise EmptyInput("no training records")
    seq_rows = []
    feat_rows = []
    for rec in records:
        for cap in rec.captions:
            seq_rows.append(encode(cap, vocab, seq_len))
            feat_rows.append(rec.feat)
    seqs = torch.as_tensor(np.stack(seq_rows), dtype=torch.long)
    feats = torch.as_tensor(np.stack(feat_rows), dtype=torch.float32)
    return seqs, feats


def state_tensors(state: TrainState) -> dict[str, torch.Tensor]:
    tensors = {"embedding.matrix": state.emb.matrix}
    for name, param in state.model.state_dict().items():
        tensors[f"model.{name}"] = param
    return tensors


def save_state(state: TrainState, path: str | Path) -> None:
    metadata = {
        "format": "pfxdiff-checkpoint",
        "step": state.step,
        "model": asdict(state.model.cfg),
        "train": asdict(state.cfg),
        "schedule": {
            "kind": state.sched.kind,
            "timesteps": state.sched.timesteps,
            "beta_min": state.cfg.beta_min,
            "beta_max": state.cfg.beta_max,
        },
        "vocab_sha256": state.vocab.sha256(),
    }
    write_checkpoint(path, state_tensors(state), metadata)


def load_state(path: str | Path, vocab: Vocabulary) -> TrainState:
    """Rebuild a TrainState from a checkpoint; the optimizer starts fresh."""
    tensors, metadata = read_checkpoint(path)
    if metadata.get("format") != "pfxdiff-checkpoint":
        raise BadConfig(f"{path}: not a model checkpoint (format {metadata.get('format')!r})")
    recorded = metadata.get("vocab_sha256")
    if recorded is not None and recorded != vocab.sha256():
        raise BadConfig(f"{path}: vocabulary hash mismatch, checkpoint was trained with a different vocab")
    model_cfg = DenoiserConfig(**metadata["model"])
    train_cfg = TrainConfig(**metadata["train"])
    state = build_state(model_cfg, train_cfg, vocab)
    state.step = int(metadata.get("step", 0))
    with torch.no_grad():
        state.emb.matrix.copy_(torch.from_numpy(tensors["embedding.matrix"]))
        model_tensors = {k[len("model.") :]: torch.from_numpy(v) for k, v in tensors.items() if k.startswith("model.")}
        state.model.load_state_dict(model_tensors)
    return state


def fit(
    records: Sequence[FeatureRecord],
    model_cfg: DenoiserConfig,
    train_cfg: TrainConfig,
    out_dir: str | Path,
    *,
    vocab: Vocabulary | None = None,
    log_every: int = 1,
) -> Path:
    """Train from scratch on a record list; returns the checkpoint path.

    Writes model.ckpt (every checkpoint_every steps and at the end), vocab.txt,
    and train_log.csv (step, loss, seconds) under out_dir. On a non-finite loss
    the last finite checkpoint is kept and the error re-raised.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if vocab is None:
        vocab = Vocabulary.from_captions(cap for rec in records for cap in rec.captions)
    vocab.save(out_dir / "vocab.txt")

    state = build_state(model_cfg, train_cfg, vocab)
    seqs, feats = training_pairs(records, vocab, model_cfg.seq_len)
    if seqs.shape[0] < train_cfg.batch_size:
        raise BadConfig(
            f"batch_size {train_cfg.batch_size} exceeds the {seqs.shape[0]} available caption pairs"
        )
    shuffle_rng = torch.Generator().manual_seed(train_cfg.seed + 3)

    ckpt_path = out_dir / "model.ckpt"
    log_path = out_dir / "train_log.csv"
    start = time.monotonic()
    save_state(state, ckpt_path)
    with open(log_path, "w", newline="") as log_file:
        writer = csv.writer(log_file)
        writer.writerow(["step", "loss", "seconds"])
        order = torch.randperm(seqs.shape[0], generator=shuffle_rng)
        cursor = 0
        while state.step < train_cfg.steps:
            if cursor + train_cfg.batch_size > seqs.shape[0]:
                order = torch.randperm(seqs.shape[0], generator=shuffle_rng)
                cursor = 0
            batch_idx = order[cursor : cursor + train_cfg.batch_size]
            cursor += train_cfg.batch_size
            try:
                loss = train_step(state, seqs[batch_idx], feats[batch_idx])
            except NonFinite:
                save_state(state, ckpt_path)
                raise
            if state.step % log_every == 0 or state.step == train_cfg.steps:
                writer.writerow([state.step, f"{loss:.6f}", f"{time.monotonic() - start:.3f}"])
            if state.step % train_cfg.checkpoint_every == 0:
                save_state(state, ckpt_path)
    save_state(state, ckpt_path)
    return ckpt_path
