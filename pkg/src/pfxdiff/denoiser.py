"""Prefix-conditioned transformer that predicts the noise in a caption latent.

The conditioning feature is mapped to a handful of prefix rows, the noisy
caption latent is projected up to the model width, and both run together
through a small pre-LN transformer encoder. Positional, segment-type, and
timestep embeddings are added before the stack. Only the caption rows are kept
at the output and projected back down to the latent width.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import BadConfig, DimMismatch, NonFinite, ShapeMismatch


@dataclass(frozen=True)
class DenoiserConfig:
    embed_dim: int = 48
    model_dim: int = 128
    prefix_len: int = 4
    seq_len: int = 16
    layers: int = 4
    heads: int = 4
    ff_mult: int = 4
    feat_dim: int = 64
    mapper_hidden: int | None = None

    def __post_init__(self):
        for name in ("embed_dim", "model_dim", "prefix_len", "seq_len", "layers", "heads", "ff_mult", "feat_dim"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise BadConfig(f"{name} must be a positive int, got {value!r}")
        if self.model_dim % self.heads != 0:
            raise BadConfig(f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if self.mapper_hidden is not None and self.mapper_hidden < 1:
            raise BadConfig(f"mapper_hidden must be positive, got {self.mapper_hidden}")

    @property
    def hidden(self) -> int:
        if self.mapper_hidden is not None:
            return self.mapper_hidden
        return (self.feat_dim + self.prefix_len * self.model_dim) // 2


class PrefixMapper(nn.Module):
    """Two-layer tanh MLP turning one feature vector into prefix_len model rows."""

    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        self.cfg = cfg
        self.fc1 = nn.Linear(cfg.feat_dim, cfg.hidden)
        self.fc2 = nn.Linear(cfg.hidden, cfg.prefix_len * cfg.model_dim)

    def forward(self, feat: torch.Tensor) -> torch.Tensor:
        if feat.shape[-1] != self.cfg.feat_dim:
            raise DimMismatch(f"feature width {feat.shape[-1]} != expected {self.cfg.feat_dim}")
        out = self.fc2(torch.tanh(self.fc1(feat)))
        return out.reshape(*feat.shape[:-1], self.cfg.prefix_len, self.cfg.model_dim)


class TimeEmbedding(nn.Module):
    """Sinusoidal timestep features followed by a learned affine map."""

    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim
        self.proj = nn.Linear(dim, dim)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        dtype = self.proj.weight.dtype
        freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=dtype) / half)
        args = t.reshape(-1, 1).to(dtype) * freqs.reshape(1, -1)
        emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
        if self.dim % 2 == 1:
            emb = F.pad(emb, (0, 1))
        return self.proj(emb)


class SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.out = nn.Linear(dim, dim)
        self.last_attn: torch.Tensor | None = None

    def forward(self, x: torch.Tensor, record: bool = False) -> torch.Tensor:
        b, n, d = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        q = q.reshape(b, n, self.heads, self.head_dim).transpose(1, 2)
        k = k.reshape(b, n, self.heads, self.head_dim).transpose(1, 2)
        v = v.reshape(b, n, self.heads, self.head_dim).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(self.head_dim), dim=-1)
        if record:
            self.last_attn = attn.detach()
        y = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.out(y)


class EncoderLayer(nn.Module):
    """Pre-LN transformer block: x + attn(LN(x)), then x + ff(LN(x))."""

    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.model_dim)
        self.attn = SelfAttention(cfg.model_dim, cfg.heads)
        self.norm2 = nn.LayerNorm(cfg.model_dim)
        self.ff = nn.Sequential(
            nn.Linear(cfg.model_dim, cfg.ff_mult * cfg.model_dim),
            nn.GELU(),
            nn.Linear(cfg.ff_mult * cfg.model_dim, cfg.model_dim),
        )

    def forward(self, x: torch.Tensor, record: bool = False) -> torch.Tensor:
        x = x + self.attn(self.norm1(x), record=record)
        return x + self.ff(self.norm2(x))


class DenoiserModel(nn.Module):
    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        self.cfg = cfg
        self.up_proj = nn.Linear(cfg.embed_dim, cfg.model_dim)
        self.down_proj = nn.Linear(cfg.model_dim, cfg.embed_dim)
        self.prefix_mapper = PrefixMapper(cfg)
        self.time_embed = TimeEmbedding(cfg.model_dim)
        self.pos_emb = nn.Parameter(torch.zeros(cfg.prefix_len + cfg.seq_len, cfg.model_dim))
        self.type_emb = nn.Parameter(torch.zeros(2, cfg.model_dim))
        self.blocks = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.layers))
        self.final_norm = nn.LayerNorm(cfg.model_dim)
        self.record_attention = False

    def assemble_sequence(self, prefix: torch.Tensor, caption: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        """Concat prefix and caption rows, add positional, type, and time embeddings.

        prefix is (B, prefix_len, model_dim), caption (B, seq_len, model_dim), t (B,).
        Type row 0 marks prefix rows, row 1 caption rows; the time embedding is
        added to every row.
        """
        rows = torch.cat([prefix + self.type_emb[0], caption + self.type_emb[1]], dim=-2)
        rows = rows + self.pos_emb
        return rows + self.time_embed(t).unsqueeze(-2)

    def forward(self, x_t: torch.Tensor, t: object, feat: torch.Tensor) -> torch.Tensor:
        single = x_t.dim() == 2
        if single:
            x_t = x_t.unsqueeze(0)
        if x_t.dim() != 3 or x_t.shape[-2:] != (self.cfg.seq_len, self.cfg.embed_dim):
            raise ShapeMismatch(
                f"latent shape {tuple(x_t.shape)} != (*, {self.cfg.seq_len}, {self.cfg.embed_dim})"
            )
        if feat.dim() == 1:
            feat = feat.unsqueeze(0)
        if feat.shape[0] == 1 and x_t.shape[0] > 1:
            feat = feat.expand(x_t.shape[0], -1)
        if feat.shape[0] != x_t.shape[0]:
            raise ShapeMismatch(f"batch mismatch: {x_t.shape[0]} latents vs {feat.shape[0]} features")
        t_vec = torch.as_tensor(t)
        if t_vec.dim() == 0:
            t_vec = t_vec.expand(x_t.shape[0])
        prefix = self.prefix_mapper(feat)
        caption = self.up_proj(x_t)
        h = self.assemble_sequence(prefix, caption, t_vec)
        for block in self.blocks:
            h = block(h, record=self.record_attention)
        h = self.final_norm(h)
        out = self.down_proj(h[:, self.cfg.prefix_len :, :])
        if not torch.isfinite(out).all():
            raise NonFinite("denoiser produced non-finite output")
        return out.squeeze(0) if single else out


def denoise(model: DenoiserModel, x_t: torch.Tensor, t: object, feat: torch.Tensor) -> torch.Tensor:
    return model(x_t, t, feat)


def init_parameters(model: nn.Module, seed: int) -> None:
    """Deterministic init: one generator, parameters visited in definition order.

    Linear weights get uniform(+/- 1/sqrt(fan_in)) with zero bias, LayerNorm gets
    identity scale, and free embedding parameters get N(0, 0.02).
    """
    gen = torch.Generator().manual_seed(int(seed))
    handled = set()
    with torch.no_grad():
        for name, module in model.named_modules():
            if isinstance(module, nn.Linear):
                bound = 1.0 / math.sqrt(module.weight.shape[1])
                module.weight.uniform_(-bound, bound, generator=gen)
                handled.add(f"{name}.weight" if name else "weight")
                if module.bias is not None:
                    module.bias.zero_()
                    handled.add(f"{name}.bias" if name else "bias")
            elif isinstance(module, nn.LayerNorm):
                module.weight.fill_(1.0)
                module.bias.zero_()
                handled.add(f"{name}.weight" if name else "weight")
                handled.add(f"{name}.bias" if name else "bias")
        for name, param in model.named_parameters():
            if name not in handled:
                param.normal_(0.0, 0.02, generator=gen)


def param_gradients(model: nn.Module, loss_fn: Callable[[], torch.Tensor]) -> dict[str, torch.Tensor]:
    """Gradient of loss_fn() for every named parameter (zeros where unused)."""
    loss = loss_fn()
    if not torch.isfinite(loss):
        raise NonFinite(f"loss is non-finite: {loss.item()}")
    names = [n for n, _ in model.named_parameters()]
    params = [p for _, p in model.named_parameters()]
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    return {
        n: (torch.zeros_like(p) if g is None else g.detach().clone())
        for n, p, g in zip(names, params, grads)
    }
