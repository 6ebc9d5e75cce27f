"""Run configuration: one flat mapping that covers model, training, and decoding.

A config can come from a JSON file, keyword overrides (CLI flags), or defaults.
Unknown keys are rejected by name so typos fail loudly instead of silently
training with a default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict, fields
from pathlib import Path

from .denoiser import DenoiserConfig
from .errors import BadConfig
from .schedule import KINDS
from .training import TrainConfig


@dataclass
class RunConfig:
    # model
    embed_dim: int = 48
    model_dim: int = 128
    prefix_len: int = 4
    seq_len: int = 16
    layers: int = 4
    heads: int = 4
    ff_mult: int = 4
    feat_dim: int = 64
    # schedule
    schedule: str = "t_linear"
    timesteps: int = 1000
    beta_min: float = 0.01
    beta_max: float = 0.03
    # training
    steps: int = 3000
    batch_size: int = 32
    lr: float = 1e-3
    grad_clip: float = 1.0
    rounding_loss_weight: float = 1.0
    parameterization: str = "eps"
    freeze_embeddings: bool = False
    embed_init_std: float = 0.02
    checkpoint_every: int = 500
    check_finite: bool = False
    # decoding
    n_candidates: int = 5
    eval_steps: int = 50
    clamp: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.schedule not in KINDS:
            raise BadConfig(f"schedule must be one of {KINDS}, got {self.schedule!r}")
        if self.n_candidates < 1:
            raise BadConfig(f"n_candidates must be positive, got {self.n_candidates}")
        if not 1 <= self.eval_steps <= self.timesteps:
            raise BadConfig(f"eval_steps {self.eval_steps} outside 1..timesteps ({self.timesteps})")
        if self.seq_len < 2:
            raise BadConfig(f"seq_len must be >= 2, got {self.seq_len}")
        # Delegate the remaining range checks to the component configs.
        self.denoiser_config()
        self.train_config()

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise BadConfig(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise BadConfig(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise BadConfig(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)

    def with_overrides(self, **overrides) -> "RunConfig":
        """New config with every non-None override applied."""
        raw = asdict(self)
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in raw:
                raise BadConfig(f"unknown config key: {key}")
            raw[key] = value
        return RunConfig.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)

    def denoiser_config(self) -> DenoiserConfig:
        return DenoiserConfig(
            embed_dim=self.embed_dim,
            model_dim=self.model_dim,
            prefix_len=self.prefix_len,
            seq_len=self.seq_len,
            layers=self.layers,
            heads=self.heads,
            ff_mult=self.ff_mult,
            feat_dim=self.feat_dim,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            steps=self.steps,
            batch_size=self.batch_size,
            lr=self.lr,
            grad_clip=self.grad_clip,
            rounding_loss_weight=self.rounding_loss_weight,
            schedule=self.schedule,
            timesteps=self.timesteps,
            beta_min=self.beta_min,
            beta_max=self.beta_max,
            parameterization=self.parameterization,
            freeze_embeddings=self.freeze_embeddings,
            embed_init_std=self.embed_init_std,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
            check_finite=self.check_finite,
        )
