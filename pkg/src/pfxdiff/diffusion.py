"""Forward noising and reverse denoising over caption latents.

The forward chain is q(x_t | x_{t-1}) = N(sqrt(1 - beta_t) x_{t-1}, beta_t I),
with the closed form x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. The reverse
chain plugs a predicted x0 into the exact posterior q(x_{t-1} | x_t, x0). The
denoiser is any callable (x_t, t, feat) -> prediction; by default it predicts
the noise eps, with direct x0 prediction behind the parameterization switch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import torch

from .errors import BadConfig, BadSchedule, NonFinite, ShapeMismatch
from .schedule import Schedule, respace
from .vocab import EmbeddingTable, nearest_rows

DenoiseFn = Callable[[torch.Tensor, object, torch.Tensor], torch.Tensor]

PARAMETERIZATIONS = ("eps", "x0")


@dataclass
class LatentState:
    """A latent together with the chain position it sits at (t=0 means fully denoised)."""

    x: torch.Tensor
    t: int


@dataclass
class PosteriorParams:
    mean: torch.Tensor
    var: float


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what}: {tuple(a.shape)} vs {tuple(b.shape)}")


def q_sample_step(x_prev: torch.Tensor, beta_t: float, noise: torch.Tensor) -> torch.Tensor:
    """One forward step: sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) noise."""
    if not 0.0 <= beta_t < 1.0:
        raise BadSchedule(f"beta_t must lie in [0, 1), got {beta_t}")
    _check_same_shape(x_prev, noise, "x_prev vs noise")
    return math.sqrt(1.0 - beta_t) * x_prev + math.sqrt(beta_t) * noise


def q_sample(x0: torch.Tensor, t: int, sched: Schedule, noise: torch.Tensor) -> torch.Tensor:
    """Jump straight to step t: sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    abar = sched.alpha_bar_at(t)
    _check_same_shape(x0, noise, "x0 vs noise")
    return math.sqrt(abar) * x0 + math.sqrt(1.0 - abar) * noise


def reconstruct_x0(x_t: torch.Tensor, t: int, sched: Schedule, noise_hat: torch.Tensor) -> torch.Tensor:
    """Invert q_sample given a noise estimate: (x_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)."""
    abar = sched.alpha_bar_at(t)
    _check_same_shape(x_t, noise_hat, "x_t vs noise_hat")
    return (x_t - math.sqrt(1.0 - abar) * noise_hat) / math.sqrt(abar)


def posterior(x_t: torch.Tensor, x0: torch.Tensor, t: int, sched: Schedule) -> PosteriorParams:
    """Exact Gaussian posterior q(x_{t-1} | x_t, x0) of the forward chain.

    mean = sqrt(alpha_t)(1 - abar_{t-1})/(1 - abar_t) x_t
         + sqrt(abar_{t-1}) beta_t / (1 - abar_t) x0
    var  = (1 - abar_{t-1})/(1 - abar_t) beta_t

    At t=1 this collapses to (x0, 0) exactly.
    """
    _check_same_shape(x_t, x0, "x_t vs x0")
    abar_t = sched.alpha_bar_at(t)
    if t == 1:
        return PosteriorParams(mean=x0.clone(), var=0.0)
    abar_prev = sched.alpha_bar_before(t)
    beta_t = sched.beta_at(t)
    alpha_t = sched.alpha_at(t)
    denom = 1.0 - abar_t
    coef_xt = math.sqrt(alpha_t) * (1.0 - abar_prev) / denom
    coef_x0 = math.sqrt(abar_prev) * beta_t / denom
    var = (1.0 - abar_prev) / denom * beta_t
    return PosteriorParams(mean=coef_xt * x_t + coef_x0 * x0, var=var)


def clamp_to_table(x: torch.Tensor, table: EmbeddingTable) -> torch.Tensor:
    """Snap every latent row to its nearest embedding row."""
    ids = nearest_rows(x, table.matrix)
    return table.matrix[torch.as_tensor(ids, dtype=torch.long)]


def p_sample_step(
    x_t: torch.Tensor,
    t: int,
    sched: Schedule,
    denoiser: DenoiseFn,
    feat: torch.Tensor,
    noise: torch.Tensor,
    *,
    emb: EmbeddingTable | None = None,
    clamp: bool = True,
    parameterization: str = "eps",
    denoiser_t: object | None = None,
) -> torch.Tensor:
    """One reverse step t -> t-1.

    Predict, reconstruct x0 (eps parameterization) or take it directly (x0
    parameterization), optionally clamp x0 to the embedding table, then draw
    from the posterior. At t=1 the noise is forced to zero so the output is the
    posterior mean itself. denoiser_t lets a respaced caller pass the original
    timestep to the network while t indexes the subschedule.
    """
    if parameterization not in PARAMETERIZATIONS:
        raise BadConfig(f"parameterization must be one of {PARAMETERIZATIONS}, got {parameterization!r}")
    sched.alpha_bar_at(t)
    pred = denoiser(x_t, denoiser_t if denoiser_t is not None else t, feat)
    if not torch.isfinite(pred).all():
        raise NonFinite(f"denoiser output non-finite at t={t}")
    if parameterization == "eps":
        x0_hat = reconstruct_x0(x_t, t, sched, pred)
    else:
        _check_same_shape(x_t, pred, "x_t vs x0 prediction")
        x0_hat = pred
    if emb is not None and clamp:
        x0_hat = clamp_to_table(x0_hat, emb)
    post = posterior(x_t, x0_hat, t, sched)
    if t == 1:
        return post.mean
    _check_same_shape(x_t, noise, "x_t vs noise")
    return post.mean + math.sqrt(post.var) * noise


def sample_batch(
    denoiser: DenoiseFn,
    feats: torch.Tensor,
    sched: Schedule,
    eval_steps: int,
    seeds: Sequence[int],
    shape: tuple[int, int],
    *,
    emb: EmbeddingTable | None = None,
    clamp: bool = True,
    parameterization: str = "eps",
) -> torch.Tensor:
    """Run independent reverse chains side by side, one seeded generator each.

    feats is (B, feat_dim), seeds has length B. Each chain draws its own x_T and
    per-step noise, so chain i's output depends only on seeds[i]; batching is
    purely a speed trick. Returns the (B, *shape) t=0 latents.
    """
    if feats.dim() != 2 or feats.shape[0] != len(seeds):
        raise ShapeMismatch(f"feats {tuple(feats.shape)} vs {len(seeds)} seeds")
    sub, taus = respace(sched, eval_steps)
    gens = [torch.Generator().manual_seed(int(s)) for s in seeds]
    x = torch.stack([torch.randn(shape, generator=g) for g in gens])
    for i in range(sub.timesteps, 0, -1):
        if i > 1:
            noise = torch.stack([torch.randn(shape, generator=g) for g in gens])
        else:
            noise = torch.zeros_like(x)
        x = p_sample_step(
            x,
            i,
            sub,
            denoiser,
            feats,
            noise,
            emb=emb,
            clamp=clamp,
            parameterization=parameterization,
            denoiser_t=int(taus[i - 1]),
        )
    return x


def sample(
    denoiser: DenoiseFn,
    feat: torch.Tensor,
    sched: Schedule,
    eval_steps: int,
    seed: int,
    shape: tuple[int, int],
    *,
    emb: EmbeddingTable | None = None,
    clamp: bool = True,
    parameterization: str = "eps",
) -> LatentState:
    """Full reverse chain for a single conditioning feature; returns the t=0 state."""
    x = sample_batch(
        denoiser,
        feat.reshape(1, -1),
        sched,
        eval_steps,
        [seed],
        shape,
        emb=emb,
        clamp=clamp,
        parameterization=parameterization,
    )
    return LatentState(x=x[0], t=0)
