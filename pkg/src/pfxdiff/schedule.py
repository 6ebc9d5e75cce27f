"""Variance schedules for the forward noising chain.

A schedule is the triple (beta_t, alpha_t, alpha_bar_t) for t = 1..T, stored as
float64 arrays indexed t-1. Five constructions are supported: linear and square
interpolate beta between beta_min and beta_max; cosine derives beta from a
squared-cosine alpha_bar curve; t_linear and t_cosine are the same curves with
alpha_bar floored at 1e-4 so late steps keep a usable signal level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadConfig, BadSchedule, BadTimestep

KINDS = ("square", "linear", "cosine", "t_cosine", "t_linear")

ALPHA_BAR_FLOOR = 1e-4
_COSINE_OFFSET = 0.008
_BETA_MAX = 0.999
# Exact flooring would need beta = 0, which breaks the 0 < beta < 1 invariant and
# strict alpha_bar decrease; this keeps both with ~4e-14 drift over T=1000.
_BETA_TINY = 1e-12


@dataclass(frozen=True)
class Schedule:
    kind: str
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def timesteps(self) -> int:
        return len(self.beta)

    def _check_t(self, t: int) -> int:
        if not isinstance(t, (int, np.integer)) or isinstance(t, bool):
            raise BadTimestep(f"timestep must be an int, got {t!r}")
        if not 1 <= t <= len(self.beta):
            raise BadTimestep(f"timestep {t} outside 1..{len(self.beta)}")
        return int(t)

    def beta_at(self, t: int) -> float:
        return float(self.beta[self._check_t(t) - 1])

    def alpha_at(self, t: int) -> float:
        return float(self.alpha[self._check_t(t) - 1])

    def alpha_bar_at(self, t: int) -> float:
        return float(self.alpha_bar[self._check_t(t) - 1])

    def alpha_bar_before(self, t: int) -> float:
        """alpha_bar at t-1, with the t=1 convention alpha_bar_0 = 1."""
        t = self._check_t(t)
        return 1.0 if t == 1 else float(self.alpha_bar[t - 2])


def _interp_betas(timesteps: int, beta_min: float, beta_max: float, squared: bool) -> np.ndarray:
    frac = np.linspace(0.0, 1.0, timesteps, dtype=np.float64)
    if squared:
        frac = frac * frac
    # Convex combination keeps the endpoints exactly beta_min and beta_max.
    return beta_min * (1.0 - frac) + beta_max * frac


def _cosine_betas(timesteps: int) -> np.ndarray:
    s = _COSINE_OFFSET
    grid = np.arange(timesteps + 1, dtype=np.float64) / timesteps
    f = np.cos((grid + s) / (1.0 + s) * math.pi / 2.0) ** 2
    betas = 1.0 - f[1:] / f[:-1]
    return np.clip(betas, _BETA_TINY, _BETA_MAX)


def _truncate(betas: np.ndarray) -> np.ndarray:
    """Refit betas so cumprod(1 - beta) never drops below ALPHA_BAR_FLOOR."""
    abar = np.cumprod(1.0 - betas)
    floored = np.maximum(abar, ALPHA_BAR_FLOOR)
    prev = np.concatenate(([1.0], floored[:-1]))
    return np.clip(1.0 - floored / prev, _BETA_TINY, _BETA_MAX)


def make_schedule(kind: str, timesteps: int, beta_min: float = 0.01, beta_max: float = 0.03) -> Schedule:
    if kind not in KINDS:
        raise BadSchedule(f"unknown schedule kind {kind!r}, expected one of {KINDS}")
    if not isinstance(timesteps, (int, np.integer)) or isinstance(timesteps, bool) or timesteps < 1:
        raise BadSchedule(f"timesteps must be a positive int, got {timesteps!r}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise BadSchedule(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")

    if kind == "linear":
        beta = _interp_betas(timesteps, beta_min, beta_max, squared=False)
    elif kind == "square":
        beta = _interp_betas(timesteps, beta_min, beta_max, squared=True)
    elif kind == "cosine":
        beta = _cosine_betas(timesteps)
    elif kind == "t_linear":
        beta = _truncate(_interp_betas(timesteps, beta_min, beta_max, squared=False))
    else:
        beta = _truncate(_cosine_betas(timesteps))

    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sched = Schedule(kind=kind, beta=beta, alpha=alpha, alpha_bar=alpha_bar)
    _validate(sched)
    return sched


def _validate(sched: Schedule) -> None:
    beta, alpha_bar = sched.beta, sched.alpha_bar
    if np.any(beta <= 0.0) or np.any(beta >= 1.0):
        raise BadSchedule("beta outside (0, 1)")
    if np.any(alpha_bar <= 0.0) or np.any(alpha_bar >= 1.0):
        raise BadSchedule("alpha_bar outside (0, 1)")
    if np.any(np.diff(alpha_bar) >= 0.0):
        raise BadSchedule("alpha_bar must decrease strictly")


def respace(sched: Schedule, eval_steps: int) -> tuple[Schedule, np.ndarray]:
    """Pick eval_steps of the T timesteps and rebuild a schedule over just those.

    Returns (subschedule, taus) where taus holds the original 1-indexed timesteps,
    ascending, always ending at T and (for eval_steps > 1) starting at 1. The
    subschedule's beta telescopes the skipped steps: beta'_i = 1 - abar(tau_i) /
    abar(tau_{i-1}), so q(x_{tau_i} | x0) is unchanged.
    """
    if not isinstance(eval_steps, (int, np.integer)) or isinstance(eval_steps, bool):
        raise BadConfig(f"eval_steps must be an int, got {eval_steps!r}")
    if not 1 <= eval_steps <= sched.timesteps:
        raise BadConfig(f"eval_steps {eval_steps} outside 1..{sched.timesteps}")
    if eval_steps == 1:
        taus = np.array([sched.timesteps], dtype=np.int64)
    else:
        taus = np.unique(np.round(np.linspace(1, sched.timesteps, eval_steps)).astype(np.int64))
    abar = sched.alpha_bar[taus - 1]
    prev = np.concatenate(([1.0], abar[:-1]))
    beta = 1.0 - abar / prev
    sub = Schedule(kind=sched.kind, beta=beta, alpha=1.0 - beta, alpha_bar=np.cumprod(1.0 - beta))
    return sub, taus


def dump_schedule(sched: Schedule) -> str:
    """Render the schedule as CSV: header then one row per t, 9 significant digits."""
    lines = ["t,beta,alpha,alpha_bar"]
    for i in range(sched.timesteps):
        lines.append(
            f"{i + 1},{sched.beta[i]:.9g},{sched.alpha[i]:.9g},{sched.alpha_bar[i]:.9g}"
        )
    return "\n".join(lines) + "\n"
