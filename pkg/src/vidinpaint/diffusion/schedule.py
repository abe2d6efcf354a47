"""Linear beta schedule and the closed-form forward noising step."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError, InvalidShapeError
from ..tensor import Tensor, ops


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def T(self) -> int:
        return len(self.betas)

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t < self.T:
            raise InvalidArgumentError(f"timestep {t} outside [0, {self.T})")
        return float(self.alpha_bars[t])


def build_schedule(T: int = 1000, beta_start: float = 1e-4, beta_end: float = 2e-2) -> NoiseSchedule:
    """DDPM-style linear betas; ``alpha_bars`` is the running product of ``1 - beta``."""
    if T < 1:
        raise InvalidArgumentError("T must be >= 1")
    if not 0 < beta_start <= beta_end < 1:
        raise InvalidArgumentError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    for arr in (betas, alphas, alpha_bars):
        arr.flags.writeable = False
    return NoiseSchedule(betas, alphas, alpha_bars)


def noise_at(z0: Tensor, alpha_bar: float, eps: Tensor) -> Tensor:
    """``sqrt(alpha_bar) * z0 + sqrt(1 - alpha_bar) * eps``."""
    if z0.shape != eps.shape:
        raise InvalidShapeError(f"noise shape {eps.shape} != latent shape {z0.shape}")
    if not 0.0 <= alpha_bar <= 1.0:
        raise InvalidArgumentError(f"alpha_bar {alpha_bar} outside [0, 1]")
    return ops.add(ops.scale(z0, math.sqrt(alpha_bar)), ops.scale(eps, math.sqrt(1.0 - alpha_bar)))


def forward_noise(z0, t: int, eps, sched: NoiseSchedule):
    """Noise clean latents to step ``t``. Accepts a Tensor or a LatentClip
    and returns the same kind."""
    from .conditioning import LatentClip

    if isinstance(z0, LatentClip):
        eps_t = eps.z if isinstance(eps, LatentClip) else eps
        return LatentClip(noise_at(z0.z, sched.alpha_bar(t), eps_t))
    return noise_at(z0, sched.alpha_bar(t), eps)
