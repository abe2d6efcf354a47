"""Deterministic DDIM sampling with classifier-free guidance and
latent-space background compositing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import InvalidArgumentError, InvalidShapeError
from ..motion import TextEmbedding
from ..tensor import Tensor
from .codec import null_embedding
from .conditioning import Denoiser, DenoiserInput, LatentClip, assemble_inpaint_input, cfg_epsilon
from .schedule import NoiseSchedule

DEFAULT_STEPS = 50
DEFAULT_GUIDANCE = 14.0


def ddim_timesteps(T: int, steps: int) -> list[int]:
    """Uniformly strided timesteps, coarsest first, always starting at ``T - 1``."""
    if not 1 <= steps <= T:
        raise InvalidArgumentError(f"steps must be in [1, {T}], got {steps}")
    stride = T // steps
    return [T - 1 - i * stride for i in range(steps)]


@dataclass(frozen=True)
class InpaintCondition:
    """Everything the sampler holds fixed across steps.

    ``known`` holds the background latents pasted back outside the mask;
    it defaults to ``z_masked``.
    """

    mask: Tensor       # [f, 1, w1, h1], values in [0, 1]
    z_masked: Tensor   # [f, 4, w1, h1]
    text: TextEmbedding
    null_text: TextEmbedding | None = None
    known: Tensor | None = None

    def __post_init__(self):
        f, _, w1, h1 = self.z_masked.shape
        if self.mask.shape != (f, 1, w1, h1):
            raise InvalidShapeError(f"mask {self.mask.shape} does not match latents {self.z_masked.shape}")
        if self.known is not None and self.known.shape != self.z_masked.shape:
            raise InvalidShapeError("known latents must match masked latents")

    @property
    def unconditional(self) -> TextEmbedding:
        return self.null_text if self.null_text is not None else null_embedding(self.text.d_text, self.text.tokens.dtype)

    def assemble(self, z_t: Tensor, t: int, text: TextEmbedding) -> DenoiserInput:
        return assemble_inpaint_input(z_t, self.mask, self.z_masked, t, text)

    def background(self) -> Tensor:
        return self.known if self.known is not None else self.z_masked


def ddim_sample(
    denoiser: Denoiser,
    condition: InpaintCondition,
    sched: NoiseSchedule,
    steps: int = DEFAULT_STEPS,
    cfg: float = DEFAULT_GUIDANCE,
    seed: int = 0,
    callback: Callable[[int, int, np.ndarray], None] | None = None,
) -> LatentClip:
    """Run eta=0 DDIM from seeded Gaussian noise down to clean latents.

    The update is carried out in float64. ``callback(i, t, x0_pred)`` sees
    the clean-latent estimate of every step. The result keeps generated
    values where the mask is positive and the background latents, bit for
    bit, where it is zero.
    """
    timesteps = ddim_timesteps(sched.T, steps)
    dtype = condition.z_masked.dtype
    shape = condition.z_masked.shape
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(shape)

    for i, t in enumerate(timesteps):
        z_t = Tensor(z, dtype=dtype)
        eps_c = denoiser(condition.assemble(z_t, t, condition.text))
        if cfg != 1.0:
            eps_u = denoiser(condition.assemble(z_t, t, condition.unconditional))
            eps = cfg_epsilon(eps_c, eps_u, cfg).data.astype(np.float64)
        else:
            eps = eps_c.data.astype(np.float64)
        if eps.shape != shape:
            raise InvalidShapeError(f"denoiser returned {eps.shape}, expected {shape}")

        ab = sched.alpha_bars[t]
        ab_prev = sched.alpha_bars[timesteps[i + 1]] if i + 1 < len(timesteps) else 1.0
        x0 = (z - math.sqrt(1.0 - ab) * eps) / math.sqrt(ab)
        if callback is not None:
            callback(i, t, x0)
        z = math.sqrt(ab_prev) * x0 + math.sqrt(1.0 - ab_prev) * eps

    m = condition.mask.data.astype(np.float64)
    known = condition.background().data
    generated = (m * z + (1.0 - m) * known).astype(dtype)
    return LatentClip(Tensor(np.where(m == 0, known, generated), dtype=dtype))
