"""Inpainting inputs: latent clips, masks, the 9-channel denoiser input,
the noise-prediction loss and classifier-free guidance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import InvalidArgumentError, InvalidShapeError
from ..motion import TextEmbedding
from ..tensor import Tensor, ops
from .codec import LATENT_CHANNELS
from .schedule import NoiseSchedule, forward_noise

INPUT_CHANNELS = 2 * LATENT_CHANNELS + 1


@dataclass(frozen=True)
class LatentClip:
    z: Tensor  # [f, 4, w1, h1]

    def __post_init__(self):
        if self.z.ndim != 4 or self.z.shape[1] != LATENT_CHANNELS:
            raise InvalidShapeError(f"latent clip must be [f, 4, w1, h1], got {self.z.shape}")

    @property
    def shape(self):
        return self.z.shape


@dataclass(frozen=True)
class MaskSequence:
    """Binary per-frame masks ``[f, 1, w, h]``; 1 marks the region to fill."""

    m: Tensor

    def __post_init__(self):
        if self.m.ndim != 4 or self.m.shape[1] != 1:
            raise InvalidShapeError(f"mask must be [f, 1, w, h], got {self.m.shape}")
        if not np.isin(self.m.data, (0.0, 1.0)).all():
            raise InvalidArgumentError("mask values must be 0 or 1")

    @classmethod
    def from_array(cls, arr, dtype=np.float32) -> "MaskSequence":
        arr = np.asarray(arr)
        if arr.ndim == 3:
            arr = arr[:, None]
        return cls(Tensor(arr.astype(np.float64), dtype=dtype))

    @property
    def frames(self) -> int:
        return self.m.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.m.shape[2], self.m.shape[3]

    def area_fraction(self) -> np.ndarray:
        return self.m.data.reshape(self.frames, -1).mean(axis=1)

    def resized(self, size) -> Tensor:
        return resize_mask(self.m, size)


def resize_mask(m: Tensor, size) -> Tensor:
    """Downsample a mask to latent resolution.

    Integer factors use block averaging, so a latent cell is 0 exactly when
    its whole pixel block is background. Other ratios fall back to bilinear.
    """
    f, _, w, h = m.shape
    tw, th = (int(n) for n in size)
    if (w, h) == (tw, th):
        return m
    if w % tw == 0 and h % th == 0:
        sw, sh = w // tw, h // th
        pooled = m.data.reshape(f, 1, tw, sw, th, sh).mean(axis=(3, 5))
        return Tensor(pooled, dtype=m.dtype)
    return Tensor(np.clip(ops.spatial_resize(m, (tw, th)).data, 0.0, 1.0), dtype=m.dtype)


@dataclass(frozen=True)
class DenoiserInput:
    channels: Tensor  # [f, 9, w1, h1]: z_t, mask, masked latents
    t: int
    text: TextEmbedding

    def __post_init__(self):
        if self.channels.ndim != 4 or self.channels.shape[1] != INPUT_CHANNELS:
            raise InvalidShapeError(f"denoiser input must have {INPUT_CHANNELS} channels, got {self.channels.shape}")


Denoiser = Callable[[DenoiserInput], Tensor]


def _latent(x) -> Tensor:
    return x.z if isinstance(x, LatentClip) else x


def assemble_inpaint_input(z_t, mask, z_masked, t: int, text: TextEmbedding) -> DenoiserInput:
    """Concatenate ``[z_t (4), resized mask (1), masked latents (4)]`` on channels.

    ``mask`` may be a :class:`MaskSequence` at pixel resolution or an
    already-resized ``[f, 1, w1, h1]`` tensor.
    """
    z_t, z_masked = _latent(z_t), _latent(z_masked)
    if z_t.shape != z_masked.shape or z_t.ndim != 4 or z_t.shape[1] != LATENT_CHANNELS:
        raise InvalidShapeError(f"latents {z_t.shape} and masked latents {z_masked.shape} must match as [f, 4, w1, h1]")
    f, _, w1, h1 = z_t.shape
    m_bar = mask.resized((w1, h1)) if isinstance(mask, MaskSequence) else mask
    if m_bar.shape != (f, 1, w1, h1):
        raise InvalidShapeError(f"mask {m_bar.shape} does not match latents {(f, 1, w1, h1)}")
    if m_bar.dtype != z_t.dtype:
        m_bar = m_bar.astype(z_t.dtype)
    return DenoiserInput(ops.concat([z_t, m_bar, z_masked], axis=1), int(t), text)


@dataclass(frozen=True)
class TrainingExample:
    z0: Tensor        # clean latents [f, 4, w1, h1]
    mask: Tensor      # resized mask [f, 1, w1, h1]
    z_masked: Tensor  # latents of the masked clip
    text: TextEmbedding


def training_loss(denoiser: Denoiser, batch: TrainingExample, t: int, eps: Tensor, sched: NoiseSchedule) -> Tensor:
    """Mean squared error between the drawn noise and the predicted noise."""
    z_t = forward_noise(batch.z0, t, eps, sched)
    pred = denoiser(assemble_inpaint_input(z_t, batch.mask, batch.z_masked, t, batch.text))
    if pred.shape != eps.shape:
        raise InvalidShapeError(f"denoiser returned {pred.shape}, expected {eps.shape}")
    return ops.mse(eps, pred)


def cfg_epsilon(eps_cond: Tensor, eps_uncond: Tensor, scale: float) -> Tensor:
    """``eps_uncond + scale * (eps_cond - eps_uncond)``."""
    if eps_cond.shape != eps_uncond.shape:
        raise InvalidShapeError(f"guidance branches differ in shape: {eps_cond.shape} vs {eps_uncond.shape}")
    return ops.add(eps_uncond, ops.scale(ops.sub(eps_cond, eps_uncond), scale))
