"""Smallest noise predictor that consumes every conditioning input: a
per-pixel linear mix of the 9 input channels plus a timestep embedding,
one motion-capture block, and a per-pixel projection back to 4 channels."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from ..errors import LoadError
from ..motion import MotionBlockParams, init_motion_block, kaiming_normal, motion_block_forward
from ..tensor import Tensor, ops
from .codec import LATENT_CHANNELS
from .conditioning import INPUT_CHANNELS, DenoiserInput

PREFIX = "denoiser"


def timestep_embedding(t: int, dim: int, max_period: float = 10000.0) -> np.ndarray:
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half) / half)
    args = t * freqs
    return np.concatenate([np.sin(args), np.cos(args)])


@dataclass(frozen=True)
class ToyDenoiser:
    w_in: Tensor    # [9, d]
    b_in: Tensor    # [d]
    w_time: Tensor  # [d_time, d]
    w_out: Tensor   # [d, 4]
    b_out: Tensor   # [4]
    block: MotionBlockParams

    @property
    def d_model(self) -> int:
        return self.w_in.shape[1]

    def named_parameters(self) -> dict[str, Tensor]:
        own = {f"{PREFIX}.{k}": getattr(self, k) for k in ("w_in", "b_in", "w_time", "w_out", "b_out")}
        return {**own, **self.block.named_parameters()}

    def with_parameters(self, named: Mapping[str, Tensor]) -> "ToyDenoiser":
        changes = {}
        for key, value in named.items():
            if key.startswith(PREFIX + "."):
                attr = key.split(".", 1)[1]
                current = getattr(self, attr, None)
                if not isinstance(current, Tensor):
                    raise LoadError(key, "unknown denoiser parameter")
                if current.shape != value.shape:
                    raise LoadError(key, f"shape {value.shape} != expected {current.shape}")
                changes[attr] = value
        block = self.block.with_parameters({k: v for k, v in named.items() if k.startswith("motion.")})
        return replace(self, block=block, **changes)

    def __call__(self, inp: DenoiserInput) -> Tensor:
        f, _, w, h = inp.channels.shape
        d = self.d_model
        temb = Tensor(timestep_embedding(inp.t, self.w_time.shape[0])[None], dtype=self.w_time.dtype)
        tokens = ops.permute(inp.channels, (0, 2, 3, 1))                       # [f, w, h, 9]
        hidden = ops.add(ops.matmul(tokens, self.w_in), self.b_in)
        hidden = ops.add(hidden, ops.reshape_view(ops.matmul(temb, self.w_time), (d,)))
        video = ops.reshape_view(ops.permute(hidden, (0, 3, 1, 2)), (1, f, d, w, h))
        video = motion_block_forward(video, inp.text, self.block)
        tokens = ops.permute(ops.reshape_view(video, (f, d, w, h)), (0, 2, 3, 1))
        out = ops.add(ops.matmul(tokens, self.w_out), self.b_out)              # [f, w, h, 4]
        return ops.permute(out, (0, 3, 1, 2))


def init_toy_denoiser(
    seed: int,
    d_model: int = 8,
    d_text: int = 8,
    heads: int = 8,
    target: tuple[int, int] = (2, 2),
    d_time: int = 8,
    dtype=np.float32,
    zero_init_output: bool = True,
) -> ToyDenoiser:
    rng = np.random.default_rng(seed)
    block = init_motion_block(int(rng.integers(2**31)), d_model=d_model, d_text=d_text, heads=heads,
                              target=target, zero_init_output=zero_init_output, dtype=dtype)
    return ToyDenoiser(
        w_in=Tensor(kaiming_normal(rng, INPUT_CHANNELS, (INPUT_CHANNELS, d_model)), dtype=dtype),
        b_in=Tensor(np.zeros(d_model), dtype=dtype),
        w_time=Tensor(kaiming_normal(rng, d_time, (d_time, d_model)), dtype=dtype),
        w_out=Tensor(kaiming_normal(rng, d_model, (d_model, LATENT_CHANNELS), gain=1.0), dtype=dtype),
        b_out=Tensor(np.zeros(LATENT_CHANNELS), dtype=dtype),
        block=block,
    )
