"""Deterministic stand-ins for the image autoencoder and the text encoder."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidShapeError
from ..motion import TextEmbedding
from ..tensor import Tensor

LATENT_CHANNELS = 4


@dataclass(frozen=True)
class ToyCodec:
    """``s x s`` average pooling plus a fixed orthonormal channel map.

    ``decode`` is the transpose (nearest upsampling of the back-projected
    channels), so ``encode(decode(z)) == z`` for every latent in the
    encoder's range; with ``pixel_channels >= 4`` that is every latent.
    """

    pixel_channels: int = 3
    factor: int = 8
    seed: int = 0
    projection: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        big, small = max(self.pixel_channels, LATENT_CHANNELS), min(self.pixel_channels, LATENT_CHANNELS)
        q, r = np.linalg.qr(rng.standard_normal((big, small)))
        q = q * np.sign(np.diag(r))
        # projection maps pixel channels -> latent channels, shape [4, c]
        proj = q.T if self.pixel_channels >= LATENT_CHANNELS else q
        object.__setattr__(self, "projection", proj)

    def encode(self, frames: Tensor) -> Tensor:
        f, c, w, h = frames.shape
        s = self.factor
        if c != self.pixel_channels or w % s or h % s:
            raise InvalidShapeError(f"frames {frames.shape} incompatible with {c=} / factor {s}")
        pooled = frames.data.reshape(f, c, w // s, s, h // s, s).mean(axis=(3, 5))
        return Tensor(np.einsum("lc,fcwh->flwh", self.projection, pooled), dtype=frames.dtype)

    def decode(self, z: Tensor) -> Tensor:
        if z.ndim != 4 or z.shape[1] != LATENT_CHANNELS:
            raise InvalidShapeError(f"latents must be [f, 4, w, h], got {z.shape}")
        pixels = np.einsum("lc,flwh->fcwh", self.projection, z.data)
        s = self.factor
        return Tensor(np.repeat(np.repeat(pixels, s, axis=2), s, axis=3), dtype=z.dtype)


@dataclass(frozen=True)
class ToyTextEncoder:
    """Whitespace tokens mapped to fixed pseudo-random vectors.

    The empty prompt encodes to the null embedding: a single all-zeros row.
    """

    d_text: int = 8
    seed: int = 0

    def token_vector(self, token: str) -> np.ndarray:
        digest = hashlib.blake2b(f"{self.seed}:{token}".encode(), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        return rng.standard_normal(self.d_text) / np.sqrt(self.d_text)

    def encode(self, prompt: str, dtype=np.float32) -> TextEmbedding:
        tokens = prompt.split()
        if not tokens:
            return self.null(dtype)
        return TextEmbedding(Tensor(np.stack([self.token_vector(t) for t in tokens]), dtype=dtype))

    def null(self, dtype=np.float32) -> TextEmbedding:
        return null_embedding(self.d_text, dtype)


def null_embedding(d_text: int, dtype=np.float32) -> TextEmbedding:
    return TextEmbedding(Tensor(np.zeros((1, d_text)), dtype=dtype))
