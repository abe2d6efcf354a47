"""Background preservation, temporal consistency and a CLIP-style text
alignment score, with features supplied by a pluggable provider.

``None`` marks an undefined result (no background, zero-norm feature).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .diffusion.codec import ToyTextEncoder
from .diffusion.conditioning import MaskSequence
from .errors import InvalidArgumentError, InvalidShapeError
from .tensor import Tensor


def _arr(x) -> np.ndarray:
    return np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)


def background_preservation(original, result, mask, value_max: float = 1.0) -> float | None:
    """Mean absolute difference over all background (mask == 0) pixels and
    channels jointly, on the 0-255 scale. ``value_max`` is the input white level."""
    a, b = _arr(original), _arr(result)
    m = _arr(mask.m if isinstance(mask, MaskSequence) else mask)
    if a.shape != b.shape or a.ndim != 4:
        raise InvalidShapeError(f"original {a.shape} and result {b.shape} must match as [f, c, w, h]")
    if m.ndim == 3:
        m = m[:, None]
    if m.shape != (a.shape[0], 1, *a.shape[2:]):
        raise InvalidShapeError(f"mask {m.shape} does not match frames {a.shape}")
    if not np.isin(m, (0.0, 1.0)).all():
        raise InvalidArgumentError("mask must be binary")
    bg = np.broadcast_to(m == 0, a.shape)
    if not bg.any():
        return None
    return float(np.abs(a[bg] - b[bg]).mean() * (255.0 / value_max))


def _unit_rows(features) -> np.ndarray | None:
    f = _arr(features)
    if f.ndim != 2:
        raise InvalidShapeError(f"expected [n, dim] features, got {f.shape}")
    norms = np.linalg.norm(f, axis=1)
    if (norms == 0).any():
        return None
    return f / norms[:, None]


def temporal_consistency(frame_features) -> float | None:
    """Mean cosine of consecutive frame features, times 100."""
    f = _arr(frame_features)
    if f.ndim != 2 or f.shape[0] < 2:
        raise InvalidArgumentError("need at least two frame feature vectors")
    u = _unit_rows(f)
    if u is None:
        return None
    return float(100.0 * np.mean(np.sum(u[1:] * u[:-1], axis=1)))


def clip_style_score(frame_features, text_feature) -> float | None:
    """Mean over frames of ``100 * max(cos(frame, text), 0)``."""
    f, t = _arr(frame_features), _arr(text_feature).ravel()
    if f.ndim == 1:
        f = f[None]
    if f.shape[1] != t.shape[0]:
        raise InvalidShapeError(f"frame feature dim {f.shape[1]} != text feature dim {t.shape[0]}")
    u = _unit_rows(f)
    tn = np.linalg.norm(t)
    if u is None or tn == 0:
        return None
    return float(np.mean(np.maximum(100.0 * (u @ (t / tn)), 0.0)))


class EmbeddingProvider(Protocol):
    dim: int

    def embed_frames(self, frames) -> np.ndarray: ...   # [f, c, w, h] -> [f, dim]

    def embed_text(self, prompt: str) -> np.ndarray: ...  # -> [dim]


def _pool(frames: np.ndarray, grid: int) -> np.ndarray:
    f, c, w, h = frames.shape
    out = np.empty((f, c, grid, grid))
    for i, xs in enumerate(np.array_split(np.arange(w), grid)):
        for j, ys in enumerate(np.array_split(np.arange(h), grid)):
            if len(xs) and len(ys):
                out[:, :, i, j] = frames[:, :, xs][:, :, :, ys].mean(axis=(2, 3))
            else:
                out[:, :, i, j] = 0.0
    return out.reshape(f, -1)


@dataclass(frozen=True)
class RandomProjectionProvider:
    """Test stand-in for an image/text encoder: mean-pooled pixels and mean
    token vectors, each through a fixed seeded Gaussian projection."""

    dim: int = 32
    channels: int = 3
    grid: int = 4
    seed: int = 0
    d_text: int = 8
    _img: np.ndarray = field(init=False, repr=False)
    _txt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        object.__setattr__(self, "_img", rng.standard_normal((self.channels * self.grid ** 2, self.dim)))
        object.__setattr__(self, "_txt", rng.standard_normal((self.d_text, self.dim)))

    def embed_frames(self, frames) -> np.ndarray:
        x = _arr(frames)
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise InvalidShapeError(f"expected [f, {self.channels}, w, h] frames, got {x.shape}")
        return _pool(x, self.grid) @ self._img

    def embed_text(self, prompt: str) -> np.ndarray:
        tokens = ToyTextEncoder(d_text=self.d_text, seed=self.seed).encode(prompt, np.float64).tokens.data
        return tokens.mean(axis=0) @ self._txt


@dataclass(frozen=True)
class MetricRow:
    clip_id: str
    cs: float | None
    bp: float | None
    tc: float | None


def evaluate_clip(clip_id: str, original, result, mask, prompt: str, provider: EmbeddingProvider,
                  value_max: float = 1.0) -> MetricRow:
    feats = provider.embed_frames(result)
    return MetricRow(
        clip_id,
        clip_style_score(feats, provider.embed_text(prompt)),
        background_preservation(original, result, mask, value_max),
        temporal_consistency(feats) if len(feats) > 1 else None,
    )


def metric_rows_csv(rows: Sequence[MetricRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["clip_id", "cs", "bp", "tc"])
    for r in rows:
        w.writerow([r.clip_id, *("undefined" if v is None else repr(v) for v in (r.cs, r.bp, r.tc))])
    return buf.getvalue()


__all__ = [
    "background_preservation", "temporal_consistency", "clip_style_score", "EmbeddingProvider",
    "RandomProjectionProvider", "MetricRow", "evaluate_clip", "metric_rows_csv",
]
