"""Motion-capture block: two temporal attentions, a damped global attention
and a textual cross-attention, each a pre-norm residual sublayer.

All video tensors use the ``[b, f, c, w, h]`` layout. Projections are
right-multiplied: ``tokens @ W`` with ``W`` of shape ``[d_in, d_out]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping

import numpy as np

from .errors import InvalidArgumentError, InvalidShapeError, LoadError
from .tensor import Tensor, ops

LAYERS = ("temporal1", "temporal2", "dga", "cross")
MATRICES = ("wq", "wk", "wv", "wo")
PREFIX = "motion"


@dataclass(frozen=True)
class AttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    heads: int = 8

    def __post_init__(self):
        d = self.wq.shape[-1]
        if self.wq.shape != (d, d) or self.wo.shape != (d, d):
            raise InvalidShapeError(f"wq/wo must be square, got {self.wq.shape}, {self.wo.shape}")
        if self.wk.ndim != 2 or self.wk.shape != self.wv.shape or self.wk.shape[1] != d:
            raise InvalidShapeError(f"wk/wv must be [d_in, {d}], got {self.wk.shape}, {self.wv.shape}")
        if self.heads < 1 or d % self.heads:
            raise InvalidArgumentError(f"d_model {d} not divisible by heads {self.heads}")

    @property
    def d_model(self) -> int:
        return self.wq.shape[0]

    @property
    def d_kv(self) -> int:
        return self.wk.shape[0]


@dataclass(frozen=True)
class TextEmbedding:
    """Encoded prompt, ``tokens`` of shape ``[l_text, d_text]``."""

    tokens: Tensor

    def __post_init__(self):
        if self.tokens.ndim != 2:
            raise InvalidShapeError(f"text tokens must be [l_text, d_text], got {self.tokens.shape}")

    @property
    def l_text(self) -> int:
        return self.tokens.shape[0]

    @property
    def d_text(self) -> int:
        return self.tokens.shape[1]


@dataclass(frozen=True)
class MotionBlockParams:
    temporal1: AttentionParams
    temporal2: AttentionParams
    dga: AttentionParams
    cross: AttentionParams
    target: tuple[int, int]
    # layer name -> (scale, shift), each of shape [d_model]
    norms: Mapping[str, tuple[Tensor, Tensor]] = field(default_factory=dict)

    def __post_init__(self):
        d = self.temporal1.d_model
        for name in LAYERS:
            p = getattr(self, name)
            if p.d_model != d:
                raise InvalidShapeError(f"{name} has d_model {p.d_model}, expected {d}")
            if name != "cross" and p.d_kv != d:
                raise InvalidShapeError(f"{name} key/value projections must be square")
            scale, shift = self.norms[name]
            if scale.shape != (d,) or shift.shape != (d,):
                raise InvalidShapeError(f"{name} norm parameters must have shape ({d},)")
        if len(self.target) != 2 or min(self.target) < 1:
            raise InvalidArgumentError(f"target must be two sizes >= 1, got {self.target}")

    @property
    def d_model(self) -> int:
        return self.temporal1.d_model

    @property
    def d_text(self) -> int:
        return self.cross.d_kv

    def named_parameters(self) -> dict[str, Tensor]:
        """Trainable tensors keyed ``motion.<layer>.<matrix>``."""
        named = {}
        for layer in LAYERS:
            p = getattr(self, layer)
            for m in MATRICES:
                named[f"{PREFIX}.{layer}.{m}"] = getattr(p, m)
            scale, shift = self.norms[layer]
            named[f"{PREFIX}.{layer}.norm_scale"] = scale
            named[f"{PREFIX}.{layer}.norm_shift"] = shift
        return named

    def with_parameters(self, named: Mapping[str, Tensor]) -> "MotionBlockParams":
        """Copy with any subset of :meth:`named_parameters` entries replaced."""
        current = self.named_parameters()
        for key, value in named.items():
            if key in current and value.shape != current[key].shape:
                raise LoadError(key, f"shape {value.shape} != expected {current[key].shape}")
        merged = {**current, **{k: v for k, v in named.items() if k in current}}
        layers = {}
        norms = {}
        for layer in LAYERS:
            old = getattr(self, layer)
            layers[layer] = replace(old, **{m: merged[f"{PREFIX}.{layer}.{m}"] for m in MATRICES})
            norms[layer] = (merged[f"{PREFIX}.{layer}.norm_scale"], merged[f"{PREFIX}.{layer}.norm_shift"])
        return replace(self, norms=norms, **layers)


# -- sublayers ---------------------------------------------------------------------

def _check_video(x: Tensor, p: AttentionParams) -> tuple[int, ...]:
    if x.ndim != 5:
        raise InvalidShapeError(f"expected [b, f, c, w, h], got {x.shape}")
    if x.shape[2] != p.d_model:
        raise InvalidShapeError(f"channel count {x.shape[2]} != d_model {p.d_model}")
    return x.shape


def _check_target(target, w: int, h: int) -> tuple[int, int]:
    tw, th = (int(n) for n in target)
    if not (1 <= tw <= w and 1 <= th <= h):
        raise InvalidArgumentError(f"target {(tw, th)} must lie within 1..{(w, h)}")
    return tw, th


def self_attention(tokens: Tensor, p: AttentionParams) -> Tensor:
    """Multi-head self-attention over ``[..., L, c]`` tokens, no biases."""
    q = ops.matmul(tokens, p.wq)
    k = ops.matmul(tokens, p.wk)
    v = ops.matmul(tokens, p.wv)
    return ops.matmul(ops.scaled_dot_attention(q, k, v, p.heads), p.wo)


def temporal_attention(x: Tensor, p: AttentionParams) -> Tensor:
    """Self-attention along frames, independently at every spatial site.

    ``[b, f, c, w, h]`` is packed to ``[(b*w*h), f, c]``, attended, and
    unpacked, so site ``(i, j)`` only ever sees itself across frames.
    """
    b, f, c, w, h = _check_video(x, p)
    packed = ops.reshape_view(ops.permute(x, (0, 3, 4, 1, 2)), (b * w * h, f, c))
    out = self_attention(packed, p)
    return ops.permute(ops.reshape_view(out, (b, w, h, f, c)), (0, 3, 4, 1, 2))


def _flatten_resized(x: Tensor, target: tuple[int, int]) -> Tensor:
    b, f, c = x.shape[:3]
    small = ops.spatial_resize(x, target)
    return ops.reshape_view(ops.permute(small, (0, 1, 3, 4, 2)), (b, f * target[0] * target[1], c))


def _unflatten_resize_back(tokens: Tensor, shape: tuple[int, ...], target: tuple[int, int]) -> Tensor:
    b, f, c, w, h = shape
    grid = ops.permute(ops.reshape_view(tokens, (b, f, target[0], target[1], c)), (0, 1, 4, 2, 3))
    return ops.spatial_resize(grid, (w, h))


def damped_global_attention(x: Tensor, p: AttentionParams, target) -> Tensor:
    """Joint space-time self-attention on a downsampled grid.

    Each frame is resized to ``target``; the clip is flattened into one
    sequence of ``f * w' * h'`` tokens per batch item, attended, then
    reshaped and resized back to ``(w, h)``.
    """
    shape = _check_video(x, p)
    target = _check_target(target, *shape[3:])
    out = self_attention(_flatten_resized(x, target), p)
    return _unflatten_resize_back(out, shape, target)


def textual_cross_attention(x: Tensor, text: TextEmbedding, p: AttentionParams, target) -> Tensor:
    """Resized visual tokens query the text tokens (keys and values)."""
    shape = _check_video(x, p)
    if text.d_text != p.d_kv:
        raise InvalidShapeError(f"text dim {text.d_text} != cross key/value input dim {p.d_kv}")
    target = _check_target(target, *shape[3:])
    b, c = shape[0], shape[2]
    queries = _flatten_resized(x, target)
    q = ops.matmul(queries, p.wq)
    k = ops.expand(ops.reshape_view(ops.matmul(text.tokens, p.wk), (1, text.l_text, c)), (b, text.l_text, c))
    v = ops.expand(ops.reshape_view(ops.matmul(text.tokens, p.wv), (1, text.l_text, c)), (b, text.l_text, c))
    out = ops.matmul(ops.scaled_dot_attention(q, k, v, p.heads), p.wo)
    return _unflatten_resize_back(out, shape, target)


def _norm(x: Tensor, scale: Tensor, shift: Tensor, eps: float) -> Tensor:
    c = scale.shape[0]
    return ops.layer_norm(x, ops.reshape_view(scale, (1, 1, c, 1, 1)), ops.reshape_view(shift, (1, 1, c, 1, 1)),
                          axis=2, eps=eps)


def motion_block_forward(x: Tensor, text: TextEmbedding, params: MotionBlockParams, eps: float = 1e-5) -> Tensor:
    """``x + temporal1 → + temporal2 → + dga → + cross``, each on a normed input."""
    sublayers = {
        "temporal1": lambda h: temporal_attention(h, params.temporal1),
        "temporal2": lambda h: temporal_attention(h, params.temporal2),
        "dga": lambda h: damped_global_attention(h, params.dga, params.target),
        "cross": lambda h: textual_cross_attention(h, text, params.cross, params.target),
    }
    for name in LAYERS:
        scale, shift = params.norms[name]
        x = ops.add(x, sublayers[name](_norm(x, scale, shift, eps)))
    return x


# -- initialization ------------------------------------------------------------------

def kaiming_normal(rng: np.random.Generator, fan_in: int, shape, gain: float = math.sqrt(2.0)) -> np.ndarray:
    """He initialization in fan-in mode: N(0, gain² / fan_in)."""
    return rng.normal(0.0, gain / math.sqrt(fan_in), size=shape)


def init_motion_block(
    seed: int,
    d_model: int = 8,
    d_text: int = 8,
    pretrained: Mapping[str, np.ndarray] | None = None,
    heads: int = 8,
    target: tuple[int, int] = (2, 2),
    zero_init_output: bool = True,
    dtype=np.float32,
) -> MotionBlockParams:
    """Fresh block parameters.

    Temporal layers take ``motion.temporal{1,2}.*`` entries from
    ``pretrained`` when present. Everything else gets Kaiming weights. With
    ``zero_init_output`` the output projection of every layer that was not
    loaded is zeroed, which makes the fresh block the identity map.
    """
    if heads < 1 or d_model % heads:
        raise InvalidArgumentError(f"d_model {d_model} not divisible by heads {heads}")
    pretrained = pretrained or {}
    rng = np.random.default_rng(seed)
    layers = {}
    for layer in LAYERS:
        d_in = d_text if layer == "cross" else d_model
        mats = {}
        for m in MATRICES:
            fan_in = d_in if m in ("wk", "wv") else d_model
            shape = (fan_in, d_model)
            # always draw so the stream does not depend on which entries load
            drawn = kaiming_normal(rng, fan_in, shape)
            key = f"{PREFIX}.{layer}.{m}"
            if layer.startswith("temporal") and key in pretrained:
                loaded = np.asarray(pretrained[key])
                if loaded.shape != shape:
                    raise LoadError(key, f"checkpoint shape {loaded.shape} != expected {shape}")
                mats[m] = Tensor(loaded.astype(dtype, copy=False))
                continue
            if m == "wo" and zero_init_output:
                drawn = np.zeros(shape)
            mats[m] = Tensor(drawn, dtype=dtype)
        layers[layer] = AttentionParams(heads=heads, **mats)
    norms = {name: (Tensor(np.ones(d_model), dtype=dtype), Tensor(np.zeros(d_model), dtype=dtype)) for name in LAYERS}
    return MotionBlockParams(target=tuple(target), norms=norms, **layers)


# -- cost accounting -------------------------------------------------------------------

@dataclass(frozen=True)
class CostRow:
    attention: str
    seq_len: int
    key_len: int
    maps: int
    map_elements: int


@dataclass(frozen=True)
class CostReport:
    rows: tuple[CostRow, ...]
    dga_reduction: Fraction
    cross_quoted_naive: int
    cross_quoted_reduced: int
    cross_standard: int

    def row(self, name: str) -> CostRow:
        return next(r for r in self.rows if r.attention == name)

    def format(self) -> str:
        lines = [f"{'attention':<16}{'seq_len':>10}{'key_len':>10}{'maps':>8}{'map_elements':>16}"]
        for r in self.rows:
            lines.append(f"{r.attention:<16}{r.seq_len:>10}{r.key_len:>10}{r.maps:>8}{r.map_elements:>16}")
        lines.append(f"dga vs global map reduction: {float(self.dga_reduction):g}x")
        lines.append(f"cross map, quoted formulas: {self.cross_quoted_naive} -> {self.cross_quoted_reduced}; "
                     f"queries x keys actually computed: {self.cross_standard}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        out = ["attention,seq_len,key_len,maps,map_elements"]
        out += [f"{r.attention},{r.seq_len},{r.key_len},{r.maps},{r.map_elements}" for r in self.rows]
        return "\n".join(out) + "\n"


def attention_cost_report(b: int, f: int, c: int, w1: int, h1: int, target, l_text: int, heads: int = 1) -> CostReport:
    """Attention-map sizes (elements, summed over batch and heads).

    The cross-attention figures are given twice: under the quoted
    ``(f*w1*h1*l_text)^2 -> (f*l_text)^2`` formulas, and as the
    ``queries x keys`` count this implementation materializes. The two do
    not describe the same quantity.
    """
    tw, th = (int(n) for n in target)
    if min(b, f, c, w1, h1, tw, th, l_text, heads) < 1:
        raise InvalidArgumentError("all dimensions must be positive")
    global_len = f * w1 * h1
    dga_len = f * tw * th
    rows = (
        CostRow("temporal", f, f, b * w1 * h1 * heads, b * w1 * h1 * heads * f * f),
        CostRow("global_naive", global_len, global_len, b * heads, b * heads * global_len ** 2),
        CostRow("dga", dga_len, dga_len, b * heads, b * heads * dga_len ** 2),
        CostRow("cross", dga_len, l_text, b * heads, b * heads * dga_len * l_text),
    )
    return CostReport(
        rows=rows,
        dga_reduction=Fraction(global_len ** 2, dga_len ** 2),
        cross_quoted_naive=(f * w1 * h1 * l_text) ** 2,
        cross_quoted_reduced=(f * l_text) ** 2,
        cross_standard=b * heads * dga_len * l_text,
    )
