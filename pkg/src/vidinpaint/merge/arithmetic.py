"""Channel padding, task vectors and the alpha/beta blend."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import InvalidArgumentError, InvalidShapeError, MergeError
from .checkpoint import Checkpoint

ALPHA_RANGE = (0.5, 1.5)
BETA_RANGE = (1.0, 2.0)


class RecipeRangeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MergeRecipe:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise InvalidArgumentError(f"alpha and beta must be finite, got {self.alpha}, {self.beta}")

    @property
    def in_recommended_range(self) -> bool:
        return ALPHA_RANGE[0] <= self.alpha <= ALPHA_RANGE[1] and BETA_RANGE[0] <= self.beta <= BETA_RANGE[1]


@dataclass(frozen=True)
class KeyReport:
    """Names present on only one side of a pairwise operation."""

    only_left: tuple[str, ...] = ()
    only_right: tuple[str, ...] = ()

    @property
    def clean(self) -> bool:
        return not self.only_left and not self.only_right

    def lines(self, left: str = "left", right: str = "right") -> list[str]:
        return [f"{left}\t{k}" for k in self.only_left] + [f"{right}\t{k}" for k in self.only_right]


def _key_report(a: Mapping, b: Mapping) -> KeyReport:
    return KeyReport(tuple(k for k in a if k not in b), tuple(k for k in b if k not in a))


@dataclass(frozen=True)
class TaskVector:
    deltas: Checkpoint
    unmatched: KeyReport = field(default_factory=KeyReport)


def pad_input_channels(ckpt: Checkpoint, layer: str, from_channels: int = 4, to_channels: int = 9, axis: int = 1) -> Checkpoint:
    """Zero-extend the input-channel axis of one weight; everything else is untouched."""
    if layer not in ckpt:
        raise MergeError(layer, "no such tensor to pad")
    w = ckpt[layer]
    if w.ndim <= axis or w.shape[axis] != from_channels:
        raise InvalidShapeError(f"{layer}: expected {from_channels} channels on axis {axis}, got shape {w.shape}")
    if to_channels < from_channels:
        raise InvalidArgumentError("to_channels must be >= from_channels")
    pad = [(0, 0)] * w.ndim
    pad[axis] = (0, to_channels - from_channels)
    return ckpt.with_tensors({layer: np.pad(w, pad)})


def task_vector(a: Checkpoint, b: Checkpoint) -> TaskVector:
    """``a - b`` over the shared names; the rest is reported, never dropped silently."""
    deltas = {}
    for k in a:
        if k in b:
            if a[k].shape != b[k].shape:
                raise MergeError(k, f"shape {a[k].shape} vs {b[k].shape}")
            deltas[k] = (a[k].astype(np.float64) - b[k].astype(np.float64)).astype(np.float32)
    return TaskVector(Checkpoint(deltas), _key_report(a, b))


@dataclass(frozen=True)
class MergeResult:
    checkpoint: Checkpoint
    unmatched_ip: KeyReport
    unmatched_p: KeyReport

    def report_lines(self) -> list[str]:
        out = []
        for side, rep in (("inpaint", self.unmatched_ip), ("personalized", self.unmatched_p)):
            out += [f"base_only\t{side}\t{k}" for k in rep.only_left]
            out += [f"delta_only\t{side}\t{k}" for k in rep.only_right]
        return out


def merge(base: Checkpoint, tau_ip, tau_p, recipe: MergeRecipe) -> MergeResult:
    """``base + alpha * tau_ip + beta * tau_p`` per tensor, in float64.

    Tensors of ``base`` without a delta pass through; delta names absent
    from ``base`` are reported.
    """
    tau_ip = tau_ip.deltas if isinstance(tau_ip, TaskVector) else tau_ip
    tau_p = tau_p.deltas if isinstance(tau_p, TaskVector) else tau_p
    if not recipe.in_recommended_range:
        warnings.warn(f"alpha={recipe.alpha}, beta={recipe.beta} outside recommended ranges "
                      f"{ALPHA_RANGE} / {BETA_RANGE}", RecipeRangeWarning, stacklevel=2)
    out = {}
    for k, theta in base.items():
        acc = theta.astype(np.float64)
        for tau, coef in ((tau_ip, recipe.alpha), (tau_p, recipe.beta)):
            if k in tau:
                if tau[k].shape != theta.shape:
                    raise MergeError(k, f"delta shape {tau[k].shape} vs base {theta.shape}")
                acc = acc + coef * tau[k].astype(np.float64)
        out[k] = acc.astype(np.float32)
    return MergeResult(Checkpoint(out), _key_report(base, tau_ip), _key_report(base, tau_p))


def merge_from_models(base: Checkpoint, inpaint: Checkpoint, personalized: Checkpoint, recipe: MergeRecipe) -> MergeResult:
    """Task vectors against ``base`` followed by :func:`merge`."""
    return merge(base, task_vector(inpaint, base), task_vector(personalized, base), recipe)
