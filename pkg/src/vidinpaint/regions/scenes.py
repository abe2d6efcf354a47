"""Hard-cut detection by mean absolute frame difference."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError, InvalidShapeError
from ..tensor import Tensor

DEFAULT_THRESHOLD = 20.0


@dataclass(frozen=True)
class SceneReport:
    cuts: tuple[int, ...]   # frame index where a new scene starts
    frames: int
    diffs: tuple[float, ...] = ()  # diffs[i] compares frame i+1 with frame i

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.cuts, self.cuts[1:])):
            raise InvalidArgumentError("cuts must be strictly increasing")
        if any(not 0 < c < self.frames for c in self.cuts):
            raise InvalidArgumentError("cut index outside the clip")

    @property
    def single_scene(self) -> bool:
        return not self.cuts

    def segments(self) -> list[tuple[int, int]]:
        bounds = [0, *self.cuts, self.frames]
        return list(zip(bounds, bounds[1:]))


def detect_scene_cuts(frames, threshold: float = DEFAULT_THRESHOLD, value_max: float = 255.0) -> SceneReport:
    """Cut before frame ``i`` when the mean absolute difference to frame
    ``i - 1`` strictly exceeds ``threshold`` on the 0-255 scale.

    ``value_max`` is the white level of the input (255 for 8-bit frames,
    1 for normalized ones).
    """
    arr = frames.data if isinstance(frames, Tensor) else np.asarray(frames)
    if arr.ndim < 2 or arr.shape[0] < 1:
        raise InvalidShapeError(f"expected [f, ...] frames, got shape {arr.shape}")
    if value_max <= 0:
        raise InvalidArgumentError("value_max must be positive")
    f = arr.shape[0]
    flat = arr.reshape(f, -1).astype(np.float64) * (255.0 / value_max)
    diffs = np.abs(np.diff(flat, axis=0)).mean(axis=1) if f > 1 else np.empty(0)
    cuts = tuple(int(i) + 1 for i in np.nonzero(diffs > threshold)[0])
    return SceneReport(cuts, f, tuple(float(d) for d in diffs))
