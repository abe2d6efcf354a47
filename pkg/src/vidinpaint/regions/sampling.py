"""Three-way training clip sampler: precise, random or null-prompt."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..diffusion.conditioning import MaskSequence
from ..errors import EmptyAssociationError, InvalidArgumentError
from .annotation import DEFAULT_SCORE_THRESHOLD, DetectionAnnotation, associate_tokenspan
from .masks import INSTANCE_STYLES, synthesize_instance_mask, synthesize_random_mask

KINDS = ("precise", "random", "null_prompt")
DEFAULT_PROBS = (0.7, 0.2, 0.1)


@dataclass(frozen=True)
class ClipSample:
    kind: str
    masks: MaskSequence
    prompt: str
    phrase: str | None = None       # set iff kind == "precise"
    drawn_kind: str | None = None   # what the categorical draw asked for
    boxes: tuple | None = None

    @property
    def fell_back(self) -> bool:
        return self.drawn_kind is not None and self.drawn_kind != self.kind


def _validate_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != (3,) or (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError(f"probs must be three nonnegative numbers summing to 1, got {probs}")
    return p


def _clip_dims(frames) -> tuple[int, int, int]:
    if isinstance(frames, tuple) and len(frames) == 3 and all(isinstance(v, int) for v in frames):
        return frames
    shape = getattr(frames, "shape", None)
    if shape is None or len(shape) != 4:
        raise InvalidArgumentError("frames must be a [f, c, w, h] array or an (f, w, h) tuple")
    return shape[0], shape[2], shape[3]


def sample_training_clip(
    ann: DetectionAnnotation | None,
    frames,
    rng: np.random.Generator,
    probs=DEFAULT_PROBS,
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
    style: str | None = None,
) -> ClipSample:
    """Draw a kind, then build its mask and prompt.

    ``precise`` picks one associated phrase and covers its track; when
    association fails the sample degrades to ``random`` and keeps the drawn
    kind in ``drawn_kind``. ``null_prompt`` uses a random mask and an empty
    prompt.
    """
    p = _validate_probs(probs)
    f, w, h = _clip_dims(frames)
    drawn = KINDS[int(np.searchsorted(np.cumsum(p), rng.random(), side="right").clip(0, 2))]
    prompt = ann.prompt if ann is not None else ""
    if drawn == "precise":
        try:
            if ann is None:
                raise EmptyAssociationError("no annotation")
            tracks = associate_tokenspan(ann, score_threshold)
            track = list(tracks.values())[int(rng.integers(len(tracks)))]
            boxes = (track.boxes + (track.boxes[-1],) * f)[:f]
            st = style or INSTANCE_STYLES[int(rng.integers(len(INSTANCE_STYLES)))]
            m = synthesize_instance_mask(boxes, (w, h), rng, st)
            return ClipSample("precise", MaskSequence.from_array(m), prompt, track.text, drawn, boxes)
        except EmptyAssociationError:
            m = synthesize_random_mask((w, h), f, rng)
            return ClipSample("random", MaskSequence.from_array(m), prompt, None, drawn)
    m = synthesize_random_mask((w, h), f, rng)
    return ClipSample(drawn, MaskSequence.from_array(m), "" if drawn == "null_prompt" else prompt, None, drawn)


def kind_frequencies(samples) -> dict[str, float]:
    n = len(samples)
    return {k: sum(s.kind == k for s in samples) / n for k in KINDS} if n else {k: math.nan for k in KINDS}
