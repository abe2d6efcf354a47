"""Phrase-grounded detection records and their association into tracks."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import EmptyAssociationError, FormatError, InvalidArgumentError

DEFAULT_SCORE_THRESHOLD = 0.2
DETECTION_RESOLUTION = (396, 512)
SAME_OBJECT_IOU = 0.9

Box = tuple[float, float, float, float]


@dataclass(frozen=True)
class Phrase:
    text: str
    span: tuple[int, int]   # [start, end) token indices into the prompt


@dataclass(frozen=True)
class Detection:
    phrase: int
    box: Box
    score: float


def validate_box(box, where: str = "box") -> Box:
    try:
        x0, y0, x1, y1 = (float(v) for v in box)
    except (TypeError, ValueError) as exc:
        raise FormatError(where, "expected four numbers") from exc
    if not (0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0):
        raise FormatError(where, f"need 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1, got {box}")
    return (x0, y0, x1, y1)


def iou(a: Box, b: Box) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class DetectionAnnotation:
    prompt: str
    phrases: tuple[Phrase, ...]
    frames: tuple[tuple[Detection, ...], ...]
    resolution: tuple[int, int] = DETECTION_RESOLUTION  # metadata only

    def __post_init__(self):
        n_tokens = len(self.prompt.split())
        taken: set[int] = set()
        for i, ph in enumerate(self.phrases):
            start, end = ph.span
            if not 0 <= start < end <= n_tokens:
                raise FormatError(f"phrases[{i}].span", f"{ph.span} outside prompt tokens [0, {n_tokens})")
            tokens = set(range(start, end))
            if tokens & taken:
                raise FormatError(f"phrases[{i}].span", "overlaps another phrase")
            taken |= tokens
        for fi, dets in enumerate(self.frames):
            for di, det in enumerate(dets):
                where = f"frames[{fi}][{di}]"
                if not 0 <= det.phrase < len(self.phrases):
                    raise FormatError(f"{where}.phrase", f"unknown phrase index {det.phrase}")
                validate_box(det.box, f"{where}.box")
                if not 0.0 <= det.score <= 1.0:
                    raise FormatError(f"{where}.score", f"{det.score} outside [0, 1]")

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    @classmethod
    def from_dict(cls, obj: Any) -> "DetectionAnnotation":
        if not isinstance(obj, dict):
            raise FormatError("root", "expected a JSON object")
        prompt = obj.get("prompt")
        if not isinstance(prompt, str):
            raise FormatError("prompt", "missing or not a string")
        raw_phrases = obj.get("phrases")
        if not isinstance(raw_phrases, list):
            raise FormatError("phrases", "missing or not a list")
        phrases = []
        for i, p in enumerate(raw_phrases):
            try:
                span = p["span"]
                phrases.append(Phrase(str(p["text"]), (int(span[0]), int(span[1]))))
            except (KeyError, TypeError, ValueError, IndexError) as exc:
                raise FormatError(f"phrases[{i}]", "expected {text, span: [start, end]}") from exc
        by_text = {p.text: i for i, p in enumerate(phrases)}
        raw_frames = obj.get("frames")
        if not isinstance(raw_frames, list):
            raise FormatError("frames", "missing or not a list")
        frames = []
        for fi, dets in enumerate(raw_frames):
            if not isinstance(dets, list):
                raise FormatError(f"frames[{fi}]", "expected a list of detections")
            parsed = []
            for di, d in enumerate(dets):
                where = f"frames[{fi}][{di}]"
                if not isinstance(d, dict) or not {"phrase", "box", "score"} <= d.keys():
                    raise FormatError(where, "expected {phrase, box, score}")
                ref = d["phrase"]
                if isinstance(ref, str):
                    if ref not in by_text:
                        raise FormatError(f"{where}.phrase", f"unknown phrase {ref!r}")
                    ref = by_text[ref]
                elif isinstance(ref, bool) or not isinstance(ref, int):
                    raise FormatError(f"{where}.phrase", "expected phrase index or text")
                try:
                    score = float(d["score"])
                except (TypeError, ValueError) as exc:
                    raise FormatError(f"{where}.score", "not a number") from exc
                parsed.append(Detection(ref, validate_box(d["box"], f"{where}.box"), score))
            frames.append(tuple(parsed))
        res = obj.get("resolution", DETECTION_RESOLUTION)
        return cls(prompt, tuple(phrases), tuple(frames), (int(res[0]), int(res[1])))

    @classmethod
    def load(cls, path) -> "DetectionAnnotation":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError("json", str(exc)) from exc
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "phrases": [{"text": p.text, "span": list(p.span)} for p in self.phrases],
            "frames": [[{"phrase": d.phrase, "box": list(d.box), "score": d.score} for d in dets]
                       for dets in self.frames],
            "resolution": list(self.resolution),
        }


@dataclass(frozen=True)
class PhraseTrack:
    phrase: int
    text: str
    boxes: tuple[Box, ...]                          # one per frame
    inherited: tuple[bool, ...] = field(default=())  # True where carried forward


def _best_per_phrase(dets, allowed: set[int], threshold: float) -> dict[int, Detection]:
    best: dict[int, Detection] = {}
    for d in dets:
        if d.phrase in allowed and d.score >= threshold:
            cur = best.get(d.phrase)
            if cur is None or d.score > cur.score:
                best[d.phrase] = d
    # one object, one phrase: among near-identical boxes keep the strongest
    order = sorted(best.values(), key=lambda d: (-d.score, d.phrase))
    kept: list[Detection] = []
    for d in order:
        if all(iou(d.box, k.box) < SAME_OBJECT_IOU for k in kept):
            kept.append(d)
    return {d.phrase: d for d in kept}


def associate_tokenspan(ann: DetectionAnnotation, score_threshold: float = DEFAULT_SCORE_THRESHOLD) -> dict[int, PhraseTrack]:
    """Per-phrase box tracks over the whole clip.

    The phrase set is fixed by frame 0. Later detections count only for
    those phrases and only at ``score >= score_threshold``; a frame without
    one repeats the phrase's previous box.
    """
    if not 0.0 <= score_threshold <= 1.0:
        raise InvalidArgumentError("score_threshold must lie in [0, 1]")
    if not ann.frames:
        raise EmptyAssociationError("annotation has no frames")
    first = _best_per_phrase(ann.frames[0], set(range(len(ann.phrases))), score_threshold)
    if not first:
        raise EmptyAssociationError(f"no first-frame phrase scores >= {score_threshold}")
    frozen = set(first)
    boxes = {p: [first[p].box] for p in frozen}
    inherited = {p: [False] for p in frozen}
    for dets in ann.frames[1:]:
        found = _best_per_phrase(dets, frozen, score_threshold)
        for p in frozen:
            if p in found:
                boxes[p].append(found[p].box)
                inherited[p].append(False)
            else:
                boxes[p].append(boxes[p][-1])
                inherited[p].append(True)
    return {p: PhraseTrack(p, ann.phrases[p].text, tuple(boxes[p]), tuple(inherited[p])) for p in sorted(frozen)}
