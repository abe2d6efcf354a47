"""Training region selection: scene filtering, phrase tracks, mask synthesis
and the three-way clip sampler."""
from .annotation import (
    DEFAULT_SCORE_THRESHOLD,
    DETECTION_RESOLUTION,
    Detection,
    DetectionAnnotation,
    Phrase,
    PhraseTrack,
    associate_tokenspan,
    iou,
)
from .masks import (
    DEFAULT_AREA,
    INSTANCE_STYLES,
    RANDOM_KINDS,
    box_footprint,
    rasterize_box,
    read_mask_frames,
    read_pgm,
    synthesize_instance_mask,
    synthesize_random_mask,
    write_mask_frames,
    write_pgm,
)
from .sampling import DEFAULT_PROBS, KINDS, ClipSample, kind_frequencies, sample_training_clip
from .scenes import DEFAULT_THRESHOLD, SceneReport, detect_scene_cuts

__all__ = [
    "DEFAULT_SCORE_THRESHOLD", "DETECTION_RESOLUTION", "Detection", "DetectionAnnotation", "Phrase",
    "PhraseTrack", "associate_tokenspan", "iou", "DEFAULT_AREA", "INSTANCE_STYLES", "RANDOM_KINDS",
    "box_footprint", "rasterize_box", "read_mask_frames", "read_pgm", "synthesize_instance_mask",
    "synthesize_random_mask", "write_mask_frames", "write_pgm", "DEFAULT_PROBS", "KINDS", "ClipSample",
    "kind_frequencies", "sample_training_clip", "DEFAULT_THRESHOLD", "SceneReport", "detect_scene_cuts",
]
