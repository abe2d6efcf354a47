"""Checkpoint codec and task-vector merging of inpainting and personalized
image models."""
from .analysis import (
    DEFAULT_REGION_RULES,
    DEFAULT_TYPE_RULES,
    LAYER_TYPES,
    REGIONS,
    LayerClassifier,
    SimilarityReport,
    SimilarityRow,
    SweepCell,
    SweepResult,
    cosine_similarity,
    default_grid,
    frobenius_evaluator,
    layer_similarity_report,
    sensitivity_sweep,
)
from .arithmetic import (
    ALPHA_RANGE,
    BETA_RANGE,
    KeyReport,
    MergeRecipe,
    MergeResult,
    RecipeRangeWarning,
    TaskVector,
    merge,
    merge_from_models,
    pad_input_channels,
    task_vector,
)
from .checkpoint import MAGIC, Checkpoint, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint

__all__ = [
    "DEFAULT_REGION_RULES", "DEFAULT_TYPE_RULES", "LAYER_TYPES", "REGIONS", "LayerClassifier",
    "SimilarityReport", "SimilarityRow", "SweepCell", "SweepResult", "cosine_similarity", "default_grid",
    "frobenius_evaluator", "layer_similarity_report", "sensitivity_sweep", "ALPHA_RANGE", "BETA_RANGE",
    "KeyReport", "MergeRecipe", "MergeResult", "RecipeRangeWarning", "TaskVector", "merge",
    "merge_from_models", "pad_input_channels", "task_vector", "MAGIC", "Checkpoint", "decode_checkpoint",
    "encode_checkpoint", "load_checkpoint", "save_checkpoint",
]
