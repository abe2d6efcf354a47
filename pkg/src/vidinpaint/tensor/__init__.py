"""Dense tensor, gradient tape and differentiable primitives."""
from .core import Node, Tape, Tensor, backward, current_tape
from .gradcheck import finite_diff_grad, relative_error
from .ops import (
    add,
    as_tensor,
    concat,
    expand,
    layer_norm,
    matmul,
    mean,
    mse,
    mul,
    permute,
    reshape_view,
    scale,
    scaled_dot_attention,
    slice_axis,
    softmax,
    spatial_resize,
    square,
    sub,
    sum,
)

__all__ = [
    "Node", "Tape", "Tensor", "backward", "current_tape", "finite_diff_grad", "relative_error",
    "add", "as_tensor", "concat", "expand", "layer_norm", "matmul", "mean", "mse", "mul", "permute",
    "reshape_view", "scale", "scaled_dot_attention", "slice_axis", "softmax", "spatial_resize",
    "square", "sub", "sum",
]
