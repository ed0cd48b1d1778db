"""Minimal reverse-mode autodiff: enough to train and verify the vocoder."""

from .tensor import (
    Parameter,
    Tensor,
    abs_,
    add,
    clamp,
    concat,
    cos,
    dilate,
    div,
    exp,
    flip,
    gelu,
    layer_norm,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    no_grad,
    pad,
    reflect_pad_last,
    relu,
    reshape,
    sin,
    sqrt,
    sub,
    sum_,
    swapaxes,
    take,
    tanh,
)
from .conv import conv1d, conv2d, conv_transpose1d
from .spectral import frame_signal, irdft, overlap_add, rdft
from .gradcheck import finite_difference_check

__all__ = [
    "Parameter",
    "Tensor",
    "abs_",
    "add",
    "clamp",
    "concat",
    "conv1d",
    "conv2d",
    "conv_transpose1d",
    "cos",
    "dilate",
    "div",
    "exp",
    "finite_difference_check",
    "flip",
    "frame_signal",
    "gelu",
    "irdft",
    "layer_norm",
    "leaky_relu",
    "log",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "overlap_add",
    "pad",
    "rdft",
    "reflect_pad_last",
    "relu",
    "reshape",
    "sin",
    "sqrt",
    "sub",
    "sum_",
    "swapaxes",
    "take",
    "tanh",
]
