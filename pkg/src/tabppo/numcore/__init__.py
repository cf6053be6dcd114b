"""Numerical core: float64 tensors with reverse-mode autodiff and the
kernel backend (compiled extension or numpy fallback)."""

from .kernels import BACKEND, get_backend
from .tensor import (
    DimensionError,
    NumericalError,
    Tensor,
    add,
    check_finite,
    clip,
    concat,
    div,
    exp,
    gather_index,
    gather_rows,
    init_uniform,
    layer_norm,
    log,
    matmul,
    mean,
    minimum,
    mul,
    neg,
    no_grad,
    permute,
    relu,
    reshape,
    scale,
    softmax,
    square,
    sub,
    tensor,
    total,
    zeros,
)

__all__ = [
    "BACKEND",
    "DimensionError",
    "NumericalError",
    "Tensor",
    "add",
    "check_finite",
    "clip",
    "concat",
    "div",
    "exp",
    "gather_index",
    "gather_rows",
    "get_backend",
    "init_uniform",
    "layer_norm",
    "log",
    "matmul",
    "mean",
    "minimum",
    "mul",
    "neg",
    "no_grad",
    "permute",
    "relu",
    "reshape",
    "scale",
    "softmax",
    "square",
    "sub",
    "tensor",
    "total",
    "zeros",
]
