"""Minimal dense-tensor arithmetic with reverse-mode gradients and a seedable RNG."""

from .gradcheck import finite_difference_check
from .rng import Rng
from .tensor import (
    GraphError,
    ShapeError,
    Tensor,
    add,
    as_tensor,
    backward,
    clamp,
    concat,
    cumsum_last,
    div,
    exp,
    expand_last,
    gammaln,
    log,
    log1p,
    logsumexp_last,
    matmul,
    maximum,
    mul,
    neg,
    no_grad,
    power,
    reshape,
    sigmoid,
    silu,
    softmax_last,
    softplus,
    sqrt,
    sub,
    swap_last,
    tmean,
    transpose,
    tslice,
    tsum,
    where,
)

__all__ = [
    "GraphError",
    "Rng",
    "ShapeError",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "clamp",
    "concat",
    "cumsum_last",
    "div",
    "exp",
    "expand_last",
    "finite_difference_check",
    "gammaln",
    "log",
    "log1p",
    "logsumexp_last",
    "matmul",
    "maximum",
    "mul",
    "neg",
    "no_grad",
    "power",
    "reshape",
    "sigmoid",
    "silu",
    "softmax_last",
    "softplus",
    "sqrt",
    "sub",
    "swap_last",
    "tmean",
    "transpose",
    "tslice",
    "tsum",
    "where",
]
