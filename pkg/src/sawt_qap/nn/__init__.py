"""From-scratch neural building blocks: autodiff tensors, Adam, checkpoints."""

from .checkpoint import FORMAT_VERSION, MAGIC, load_checkpoint, save_checkpoint
from .optim import Adam
from .tensor import (
    Tensor,
    add,
    broadcast_to,
    concat,
    div,
    exp,
    fd_gradient,
    gradcheck,
    is_grad_enabled,
    layer_norm,
    linear,
    log,
    matmul,
    mean,
    mul,
    neg,
    no_grad,
    permute_rows,
    power,
    relu,
    reshape,
    softmax,
    sqrt,
    stack,
    sub,
    take_rows,
    tensor_max,
    tensor_sum,
    transpose,
    xlogx,
)

__all__ = [
    "Adam",
    "FORMAT_VERSION",
    "MAGIC",
    "Tensor",
    "add",
    "broadcast_to",
    "concat",
    "div",
    "exp",
    "fd_gradient",
    "gradcheck",
    "is_grad_enabled",
    "layer_norm",
    "linear",
    "load_checkpoint",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "permute_rows",
    "power",
    "relu",
    "reshape",
    "save_checkpoint",
    "softmax",
    "sqrt",
    "stack",
    "sub",
    "take_rows",
    "tensor_max",
    "tensor_sum",
    "transpose",
    "xlogx",
]
