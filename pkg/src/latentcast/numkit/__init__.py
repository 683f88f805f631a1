"""Dense tensors, reverse-mode autodiff, Adam, and the LTEN tensor format."""

from .gradcheck import grad_check
from .io import (
    TensorFormatError,
    checkpoint_checksum,
    file_sha256,
    load_checkpoint,
    load_tensor,
    note_read,
    register_read_listener,
    save_checkpoint,
    save_tensor,
    unregister_read_listener,
)
from .optim import OptimizerState, adam_step
from .tensor import (
    ShapeError,
    TapeNode,
    Tensor,
    add,
    attention,
    bce_with_logits,
    concat,
    div,
    embedding,
    exp,
    gelu,
    huber,
    index,
    layer_norm,
    log,
    matmul,
    mean_pool,
    mul,
    neg,
    no_grad,
    param,
    reduce_mean,
    reduce_sum,
    relu,
    reshape,
    sigmoid,
    softmax,
    softplus,
    sqrt,
    square,
    sub,
    tanh,
    tensor,
    transpose,
)

__all__ = [
    "Tensor",
    "TapeNode",
    "ShapeError",
    "TensorFormatError",
    "OptimizerState",
    "adam_step",
    "grad_check",
    "tensor",
    "param",
    "no_grad",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "square",
    "exp",
    "log",
    "sqrt",
    "sigmoid",
    "tanh",
    "gelu",
    "relu",
    "softplus",
    "reshape",
    "transpose",
    "index",
    "concat",
    "reduce_sum",
    "reduce_mean",
    "mean_pool",
    "matmul",
    "softmax",
    "layer_norm",
    "embedding",
    "attention",
    "huber",
    "bce_with_logits",
    "save_tensor",
    "load_tensor",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_checksum",
    "file_sha256",
    "register_read_listener",
    "unregister_read_listener",
    "note_read",
]
