"""Tensor engine: autodiff, operators, optimizers, rng."""

from maeeg.core.module import Module
from maeeg.core.ops import (
    concat,
    conv1d,
    cosine_similarity,
    cross_entropy,
    dropout,
    gelu,
    group_norm,
    layer_norm,
    linear,
    log_softmax,
    masked_fill,
    matmul,
    softmax,
)
from maeeg.core.optim import SGD, Adam, make_optimizer
from maeeg.core.rng import Rng, derive_seed
from maeeg.core.tensor import Parameter, Tensor, no_grad

__all__ = [
    "Adam", "Module", "Parameter", "Rng", "SGD", "Tensor", "concat", "conv1d",
    "cosine_similarity", "cross_entropy", "derive_seed", "dropout", "gelu",
    "group_norm", "layer_norm", "linear", "log_softmax", "make_optimizer",
    "masked_fill", "matmul", "no_grad", "softmax",
]
