from .tensor import Tensor, concat, no_grad
from .ops import (
    activation,
    avg_pool2d,
    conv2d,
    group_norm,
    linear,
    nearest_upsample,
    timestep_embedding,
)
from .optim import AdamState, ParameterSet, adam_step, grad_check
from .layers import Conv2d, GroupNorm, Linear

__all__ = [
    "AdamState",
    "Conv2d",
    "GroupNorm",
    "Linear",
    "ParameterSet",
    "Tensor",
    "activation",
    "adam_step",
    "avg_pool2d",
    "concat",
    "conv2d",
    "grad_check",
    "group_norm",
    "linear",
    "nearest_upsample",
    "no_grad",
    "timestep_embedding",
]
