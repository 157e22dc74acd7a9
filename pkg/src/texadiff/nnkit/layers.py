"""Thin layer wrappers that register their weights with a ParameterSet."""

from __future__ import annotations

import numpy as np

from . import ops
from .optim import ParameterSet
from .tensor import Tensor


class Conv2d:
    def __init__(
        self,
        ps: ParameterSet,
        name: str,
        cin: int,
        cout: int,
        k: int = 3,
        stride: int = 1,
        padding: int | None = None,
        rng: np.random.Generator | None = None,
        zero_init: bool = False,
    ):
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        if zero_init:
            w = np.zeros((cout, cin, k, k))
        else:
            bound = 1.0 / np.sqrt(cin * k * k)
            w = rng.uniform(-bound, bound, size=(cout, cin, k, k))
        self.w = ps.add(f"{name}.w", w)
        self.b = ps.add(f"{name}.b", np.zeros(cout))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.w, self.b, self.stride, self.padding)


class Linear:
    def __init__(
        self,
        ps: ParameterSet,
        name: str,
        din: int,
        dout: int,
        rng: np.random.Generator | None = None,
        zero_init: bool = False,
    ):
        if zero_init:
            w = np.zeros((din, dout))
        else:
            bound = 1.0 / np.sqrt(din)
            w = rng.uniform(-bound, bound, size=(din, dout))
        self.w = ps.add(f"{name}.w", w)
        self.b = ps.add(f"{name}.b", np.zeros(dout))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.w, self.b)


class GroupNorm:
    def __init__(self, ps: ParameterSet, name: str, channels: int, groups: int = 8):
        self.groups = min(groups, channels)
        while channels % self.groups:
            self.groups -= 1
        self.gamma = ps.add(f"{name}.gamma", np.ones(channels))
        self.beta = ps.add(f"{name}.beta", np.zeros(channels))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.group_norm(x, self.groups, self.gamma, self.beta)
