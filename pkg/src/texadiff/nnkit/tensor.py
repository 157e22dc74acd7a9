"""Reverse-mode autodiff over dense numpy arrays.

Each forward op records a backward closure on its output; ``backward()`` on a
scalar walks the tape in reverse topological order. Tensors participating in
gradients are never mutated in place. float64 throughout.
"""

from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Suppress tape recording (inference / finite-difference probes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward op."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 4:
            raise ValueError(f"tensors support at most 4 dims, got {arr.ndim}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents: tuple = ()

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def item(self) -> float:
        if self.size != 1:
            raise ValueError("item() needs a single-element tensor")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    # -- graph construction ------------------------------------------------

    @staticmethod
    def _track(out: "Tensor", parents: tuple, backward) -> "Tensor":
        if _grad_enabled and any(
            p.requires_grad or p._parents for p in parents if isinstance(p, Tensor)
        ):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    def backward(self):
        if self.size != 1:
            raise ValueError("backward() starts from a scalar")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if isinstance(p, Tensor) and id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic ---------------------------------------------

    @staticmethod
    def _coerce(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def __add__(self, other):
        a, b = self, Tensor._coerce(other)
        out = Tensor(a.data + b.data)

        def backward(g):
            a._accumulate(_unbroadcast(g, a.shape))
            b._accumulate(_unbroadcast(g, b.shape))

        return Tensor._track(out, (a, b), backward)

    __radd__ = __add__

    def __neg__(self):
        a = self
        out = Tensor(-a.data)

        def backward(g):
            a._accumulate(-g)

        return Tensor._track(out, (a,), backward)

    def __sub__(self, other):
        return self + (-Tensor._coerce(other))

    def __rsub__(self, other):
        return Tensor._coerce(other) + (-self)

    def __mul__(self, other):
        a, b = self, Tensor._coerce(other)
        out = Tensor(a.data * b.data)

        def backward(g):
            a._accumulate(_unbroadcast(g * b.data, a.shape))
            b._accumulate(_unbroadcast(g * a.data, b.shape))

        return Tensor._track(out, (a, b), backward)

    __rmul__ = __mul__

    def __pow__(self, exponent: float):
        a = self
        out = Tensor(a.data**exponent)

        def backward(g):
            a._accumulate(g * exponent * a.data ** (exponent - 1))

        return Tensor._track(out, (a,), backward)

    def __truediv__(self, other):
        return self * (Tensor._coerce(other) ** -1.0)

    def __rtruediv__(self, other):
        return Tensor._coerce(other) * (self**-1.0)

    # -- shape ops -----------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        out = Tensor(a.data.reshape(shape))

        def backward(g):
            a._accumulate(g.reshape(a.shape))

        return Tensor._track(out, (a,), backward)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        a = self
        out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

        def backward(g):
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.shape).copy())
                return
            if not keepdims:
                axes = axis if isinstance(axis, tuple) else (axis,)
                for ax in sorted(_normalize_axes(axes, a.data.ndim)):
                    g = np.expand_dims(g, ax)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

        return Tensor._track(out, (a,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        total = self.data.size if axis is None else _axis_count(self.shape, axis)
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / total)

    def transpose2d(self) -> "Tensor":
        a = self
        out = Tensor(a.data.T)

        def backward(g):
            a._accumulate(g.T)

        return Tensor._track(out, (a,), backward)

    # -- matmul / activations --------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        a, b = self, Tensor._coerce(other)
        out = Tensor(a.data @ b.data)

        def backward(g):
            a._accumulate(g @ b.data.T)
            b._accumulate(a.data.T @ g)

        return Tensor._track(out, (a, b), backward)

    __matmul__ = matmul

    def abs(self) -> "Tensor":
        a = self
        out = Tensor(np.abs(a.data))
        sign = np.sign(a.data)  # subgradient 0 at 0

        def backward(g):
            a._accumulate(g * sign)

        return Tensor._track(out, (a,), backward)

    def relu(self) -> "Tensor":
        a = self
        mask = a.data > 0
        out = Tensor(np.where(mask, a.data, 0.0))

        def backward(g):
            a._accumulate(g * mask)

        return Tensor._track(out, (a,), backward)

    def sigmoid(self) -> "Tensor":
        a = self
        y = _stable_sigmoid(a.data)
        out = Tensor(y)

        def backward(g):
            a._accumulate(g * y * (1.0 - y))

        return Tensor._track(out, (a,), backward)

    def silu(self) -> "Tensor":
        a = self
        s = _stable_sigmoid(a.data)
        out = Tensor(a.data * s)

        def backward(g):
            a._accumulate(g * (s + a.data * s * (1.0 - s)))

        return Tensor._track(out, (a,), backward)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _normalize_axes(axes, ndim: int) -> tuple:
    return tuple(ax % ndim for ax in axes)


def _axis_count(shape: tuple, axis) -> int:
    axes = axis if isinstance(axis, tuple) else (axis,)
    n = 1
    for ax in axes:
        n *= shape[ax % len(shape)]
    return n


def concat(tensors: list, axis: int = 1) -> Tensor:
    arrs = [t.data for t in tensors]
    out = Tensor(np.concatenate(arrs, axis=axis))
    sizes = [a.shape[axis] for a in arrs]

    def backward(g):
        start = 0
        for t, n in zip(tensors, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + n)
            t._accumulate(g[tuple(sl)])
            start += n

    return Tensor._track(out, tuple(tensors), backward)
