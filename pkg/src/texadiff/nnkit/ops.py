"""Network building-block ops: convolution, pooling, normalization, embeddings.

Convolution is cross-correlation (no kernel flip), computed via im2col with
a col2im scatter-add backward. Spatial tensors are (N, C, H, W).
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor
from ..errors import DimensionError, NumericError

GROUP_NORM_EPS = 1e-5
CROSS_NORM_EPS = 1e-5


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    n, c, h, w = x.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise DimensionError(f"kernel {kh}x{kw} too large for input {h}x{w}")
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[
                :, :, i : i + oh * stride : stride, j : j + ow * stride : stride
            ]
    return cols.reshape(n, c * kh * kw, oh * ow), oh, ow


def _col2im(dcols: np.ndarray, x_shape, kh, kw, stride, pad, oh, ow) -> np.ndarray:
    n, c, h, w = x_shape
    dxp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    dc = dcols.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride] += dc[
                :, :, i, j
            ]
    return dxp[:, :, pad : pad + h, pad : pad + w]


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise DimensionError("conv2d expects 4-D input and weight")
    if padding < 0 or stride < 1:
        raise ValueError("need padding >= 0 and stride >= 1")
    co, ci, kh, kw = w.shape
    if x.shape[1] != ci:
        raise DimensionError(f"input has {x.shape[1]} channels, weight expects {ci}")
    if b.shape != (co,):
        raise DimensionError(f"bias shape {b.shape} != ({co},)")
    n = x.shape[0]
    cols, oh, ow = _im2col(x.data, kh, kw, stride, padding)
    wflat = w.data.reshape(co, ci * kh * kw)
    flat = np.einsum("ok,nkp->nop", wflat, cols, optimize=True) + b.data[None, :, None]
    out = Tensor(flat.reshape(n, co, oh, ow))

    def backward(g):
        gflat = g.reshape(n, co, oh * ow)
        w._accumulate(
            np.einsum("nop,nkp->ok", gflat, cols, optimize=True).reshape(w.shape)
        )
        b._accumulate(gflat.sum(axis=(0, 2)))
        dcols = np.einsum("ok,nop->nkp", wflat, gflat, optimize=True)
        x._accumulate(_col2im(dcols, x.shape, kh, kw, stride, padding, oh, ow))

    return Tensor._track(out, (x, w, b), backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x (N, D) @ w (D, O) + b (O,)."""
    return x.matmul(w) + b.reshape(1, -1)


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return x.relu()
    if kind == "silu":
        return x.silu()
    if kind == "sigmoid":
        return x.sigmoid()
    raise ValueError(f"unknown activation {kind!r}")


def avg_pool2d(x: Tensor, factor: int) -> Tensor:
    n, c, h, w = x.shape
    if h % factor or w % factor:
        raise DimensionError(f"input {h}x{w} not divisible by pool factor {factor}")
    oh, ow = h // factor, w // factor
    out = Tensor(
        x.data.reshape(n, c, oh, factor, ow, factor).mean(axis=(3, 5))
    )
    inv = 1.0 / (factor * factor)

    def backward(g):
        expanded = np.repeat(np.repeat(g, factor, axis=2), factor, axis=3)
        x._accumulate(expanded * inv)

    return Tensor._track(out, (x,), backward)


def nearest_upsample(x: Tensor, factor: int) -> Tensor:
    n, c, h, w = x.shape
    out = Tensor(np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3))

    def backward(g):
        blocks = g.reshape(n, c, h, factor, w, factor)
        x._accumulate(blocks.sum(axis=(3, 5)))

    return Tensor._track(out, (x,), backward)


def group_norm(x: Tensor, groups: int, gamma: Tensor, beta: Tensor) -> Tensor:
    """Per-group standardization then per-channel affine; eps 1e-5."""
    n, c, h, w = x.shape
    if c % groups:
        raise DimensionError(f"{c} channels not divisible by {groups} groups")
    xg = x.reshape(n, groups, (c // groups) * h * w)
    mu = xg.mean(axis=2, keepdims=True)
    centered = xg - mu
    var = (centered * centered).mean(axis=2, keepdims=True)
    xn = centered * ((var + GROUP_NORM_EPS) ** -0.5)
    xn = xn.reshape(n, c, h, w)
    return xn * gamma.reshape(1, c, 1, 1) + beta.reshape(1, c, 1, 1)


def timestep_embedding(t: int, dim: int) -> np.ndarray:
    """Sinusoidal embedding; frequencies geometric from 1 down to 1/10000."""
    if dim % 2:
        raise ValueError(f"embedding dim must be even, got {dim}")
    half = dim // 2
    if half == 1:
        freqs = np.ones(1)
    else:
        freqs = 10000.0 ** (-np.arange(half, dtype=np.float64) / (half - 1))
    ang = float(t) * freqs
    emb = np.concatenate([np.sin(ang), np.cos(ang)])
    if not np.all(np.isfinite(emb)):
        raise NumericError("non-finite timestep embedding")
    return emb
