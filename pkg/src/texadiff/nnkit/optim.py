"""Named parameter sets, Adam, and finite-difference gradient verification."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, no_grad
from ..errors import NumericError


class ParameterSet:
    """Named trainable tensors plus a freeze mask.

    Frozen parameters keep their gradients (the tape does not know about
    freezing) but are never touched by the optimizer.
    """

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.freeze_mask: set[str] = set()

    def add(self, name: str, init: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(init, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def freeze(self, names) -> None:
        missing = [n for n in names if n not in self.params]
        if missing:
            raise KeyError(f"cannot freeze unknown parameters {missing}")
        self.freeze_mask.update(names)

    def freeze_prefix(self, prefix: str) -> None:
        self.freeze_mask.update(n for n in self.params if n.startswith(prefix))

    def is_frozen(self, name: str) -> bool:
        return name in self.freeze_mask

    def param_count(self, prefix: str = "") -> int:
        return sum(t.size for n, t in self.params.items() if n.startswith(prefix))

    def snapshot(self, names=None) -> dict[str, np.ndarray]:
        names = self.params if names is None else names
        return {n: self.params[n].data.copy() for n in names}

    def load(self, arrays: dict[str, np.ndarray]) -> None:
        for name, arr in arrays.items():
            t = self.params[name]
            if t.shape != arr.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: {t.shape} vs {arr.shape}"
                )
            t.data = np.asarray(arr, dtype=np.float64).copy()


class AdamState:
    """First/second moment buffers and step count for bias-corrected Adam."""

    def __init__(self, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: ParameterSet, state: AdamState) -> None:
    """One bias-corrected Adam update over all non-frozen parameters."""
    state.step_count += 1
    b1, b2 = state.betas
    c1 = 1.0 - b1**state.step_count
    c2 = 1.0 - b2**state.step_count
    for name, t in params.params.items():
        if params.is_frozen(name):
            continue
        if t.grad is None:
            raise NumericError(f"parameter {name!r} has no gradient")
        g = t.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / c1
        v_hat = state.v[name] / c2
        t.data = t.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def grad_check(
    f,
    theta: ParameterSet,
    eps: float = 1e-3,
    max_coords: int = 8,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``f(theta)`` must be a deterministic scalar Tensor. Up to ``max_coords``
    coordinates are probed per parameter.
    """
    rng = rng or np.random.default_rng(0)
    theta.zero_grad()
    out = f(theta)
    if not np.isfinite(out.data).all():
        raise NumericError("non-finite objective in grad_check")
    out.backward()
    analytic = {n: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
                for n, t in theta.params.items()}

    worst = 0.0
    for name, t in theta.params.items():
        flat = t.data.reshape(-1)
        n_coords = flat.size
        idx = (
            np.arange(n_coords)
            if n_coords <= max_coords
            else rng.choice(n_coords, size=max_coords, replace=False)
        )
        for i in idx:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + eps
                hi = f(theta).item()
                flat[i] = orig - eps
                lo = f(theta).item()
                flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NumericError("non-finite value during finite differences")
            numeric = (hi - lo) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
