"""Shared network blocks for the denoiser backbone and the control branch."""

from __future__ import annotations

import numpy as np

from .. import nnkit
from ..nnkit import Conv2d, GroupNorm, Linear, ParameterSet, Tensor


class ResBlock:
    """GroupNorm/SiLU/conv residual block with an additive timestep projection."""

    def __init__(
        self,
        ps: ParameterSet,
        name: str,
        cin: int,
        cout: int,
        temb_dim: int,
        rng: np.random.Generator,
    ):
        self.norm1 = GroupNorm(ps, f"{name}.norm1", cin)
        self.conv1 = Conv2d(ps, f"{name}.conv1", cin, cout, rng=rng)
        self.temb = Linear(ps, f"{name}.temb", temb_dim, cout, rng=rng)
        self.norm2 = GroupNorm(ps, f"{name}.norm2", cout)
        self.conv2 = Conv2d(ps, f"{name}.conv2", cout, cout, rng=rng)
        self.skip = (
            None
            if cin == cout
            else Conv2d(ps, f"{name}.skip", cin, cout, k=1, padding=0, rng=rng)
        )

    def __call__(self, x: Tensor, temb: Tensor) -> Tensor:
        h = self.conv1(self.norm1(x).silu())
        proj = self.temb(temb.silu())
        h = h + proj.reshape(proj.shape[0], proj.shape[1], 1, 1)
        h = self.conv2(self.norm2(h).silu())
        s = x if self.skip is None else self.skip(x)
        return h + s


class TimeMlp:
    """Sinusoidal embedding followed by a 2-layer MLP, shared by all blocks."""

    def __init__(self, ps: ParameterSet, name: str, sin_dim: int, out_dim: int, rng):
        self.sin_dim = sin_dim
        self.fc1 = Linear(ps, f"{name}.fc1", sin_dim, out_dim, rng=rng)
        self.fc2 = Linear(ps, f"{name}.fc2", out_dim, out_dim, rng=rng)

    def __call__(self, t: int, batch: int) -> Tensor:
        emb = nnkit.timestep_embedding(t, self.sin_dim)
        x = Tensor(np.broadcast_to(emb, (batch, self.sin_dim)).copy())
        return self.fc2(self.fc1(x).silu())
