"""Lightweight control branch: parallel condition encoders, a time-aware
residual block, spatial feature transformation driven by the texture mask,
and cross-normalized additive injection into the main branch.
"""

from __future__ import annotations

import numpy as np

from .blocks import ResBlock
from ..nnkit import Conv2d, ParameterSet, Tensor, concat

CROSS_NORM_EPS = 1e-5
_MAIN_STD_FLOOR = 1e-12


def cross_normalize(control_feat: Tensor, main_feat: Tensor) -> Tensor:
    """Standardize control features per channel over space, then rescale and
    shift them to the main branch's per-channel spatial statistics."""
    if control_feat.shape != main_feat.shape:
        raise ValueError(
            f"shape mismatch: {control_feat.shape} vs {main_feat.shape}"
        )
    mu_c = control_feat.mean(axis=(2, 3), keepdims=True)
    cen = control_feat - mu_c
    var_c = (cen * cen).mean(axis=(2, 3), keepdims=True)
    std_c = (var_c + CROSS_NORM_EPS) ** 0.5

    mu_m = main_feat.mean(axis=(2, 3), keepdims=True)
    cen_m = main_feat - mu_m
    var_m = (cen_m * cen_m).mean(axis=(2, 3), keepdims=True)
    std_m = (var_m + _MAIN_STD_FLOOR) ** 0.5
    return (cen / std_c) * std_m + mu_m


class SftLayer:
    """Per-pixel scale/shift of a feature map, produced from conditioning
    features by small conv stacks. Zero-initialized producers make the layer
    an exact identity at construction (scale = 1 + residual)."""

    def __init__(self, ps: ParameterSet, name: str, feat_ch: int, cond_ch: int, rng):
        self.shared = Conv2d(ps, f"{name}.shared", cond_ch, feat_ch, rng=rng)
        self.gamma = Conv2d(ps, f"{name}.gamma", feat_ch, feat_ch, zero_init=True)
        self.beta = Conv2d(ps, f"{name}.beta", feat_ch, feat_ch, zero_init=True)

    def __call__(self, feat: Tensor, cond: Tensor) -> Tensor:
        h = self.shared(cond).silu()
        return feat * (1.0 + self.gamma(h)) + self.beta(h)


def sft_inject(feat: Tensor, rtdm_feat: Tensor, layer: SftLayer) -> Tensor:
    if feat.shape[2:] != rtdm_feat.shape[2:]:
        raise ValueError("rtdm features not spatially aligned with feat")
    return layer(feat, rtdm_feat)


class MiniControlBranch:
    """Encodes (LR condition, noisy latent, texture mask) into an additive
    correction for the backbone, injected after its first block.

    The final projection is zero-initialized, so a fresh branch contributes
    exactly nothing.
    """

    def __init__(
        self,
        ps: ParameterSet,
        name: str,
        in_ch: int,
        width: int,
        main_ch: int,
        temb_dim: int,
        rng: np.random.Generator,
    ):
        fuse = 2 * width
        self.lr_enc1 = Conv2d(ps, f"{name}.lr_enc1", in_ch, width, rng=rng)
        self.lr_enc2 = Conv2d(ps, f"{name}.lr_enc2", width, width, rng=rng)
        self.lat_enc1 = Conv2d(ps, f"{name}.lat_enc1", in_ch, width, rng=rng)
        self.lat_enc2 = Conv2d(ps, f"{name}.lat_enc2", width, width, rng=rng)
        self.time_res = ResBlock(ps, f"{name}.time_res", fuse, fuse, temb_dim, rng)
        self.rtdm_enc1 = Conv2d(ps, f"{name}.rtdm_enc1", 1, width, rng=rng)
        self.rtdm_enc2 = Conv2d(ps, f"{name}.rtdm_enc2", width, fuse, rng=rng)
        self.sft = SftLayer(ps, f"{name}.sft", fuse, fuse, rng)
        self.align = Conv2d(ps, f"{name}.align", fuse, main_ch, rng=rng)
        self.proj = Conv2d(ps, f"{name}.proj", main_ch, main_ch, k=1, padding=0,
                           zero_init=True)

    def __call__(
        self, lr_cond: Tensor, noisy_latent: Tensor, rtdm: Tensor,
        temb: Tensor, main_feat: Tensor,
    ) -> Tensor:
        fl = self.lr_enc2(self.lr_enc1(lr_cond).silu())
        fz = self.lat_enc2(self.lat_enc1(noisy_latent).silu())
        h = self.time_res(concat([fl, fz], axis=1), temb)
        r = self.rtdm_enc2(self.rtdm_enc1(rtdm).silu())
        h = sft_inject(h, r, self.sft)
        h = self.align(h.silu())
        h = cross_normalize(h, main_feat)
        return self.proj(h)
