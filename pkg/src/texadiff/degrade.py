"""Synthetic scene generation and the simplified degradation pipeline.

Scenes are grayscale fields tiled by rectangular regions of known texture
kind, so every scene carries an exact ground-truth mask of texture-rich
area. Degradation is blur, area downsampling by the scale factor, and
additive Gaussian noise, all reproducible from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError
from .imagecore import Image, gaussian_blur, resize
from .rtdm import BinaryMask, RtdmConfig, TextureMap, estimate_rtdm, sample_tau

RICH_KINDS = ("checker", "stripes", "noise-texture")
SPARSE_KINDS = ("constant", "gradient")
TEXTURE_KINDS = RICH_KINDS + SPARSE_KINDS


@dataclass(frozen=True)
class Region:
    """Half-open rect [y0, y1) x [x0, x1) with one texture kind."""

    y0: int
    x0: int
    y1: int
    x1: int
    kind: str
    amplitude: float = 0.6
    period: int = 2

    def __post_init__(self):
        if self.kind not in TEXTURE_KINDS:
            raise ValueError(f"unknown texture kind {self.kind!r}")
        if self.y1 <= self.y0 or self.x1 <= self.x0:
            raise ValueError("empty region")
        if self.period < 1:
            raise ValueError("period must be >= 1")


@dataclass
class SceneSpec:
    size: int = 128
    layout: Sequence[Region] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.size % 8 or self.size % 4:
            raise ValueError(f"scene size {self.size} must be divisible by 8 and 4")


@dataclass
class DegradeConfig:
    blur_sigma_range: tuple[float, float] = (0.4, 1.6)
    scale: int = 4
    noise_sigma_range: tuple[float, float] = (0.0, 0.04)
    seed: int = 0

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        for name in ("blur_sigma_range", "noise_sigma_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"bad {name}: ({lo}, {hi})")


def _paint_region(field_arr: np.ndarray, r: Region, rng: np.random.Generator) -> None:
    h, w = r.y1 - r.y0, r.x1 - r.x0
    yy, xx = np.mgrid[0:h, 0:w]
    a = r.amplitude
    if r.kind == "checker":
        cell = ((yy // r.period) + (xx // r.period)) % 2
        tile = 0.5 + a * (cell - 0.5)
    elif r.kind == "stripes":
        axis = xx if rng.integers(2) else yy
        tile = 0.5 + a * (((axis // r.period) % 2) - 0.5)
    elif r.kind == "noise-texture":
        tile = 0.5 + a * (rng.random((h, w)) - 0.5)
    elif r.kind == "constant":
        tile = np.full((h, w), a)
    else:  # gradient
        ramp = xx / max(w - 1, 1)
        tile = 0.5 + a * (ramp - 0.5)
    field_arr[r.y0 : r.y1, r.x0 : r.x1] = np.clip(tile, 0.0, 1.0)


def synth_scene(spec: SceneSpec) -> tuple[Image, BinaryMask]:
    """Render a scene; the returned mask is 1 exactly on texture-rich regions."""
    n = spec.size
    coverage = np.zeros((n, n), dtype=np.int32)
    for r in spec.layout:
        if r.y1 > n or r.x1 > n or r.y0 < 0 or r.x0 < 0:
            raise ValueError(f"region {r} outside the {n}x{n} scene")
        coverage[r.y0 : r.y1, r.x0 : r.x1] += 1
    if coverage.min() != 1 or coverage.max() != 1:
        raise ValueError("regions must tile the scene without overlap")
    rng = np.random.default_rng(spec.seed)
    field_arr = np.zeros((n, n), dtype=np.float64)
    mask = np.zeros((n, n), dtype=np.uint8)
    for r in spec.layout:
        _paint_region(field_arr, r, rng)
        if r.kind in RICH_KINDS:
            mask[r.y0 : r.y1, r.x0 : r.x1] = 1
    return Image(field_arr[:, :, None]), BinaryMask(mask, "pixel")


def degrade(hr: Image, cfg: DegradeConfig | None = None) -> Image:
    """Blur, area-downsample by the scale factor, add noise, clamp."""
    cfg = cfg or DegradeConfig()
    if hr.height % cfg.scale or hr.width % cfg.scale:
        raise DimensionError(
            f"hr dims {hr.height}x{hr.width} not divisible by scale {cfg.scale}"
        )
    rng = np.random.default_rng(cfg.seed)
    blur_sigma = float(rng.uniform(*cfg.blur_sigma_range))
    noise_sigma = float(rng.uniform(*cfg.noise_sigma_range))
    out = gaussian_blur(hr, blur_sigma) if blur_sigma > 0 else hr
    out = resize(out, hr.height // cfg.scale, hr.width // cfg.scale, "area")
    arr = out.data.astype(np.float64)
    if noise_sigma > 0:
        arr = arr + noise_sigma * rng.standard_normal(arr.shape)
    return Image(np.clip(arr, 0.0, 1.0))


def make_psr(lr: Image, scale: int = 4) -> Image:
    """Bicubic stand-in for a PSNR-oriented reconstruction."""
    return resize(lr, lr.height * scale, lr.width * scale, "bicubic")


def default_spec_distribution(rng: np.random.Generator, size: int = 128) -> SceneSpec:
    """Random 2x2 (or half-split) layouts with at least one rich and one
    sparse region each."""
    seed = int(rng.integers(0, 2**31 - 1))
    kinds: list[str] = []
    n_regions = 2 if rng.random() < 0.3 else 4
    kinds.append(RICH_KINDS[rng.integers(len(RICH_KINDS))])
    kinds.append(SPARSE_KINDS[rng.integers(len(SPARSE_KINDS))])
    while len(kinds) < n_regions:
        kinds.append(TEXTURE_KINDS[rng.integers(len(TEXTURE_KINDS))])
    perm = rng.permutation(len(kinds))
    kinds = [kinds[i] for i in perm]

    def make_region(bounds, kind):
        y0, x0, y1, x1 = bounds
        if kind in ("checker", "stripes"):
            return Region(y0, x0, y1, x1, kind,
                          amplitude=float(rng.uniform(0.5, 0.9)),
                          period=int(rng.integers(1, 4)))
        if kind == "noise-texture":
            return Region(y0, x0, y1, x1, kind,
                          amplitude=float(rng.uniform(0.4, 0.8)))
        if kind == "constant":
            # Mid-gray constants look exactly like blurred fine texture in
            # the LR view, so the mask is the only disambiguating signal.
            value = 0.5 if rng.random() < 0.4 else float(rng.uniform(0.15, 0.85))
            return Region(y0, x0, y1, x1, kind, amplitude=value)
        return Region(y0, x0, y1, x1, "gradient",
                      amplitude=float(rng.uniform(0.3, 0.7)))

    h = size // 2
    if n_regions == 2:
        if rng.random() < 0.5:
            bounds = [(0, 0, size, h), (0, h, size, size)]
        else:
            bounds = [(0, 0, h, size), (h, 0, size, size)]
    else:
        bounds = [(0, 0, h, h), (0, h, h, size), (h, 0, size, h), (h, h, size, size)]
    layout = [make_region(b, k) for b, k in zip(bounds, kinds)]
    return SceneSpec(size=size, layout=layout, seed=seed)


class SceneTuple(NamedTuple):
    hr: Image
    lr: Image
    psr: Image
    m: TextureMap
    mask: BinaryMask
    region_mask: BinaryMask
    tau: float
    spec: SceneSpec


def build_dataset(
    n_scenes: int,
    spec_distribution=default_spec_distribution,
    degrade_cfg: DegradeConfig | None = None,
    rtdm_cfg: RtdmConfig | None = None,
    seed: int = 0,
    size: int = 128,
) -> list[SceneTuple]:
    """Generate, degrade and annotate scenes, reproducibly from a master seed.

    Per-scene seeds for layout, degradation and threshold sampling are
    derived from independent seed-sequence spawns so results do not depend
    on generation order.
    """
    degrade_cfg = degrade_cfg or DegradeConfig()
    rtdm_cfg = rtdm_cfg or RtdmConfig()
    children = np.random.SeedSequence(seed).spawn(n_scenes)
    out = []
    for child in children:
        rng = np.random.default_rng(child)
        spec = spec_distribution(rng, size)
        hr, region_mask = synth_scene(spec)
        cfg_i = DegradeConfig(
            blur_sigma_range=degrade_cfg.blur_sigma_range,
            scale=degrade_cfg.scale,
            noise_sigma_range=degrade_cfg.noise_sigma_range,
            seed=int(rng.integers(0, 2**31 - 1)),
        )
        lr = degrade(hr, cfg_i)
        psr = make_psr(lr, cfg_i.scale)
        tau = sample_tau(rtdm_cfg, rng)
        m, mask = estimate_rtdm(lr, hr, rtdm_cfg, tau, psr_override=psr)
        out.append(SceneTuple(hr, lr, psr, m, mask, region_mask, tau, spec))
    return out
