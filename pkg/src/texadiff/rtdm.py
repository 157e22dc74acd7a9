"""Relative texture density maps.

Pipeline from a (PSR, HR) image pair to the latent-resolution binary texture
mask: contrast-consistency map, perceptual-divergence map, combination,
thresholding, morphological cleanup and 8x max-pooling. Mask semantics:
1 = texture-rich (strong lost detail), 0 = texture-sparse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import tnsr
from .errors import DimensionError
from .imagecore import Image, gaussian_window_stats, load_image, resize, to_grayscale


class TextureMap:
    """Continuous per-pixel texture-consistency map in [0, 1].

    Lower values mark stronger texture discrepancy between the pair that
    produced the map.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"texture map must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("texture map values must be finite")
        if arr.min() < -1e-9 or arr.max() > 1 + 1e-9:
            raise ValueError("texture map values must lie in [0, 1]")
        self.data = np.clip(arr, 0.0, 1.0)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


class BinaryMask:
    """Strictly binary mask, tagged with the resolution it lives at."""

    __slots__ = ("data", "resolution_tag")

    def __init__(self, data: np.ndarray, resolution_tag: str = "pixel"):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise DimensionError(f"mask must be 2-D, got shape {arr.shape}")
        vals = np.unique(arr)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValueError("mask values must be exactly 0 or 1")
        if resolution_tag not in ("pixel", "latent"):
            raise ValueError(f"bad resolution tag {resolution_tag!r}")
        self.data = arr.astype(np.uint8)
        self.resolution_tag = resolution_tag

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def foreground_fraction(self) -> float:
        return float(self.data.mean())


@dataclass
class RtdmConfig:
    """Thresholds and window/morphology parameters of the texture-map pipeline.

    ``min_component_area`` is specified at 512x512 scale and rescaled
    proportionally to the processed image area.
    """

    tau_lo: float = 0.35
    tau_hi: float = 0.40
    window: int = 11
    sigma: float = 1.5
    c2: float = 0.03**2
    morph_radius: int = 1
    min_component_area: int = 64
    pool_factor: int = 8

    def __post_init__(self):
        if not (0.0 <= self.tau_lo <= self.tau_hi <= 1.0):
            raise ValueError("need 0 <= tau_lo <= tau_hi <= 1")
        if self.pool_factor < 1:
            raise ValueError("pool_factor must be >= 1")
        if self.min_component_area < 1:
            raise ValueError("min_component_area must be >= 1")

    def effective_min_area(self, height: int, width: int) -> int:
        scaled = self.min_component_area * (height * width) / 512.0**2
        return max(1, int(round(scaled)))


def cct_map(psr: Image, hr: Image, cfg: RtdmConfig | None = None) -> TextureMap:
    """Contrast-consistency map: (2*sx*sy + C2) / (sx^2 + sy^2 + C2).

    Equal local variances give exactly 1; texture lost in ``psr`` relative to
    ``hr`` pushes values toward 0.
    """
    cfg = cfg or RtdmConfig()
    if (psr.height, psr.width) != (hr.height, hr.width):
        raise DimensionError("psr and hr dimensions differ")
    stats = gaussian_window_stats(
        to_grayscale(psr), to_grayscale(hr), cfg.window, cfg.sigma
    )
    num = 2.0 * np.sqrt(stats.var_a * stats.var_b) + cfg.c2
    den = stats.var_a + stats.var_b + cfg.c2
    return TextureMap(np.clip(num / den, 0.0, 1.0))


class FilterBankProvider:
    """Built-in perceptual-divergence map from a fixed multi-scale filter bank.

    Per scale: horizontal/vertical gradient plus Laplacian responses, L2
    distance across the three feature channels, bilinear upsample to full
    resolution. Scale maps are averaged, divided by a saturation constant and
    clamped to [0, 1].
    """

    scales = (1, 2, 4)
    saturation = 0.5

    def _features(self, field: np.ndarray) -> np.ndarray:
        gx = ndimage.correlate1d(field, [-0.5, 0.0, 0.5], axis=1, mode="reflect")
        gy = ndimage.correlate1d(field, [-0.5, 0.0, 0.5], axis=0, mode="reflect")
        lap = ndimage.correlate(
            field,
            np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]]),
            mode="reflect",
        )
        return np.stack([gx, gy, lap])

    def __call__(self, psr: Image, hr: Image) -> np.ndarray:
        h, w = hr.height, hr.width
        ga = to_grayscale(psr)
        gb = to_grayscale(hr)
        acc = np.zeros((h, w), dtype=np.float64)
        for s in self.scales:
            if s == 1:
                fa, fb = ga.gray2d(), gb.gray2d()
            else:
                fa = resize(ga, max(1, h // s), max(1, w // s), "area").gray2d()
                fb = resize(gb, max(1, h // s), max(1, w // s), "area").gray2d()
            dist = np.sqrt(((self._features(fa) - self._features(fb)) ** 2).sum(axis=0))
            if s != 1:
                dist = resize(
                    Image(np.clip(dist, 0.0, 1.0)[:, :, None]), h, w, "bilinear"
                ).gray2d()
            acc += dist
        acc /= len(self.scales)
        return np.clip(acc / self.saturation, 0.0, 1.0)


class ExternalMapProvider:
    """Serves a precomputed perceptual map from a TNSR or PNG file."""

    def __init__(self, path):
        path = str(path)
        if path.endswith(".png"):
            self.map = load_image(path).gray2d()
        else:
            arr = tnsr.load_tensor(path)
            if arr.ndim != 2:
                raise DimensionError(f"external map must be 2-D, got {arr.shape}")
            self.map = arr.astype(np.float64)

    def __call__(self, psr: Image, hr: Image) -> np.ndarray:
        if self.map.shape != (hr.height, hr.width):
            raise DimensionError(
                f"external map shape {self.map.shape} != image {hr.height, hr.width}"
            )
        return np.clip(self.map, 0.0, 1.0)


def perceptual_map(psr: Image, hr: Image, provider=None) -> TextureMap:
    """Perceptual-divergence map in [0, 1]; higher = larger divergence."""
    if (psr.height, psr.width) != (hr.height, hr.width):
        raise DimensionError("psr and hr dimensions differ")
    provider = provider or FilterBankProvider()
    return TextureMap(provider(psr, hr))


def combine(m_sl: TextureMap, m_cct: TextureMap) -> TextureMap:
    """(1 - perceptual divergence) * contrast consistency."""
    if m_sl.data.shape != m_cct.data.shape:
        raise DimensionError("map dimensions differ")
    return TextureMap((1.0 - m_sl.data) * m_cct.data)


def binarize(m: TextureMap, tau: float) -> BinaryMask:
    """1 where the map value is <= tau (texture-rich), else 0."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    return BinaryMask((m.data <= tau).astype(np.uint8), "pixel")


def sample_tau(cfg: RtdmConfig, rng: np.random.Generator) -> float:
    return float(rng.uniform(cfg.tau_lo, cfg.tau_hi))


def postprocess(mask: BinaryMask, cfg: RtdmConfig | None = None) -> BinaryMask:
    """Morphological opening followed by small-component removal.

    Erosion then dilation with a square element (side 2*morph_radius + 1),
    with out-of-field pixels treated as background, then removal of
    4-connected foreground components below the area threshold.
    """
    cfg = cfg or RtdmConfig()
    if mask.resolution_tag != "pixel":
        raise DimensionError("postprocess expects a pixel-resolution mask")
    side = 2 * cfg.morph_radius + 1
    se = np.ones((side, side), dtype=bool)
    field = mask.data.astype(bool)
    opened = ndimage.binary_dilation(
        ndimage.binary_erosion(field, structure=se, border_value=0),
        structure=se,
        border_value=0,
    )
    four = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    labels, n = ndimage.label(opened, structure=four)
    if n:
        areas = np.bincount(labels.ravel())
        keep = areas >= cfg.effective_min_area(mask.height, mask.width)
        keep[0] = False
        opened = keep[labels]
    return BinaryMask(opened.astype(np.uint8), "pixel")


def downsample_pool(mask: BinaryMask, factor: int = 8) -> BinaryMask:
    """Max-pool a pixel mask by an integer factor; output is latent-tagged."""
    h, w = mask.height, mask.width
    if h % factor or w % factor:
        raise DimensionError(f"mask {h}x{w} not divisible by pool factor {factor}")
    blocks = mask.data.reshape(h // factor, factor, w // factor, factor)
    return BinaryMask(blocks.max(axis=(1, 3)), "latent")


def estimate_rtdm(
    lr: Image,
    hr: Image,
    cfg: RtdmConfig | None = None,
    tau: float = 0.40,
    provider=None,
    psr_override: Image | None = None,
) -> tuple[TextureMap, BinaryMask]:
    """Full estimation pipeline from an (LR, HR) pair.

    Returns the continuous map at HR resolution and the post-processed,
    pooled latent-resolution mask. The preliminary SR image defaults to a
    bicubic upsample of LR; pass ``psr_override`` to substitute an external
    PSNR-oriented reconstruction.
    """
    cfg = cfg or RtdmConfig()
    if hr.height % cfg.pool_factor or hr.width % cfg.pool_factor:
        raise DimensionError(
            f"hr dims {hr.height}x{hr.width} not divisible by {cfg.pool_factor}"
        )
    if hr.height % lr.height or hr.width % lr.width:
        raise DimensionError("hr dimensions are not an integer multiple of lr")
    if hr.height // lr.height != hr.width // lr.width:
        raise DimensionError("lr/hr scale factor differs between axes")
    if psr_override is not None:
        if (psr_override.height, psr_override.width) != (hr.height, hr.width):
            raise DimensionError("psr_override dimensions differ from hr")
        psr = psr_override
    else:
        psr = resize(lr, hr.height, hr.width, "bicubic")
    m_cct = cct_map(psr, hr, cfg)
    m_sl = perceptual_map(psr, hr, provider)
    m = combine(m_sl, m_cct)
    mb = postprocess(binarize(m, tau), cfg)
    return m, downsample_pool(mb, cfg.pool_factor)
