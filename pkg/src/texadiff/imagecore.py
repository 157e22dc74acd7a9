"""Image container, PNG I/O, resampling, filtering and windowed local statistics.

Images are (H, W, C) float32 fields in [0, 1] with C in {1, 3}. All windowed
operations use half-sample symmetric ("reflect") border padding, i.e. the
padding produced by ``np.pad(mode="symmetric")`` / ``scipy.ndimage`` mode
``reflect``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import DimensionError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class Image:
    """Dense float image in [0, 1], row-major (H, W, C)."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionError(f"expected (H, W, 1|3) data, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError("empty image")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image samples must be finite")
        if arr.min() < -1e-6 or arr.max() > 1 + 1e-6:
            raise ValueError("image samples must lie in [0, 1]")
        self.data = np.clip(arr, 0.0, 1.0)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def from_u8(cls, arr: np.ndarray) -> "Image":
        arr = np.asarray(arr)
        return cls(np.clip(arr.astype(np.float32) / 255.0, 0.0, 1.0))

    def to_u8(self) -> np.ndarray:
        return np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8)

    def gray2d(self) -> np.ndarray:
        """Single-channel view as a 2-D float64 array."""
        return to_grayscale(self).data[:, :, 0].astype(np.float64)


@dataclass
class LocalStats:
    """Per-pixel Gaussian-window statistics of an image pair."""

    mu_a: np.ndarray
    mu_b: np.ndarray
    var_a: np.ndarray
    var_b: np.ndarray
    cov_ab: np.ndarray


def load_image(path) -> Image:
    try:
        pic = PILImage.open(path)
    except FileNotFoundError:
        raise
    with pic:
        if pic.mode not in ("L", "RGB"):
            raise ValueError(f"unsupported PNG mode {pic.mode!r}; need 8-bit L or RGB")
        arr = np.asarray(pic, dtype=np.uint8)
    return Image.from_u8(arr)


def save_image(img: Image, path) -> None:
    arr = img.to_u8()
    if img.channels == 1:
        pil = PILImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(arr, mode="RGB")
    pil.save(path, format="PNG")


def to_grayscale(img: Image) -> Image:
    if img.channels == 1:
        return img
    w = np.asarray(LUMA_WEIGHTS, dtype=np.float64)
    luma = img.data.astype(np.float64) @ w
    return Image(np.clip(luma, 0.0, 1.0)[:, :, None])


def gaussian_kernel1d(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _correlate_sym(field: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable 2-D correlation with half-sample symmetric padding."""
    out = ndimage.correlate1d(field, kernel, axis=0, mode="reflect")
    return ndimage.correlate1d(out, kernel, axis=1, mode="reflect")


def gaussian_window_stats(
    a: Image, b: Image, window: int = 11, sigma: float = 1.5
) -> LocalStats:
    """Gaussian-weighted local mean/variance/covariance maps of two 1-channel images.

    The window is normalized to sum 1; variances are clamped to >= 0 against
    numeric slack.
    """
    if a.channels != 1 or b.channels != 1:
        raise DimensionError("gaussian_window_stats needs 1-channel images")
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionError("image dimensions differ")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and positive, got {window}")

    radius = window // 2
    k = gaussian_kernel1d(sigma, radius)
    fa = a.data[:, :, 0].astype(np.float64)
    fb = b.data[:, :, 0].astype(np.float64)

    mu_a = _correlate_sym(fa, k)
    mu_b = _correlate_sym(fb, k)
    var_a = _correlate_sym(fa * fa, k) - mu_a * mu_a
    var_b = _correlate_sym(fb * fb, k) - mu_b * mu_b
    cov_ab = _correlate_sym(fa * fb, k) - mu_a * mu_b
    return LocalStats(
        mu_a=mu_a,
        mu_b=mu_b,
        var_a=np.maximum(var_a, 0.0),
        var_b=np.maximum(var_b, 0.0),
        cov_ab=cov_ab,
    )


def gaussian_blur(img: Image, sigma: float) -> Image:
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    k = gaussian_kernel1d(sigma, radius)
    out = np.empty_like(img.data, dtype=np.float64)
    for c in range(img.channels):
        out[:, :, c] = _correlate_sym(img.data[:, :, c].astype(np.float64), k)
    return Image(np.clip(out, 0.0, 1.0))


def _nearest_weights(n_out: int, n_in: int) -> np.ndarray:
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    src = np.minimum((np.arange(n_out) + 0.5) * scale, n_in - 1e-9).astype(np.int64)
    w[np.arange(n_out), src] = 1.0
    return w


def _bilinear_weights(n_out: int, n_in: int) -> np.ndarray:
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        j0 = math.floor(src)
        frac = src - j0
        w[i, min(max(j0, 0), n_in - 1)] += 1.0 - frac
        w[i, min(max(j0 + 1, 0), n_in - 1)] += frac
    return w


def _cubic_kernel(x: float, a: float = -0.5) -> float:
    x = abs(x)
    if x < 1.0:
        return (a + 2.0) * x**3 - (a + 3.0) * x**2 + 1.0
    if x < 2.0:
        return a * x**3 - 5.0 * a * x**2 + 8.0 * a * x - 4.0 * a
    return 0.0


def _bicubic_weights(n_out: int, n_in: int) -> np.ndarray:
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        src = (i + 0.5) * scale - 0.5
        j0 = math.floor(src)
        taps = [(j, _cubic_kernel(src - j)) for j in range(j0 - 1, j0 + 3)]
        total = sum(t for _, t in taps)
        for j, t in taps:
            w[i, min(max(j, 0), n_in - 1)] += t / total
    return w


def _area_weights(n_out: int, n_in: int) -> np.ndarray:
    w = np.zeros((n_out, n_in), dtype=np.float64)
    scale = n_in / n_out
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        j0, j1 = math.floor(lo), min(math.ceil(hi), n_in)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / scale
    return w


_WEIGHT_BUILDERS = {
    "nearest": _nearest_weights,
    "bilinear": _bilinear_weights,
    "bicubic": _bicubic_weights,
    "area": _area_weights,
}


def resize(img: Image, new_h: int, new_w: int, mode: str = "bilinear") -> Image:
    """Resample on the standard align-corners=false grid.

    Area mode averages source boxes exactly when the scale factor is an
    integer. Bicubic uses the Catmull-Rom kernel (a = -0.5) with edge clamp.
    """
    if new_h < 1 or new_w < 1:
        raise DimensionError(f"target dimensions must be >= 1, got {new_h}x{new_w}")
    if mode not in _WEIGHT_BUILDERS:
        raise ValueError(f"unknown mode {mode!r}")
    build = _WEIGHT_BUILDERS[mode]
    wy = build(new_h, img.height)
    wx = build(new_w, img.width)
    src = img.data.astype(np.float64)
    out = np.einsum("oh,hwc,pw->opc", wy, src, wx, optimize=True)
    return Image(np.clip(out, 0.0, 1.0))
