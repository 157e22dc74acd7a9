"""Full-reference quality metrics and mask-agreement metrics."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .imagecore import Image, gaussian_window_stats, to_grayscale
from .rtdm import BinaryMask

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass
class MetricReport:
    psnr: float | None = None
    ssim: float | None = None
    mask_accuracy: float | None = None
    mask_iou: float | None = None

    def to_json(self) -> str:
        out = {}
        for key, val in vars(self).items():
            if val is None:
                continue
            out[key] = "inf" if math.isinf(val) else round(float(val), 6)
        return json.dumps(out)


def psnr(a: Image, b: Image) -> float:
    """10*log10(1/MSE) over all samples jointly; +inf for identical images."""
    if a.data.shape != b.data.shape:
        raise DimensionError("image dimensions differ")
    mse = float(np.mean((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim(a: Image, b: Image, window: int = 11, sigma: float = 1.5) -> float:
    """Mean structural similarity index (luminance * contrast * structure)."""
    if (a.height, a.width) != (b.height, b.width):
        raise DimensionError("image dimensions differ")
    s = gaussian_window_stats(to_grayscale(a), to_grayscale(b), window, sigma)
    lum = (2.0 * s.mu_a * s.mu_b + SSIM_C1) / (s.mu_a**2 + s.mu_b**2 + SSIM_C1)
    cs = (2.0 * s.cov_ab + SSIM_C2) / (s.var_a + s.var_b + SSIM_C2)
    return float(np.mean(lum * cs))


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two binary masks; 1.0 when both are empty."""
    if a.data.shape != b.data.shape:
        raise DimensionError("mask dimensions differ")
    inter = int(np.logical_and(a.data, b.data).sum())
    union = int(np.logical_or(a.data, b.data).sum())
    if union == 0:
        return 1.0
    return inter / union
