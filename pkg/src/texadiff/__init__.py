"""Texture-aware diffusion super-resolution testbed.

Texture-density estimation and prediction, a conditional toy diffusion
model with a lightweight control branch, a texture-weighted training
objective, and an alternating texture-aware sampling schedule, all
verifiable on synthetic scenes on a CPU.
"""

from .imagecore import Image, LocalStats
from .rtdm import BinaryMask, RtdmConfig, TextureMap

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "Image",
    "LocalStats",
    "RtdmConfig",
    "TextureMap",
    "__version__",
]
