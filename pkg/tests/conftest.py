import numpy as np
import pytest

from texadiff.imagecore import Image, resize, to_grayscale


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, h, w, c=1):
    return Image(rng.random((h, w, c)).astype(np.float32))


def checkerboard(h, w, period=2, lo=0.1, hi=0.9):
    yy, xx = np.mgrid[0:h, 0:w]
    cell = ((yy // period) + (xx // period)) % 2
    return Image(np.where(cell, hi, lo).astype(np.float32)[:, :, None])


def to_latent_range(img: Image, lh: int, lw: int, mode: str) -> np.ndarray:
    """Grayscale -> (lh, lw) resample -> [-1, 1], as a (lh, lw) array."""
    g = to_grayscale(img)
    if (g.height, g.width) != (lh, lw):
        g = resize(g, lh, lw, mode)
    return 2.0 * g.data[:, :, 0].astype(np.float64) - 1.0


def naive_window_stats(a, b, window, sigma):
    """Double-loop Gaussian-window statistics with symmetric padding."""
    radius = window // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-0.5 * (x / sigma) ** 2)
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    pa = np.pad(a.astype(np.float64), radius, mode="symmetric")
    pb = np.pad(b.astype(np.float64), radius, mode="symmetric")
    h, w = a.shape
    mu_a = np.zeros((h, w))
    mu_b = np.zeros((h, w))
    e_aa = np.zeros((h, w))
    e_bb = np.zeros((h, w))
    e_ab = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            wa = pa[i : i + window, j : j + window]
            wb = pb[i : i + window, j : j + window]
            mu_a[i, j] = (k2 * wa).sum()
            mu_b[i, j] = (k2 * wb).sum()
            e_aa[i, j] = (k2 * wa * wa).sum()
            e_bb[i, j] = (k2 * wb * wb).sum()
            e_ab[i, j] = (k2 * wa * wb).sum()
    return mu_a, mu_b, e_aa - mu_a**2, e_bb - mu_b**2, e_ab - mu_a * mu_b


def naive_conv2d(x, w, b, stride=1, padding=0):
    """Six-loop cross-correlation reference."""
    n, cin, h, wd = x.shape
    co, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, co, oh, ow))
    for ni in range(n):
        for oc in range(co):
            for oy in range(oh):
                for ox in range(ow):
                    acc = b[oc]
                    for ic in range(cin):
                        for ky in range(kh):
                            for kx in range(kw):
                                acc += (
                                    w[oc, ic, ky, kx]
                                    * xp[ni, ic, oy * stride + ky, ox * stride + kx]
                                )
                    out[ni, oc, oy, ox] = acc
    return out
