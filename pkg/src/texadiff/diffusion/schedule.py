"""DDPM noise schedule, forward noising, ancestral step, and a closed-form
epsilon predictor for Gaussian data used as a sampling oracle.

Timesteps are 1-based: t runs over {1, ..., T}; table index t-1 holds the
step's coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    betas: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    alpha_bars: np.ndarray = field(repr=False)

    def _check(self, t: int) -> int:
        if not 1 <= t <= self.T:
            raise ValueError(f"timestep {t} outside [1, {self.T}]")
        return t - 1

    def beta(self, t: int) -> float:
        return float(self.betas[self._check(t)])

    def alpha(self, t: int) -> float:
        return float(self.alphas[self._check(t)])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[self._check(t)])


def make_schedule(
    T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02
) -> NoiseSchedule:
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    if T < 1:
        raise ValueError("T must be >= 1")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = 1.0 - betas
    return NoiseSchedule(T, betas, alphas, np.cumprod(alphas))


def q_sample(z0: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Forward noising: sqrt(abar_t) z0 + sqrt(1 - abar_t) eps."""
    if eps.shape != z0.shape:
        raise DimensionError(f"eps shape {eps.shape} != z0 shape {z0.shape}")
    abar = sched.alpha_bar(t)
    return np.sqrt(abar) * z0 + np.sqrt(1.0 - abar) * eps


def ddpm_step(
    z_t: np.ndarray,
    eps_pred: np.ndarray,
    t: int,
    sched: NoiseSchedule,
    noise: np.ndarray,
) -> np.ndarray:
    """Ancestral reverse step with sigma_t^2 = beta_t; noise is ignored at t=1."""
    if t < 1:
        raise ValueError("ddpm_step requires t >= 1")
    if eps_pred.shape != z_t.shape or noise.shape != z_t.shape:
        raise DimensionError("eps_pred/noise shape differs from z_t")
    beta = sched.beta(t)
    mean = (z_t - beta / np.sqrt(1.0 - sched.alpha_bar(t)) * eps_pred) / np.sqrt(
        sched.alpha(t)
    )
    if t == 1:
        return mean
    return mean + np.sqrt(beta) * noise


def analytic_gaussian_eps(
    z_t: np.ndarray, t: int, sched: NoiseSchedule, mu0: float, var0: float
) -> np.ndarray:
    """Exact minimum-MSE epsilon estimate for N(mu0, var0) scalar-per-pixel data.

    Conditions on z_t through the Gaussian posterior mean of z0 and converts
    it back to an epsilon prediction.
    """
    if var0 < 0:
        raise ValueError(f"var0 must be >= 0, got {var0}")
    abar = sched.alpha_bar(t)
    root = np.sqrt(abar)
    m_post = (var0 * root * z_t + (1.0 - abar) * mu0) / (abar * var0 + (1.0 - abar))
    return (z_t - root * m_post) / np.sqrt(1.0 - abar)


class AnalyticGaussianModel:
    """Sampler-compatible wrapper around the closed-form epsilon predictor."""

    def __init__(self, mu0: float, var0: float, sched: NoiseSchedule):
        self.mu0 = mu0
        self.var0 = var0
        self.sched = sched

    def predict_eps_np(self, conds, t: int) -> np.ndarray:
        return analytic_gaussian_eps(conds.noisy_latent, t, self.sched, self.mu0, self.var0)
