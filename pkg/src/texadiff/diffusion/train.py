"""Texture-aware diffusion loss and the denoiser training loop."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import ConditionSet, DenoiserModel
from .schedule import NoiseSchedule, q_sample
from ..errors import DimensionError, NumericError
from ..nnkit import AdamState, Tensor, adam_step
from ..rtdm import BinaryMask


def _mask_array(rtdm) -> np.ndarray:
    arr = rtdm.data if isinstance(rtdm, BinaryMask) else np.asarray(rtdm)
    if arr.ndim == 2:
        arr = arr[None, None]
    return arr.astype(np.float64)


def tadl_loss(eps, eps_pred: Tensor, rtdm, alpha_w: float = 1.0) -> Tensor:
    """Mean of (1 + alpha * mask) * (eps - eps_pred)^2 over all elements.

    The mask broadcasts across channels (and batch, if 2-D); gradients flow
    through eps_pred only.
    """
    if alpha_w < 0:
        raise ValueError(f"alpha_w must be >= 0, got {alpha_w}")
    target = eps.data if isinstance(eps, Tensor) else np.asarray(eps, dtype=np.float64)
    if eps_pred.shape != target.shape:
        raise DimensionError(f"eps {target.shape} vs prediction {eps_pred.shape}")
    mask = _mask_array(rtdm)
    if mask.shape[-2:] != target.shape[-2:]:
        raise DimensionError(
            f"mask spatial dims {mask.shape[-2:]} != eps {target.shape[-2:]}"
        )
    weight = 1.0 + alpha_w * mask
    diff = eps_pred - Tensor(target)
    return (diff * diff * Tensor(weight)).mean()


class LossRow(NamedTuple):
    step: int
    t: int
    loss: float
    masked_loss: float
    unmasked_loss: float


def write_loss_log(path, rows: Sequence[LossRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "loss", "masked_loss", "unmasked_loss"])
        for row in rows:
            writer.writerow([row.step, row.t,
                             f"{row.loss:.8f}", f"{row.masked_loss:.8f}",
                             f"{row.unmasked_loss:.8f}"])


@dataclass
class TrainConfig:
    steps: int = 200
    batch_size: int = 4
    lr: float = 1e-3
    alpha_w: float = 1.0
    seed: int = 0
    freeze_preset: str = "none"


class TrainItem(NamedTuple):
    """One training scene: clean latent, LR condition and texture mask.

    ``z0`` and ``lr_cond`` are (C, h, w) arrays in [-1, 1]; ``mask`` is a
    (1, h, w) binary array at latent resolution.
    """

    z0: np.ndarray
    lr_cond: np.ndarray
    mask: np.ndarray


def _region_mse(resid_sq: np.ndarray, mask: np.ndarray, value: int) -> float:
    sel = np.broadcast_to(mask == value, resid_sq.shape)
    if not sel.any():
        return float("nan")
    return float(resid_sq[sel].mean())


def train(
    model: DenoiserModel,
    dataset: Sequence[TrainItem],
    sched: NoiseSchedule,
    cfg: TrainConfig | None = None,
) -> list[LossRow]:
    """Noise-prediction training with the texture-weighted objective.

    Each step draws a scene batch and a shared timestep, noises the latents,
    and applies one Adam update honoring the freeze mask. Returns the per-step
    loss log.
    """
    cfg = cfg or TrainConfig()
    if not dataset:
        raise ValueError("empty dataset")
    model.apply_freeze_preset(cfg.freeze_preset)
    rng = np.random.default_rng(cfg.seed)
    adam = AdamState(lr=cfg.lr)
    log: list[LossRow] = []
    for step in range(cfg.steps):
        idx = rng.integers(0, len(dataset), size=cfg.batch_size)
        t = int(rng.integers(1, sched.T + 1))
        z0 = np.stack([dataset[i].z0 for i in idx])
        lr_cond = np.stack([dataset[i].lr_cond for i in idx])
        mask = np.stack([dataset[i].mask for i in idx])
        eps = rng.standard_normal(z0.shape)
        z_t = q_sample(z0, t, eps, sched)
        conds = ConditionSet(noisy_latent=z_t, lr_cond=lr_cond, rtdm=mask)
        pred = model.predict_eps(conds, t)
        loss = tadl_loss(eps, pred, mask, cfg.alpha_w)
        value = loss.item()
        if not np.isfinite(value):
            raise NumericError(f"non-finite loss {value} at step {step}, t={t}")
        model.params.zero_grad()
        loss.backward()
        adam_step(model.params, adam)
        resid_sq = (eps - pred.data) ** 2
        log.append(
            LossRow(
                step,
                t,
                value,
                _region_mse(resid_sq, mask, 1),
                _region_mse(resid_sq, mask, 0),
            )
        )
    return log
