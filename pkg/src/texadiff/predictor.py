"""Texture-map prediction network for inference without an HR reference.

Two conv encoders over the LR and preliminary-SR views, per-scale sigmoid
gates fusing the branches, and a two-scale decoder with skip fusion ending
in a sigmoid head, trained with L1 against the estimation pipeline's
continuous map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, NumericError
from .imagecore import Image, resize, to_grayscale
from .nnkit import (
    AdamState,
    Conv2d,
    ParameterSet,
    Tensor,
    adam_step,
    concat,
    nearest_upsample,
    no_grad,
)
from .rtdm import BinaryMask, RtdmConfig, TextureMap, binarize, downsample_pool, postprocess

CKPT_KIND_PREDICTOR = 2.0


def gated_fuse(f_lr: Tensor, f_psr: Tensor, gate: Conv2d) -> Tensor:
    """Convex per-pixel blend: g*f_lr + (1-g)*f_psr with g = sigmoid(conv(cat))."""
    if f_lr.shape != f_psr.shape:
        raise DimensionError(f"branch shapes differ: {f_lr.shape} vs {f_psr.shape}")
    g = gate(concat([f_lr, f_psr], axis=1)).sigmoid()
    return g * f_lr + (1.0 - g) * f_psr


@dataclass
class PredictorConfig:
    in_ch: int = 1
    base_width: int = 16
    scale: int = 4


class PredictorModel:
    def __init__(self, cfg: PredictorConfig | None = None, seed: int = 0):
        self.cfg = cfg or PredictorConfig()
        rng = np.random.default_rng(seed)
        w1 = self.cfg.base_width
        w2 = 2 * w1
        ps = ParameterSet()
        ch = self.cfg.in_ch
        self.lr_enc0 = Conv2d(ps, "lr_enc0", ch, w1, rng=rng)
        self.lr_down = Conv2d(ps, "lr_down", w1, w2, stride=2, rng=rng)
        self.psr_enc0 = Conv2d(ps, "psr_enc0", ch, w1, rng=rng)
        self.psr_down = Conv2d(ps, "psr_down", w1, w2, stride=2, rng=rng)
        self.gate0 = Conv2d(ps, "gate0", 2 * w1, w1, rng=rng)
        self.gate1 = Conv2d(ps, "gate1", 2 * w2, w2, rng=rng)
        self.dec1 = Conv2d(ps, "dec1", w2, w2, rng=rng)
        self.dec0 = Conv2d(ps, "dec0", w2 + w1, w1, rng=rng)
        self.head = Conv2d(ps, "head", w1, 1, zero_init=True)
        self.params = ps

    def forward(self, x_lr: Tensor, x_psr: Tensor) -> Tensor:
        """Continuous map logits -> sigmoid, at the PSR resolution."""
        f0_lr = self.lr_enc0(x_lr).silu()
        f0_psr = self.psr_enc0(x_psr).silu()
        f1_lr = self.lr_down(f0_lr).silu()
        f1_psr = self.psr_down(f0_psr).silu()
        fused0 = gated_fuse(f0_lr, f0_psr, self.gate0)
        fused1 = gated_fuse(f1_lr, f1_psr, self.gate1)
        h = self.dec1(fused1).silu()
        h = concat([nearest_upsample(h, 2), fused0], axis=1)
        h = self.dec0(h).silu()
        return self.head(h).sigmoid()

    def to_checkpoint(self) -> dict:
        meta = np.array(
            [CKPT_KIND_PREDICTOR, self.cfg.in_ch, self.cfg.base_width, self.cfg.scale],
            dtype=np.float64,
        )
        out = {"_meta": meta}
        out.update(self.params.snapshot())
        return out

    @classmethod
    def from_checkpoint(cls, tensors: dict) -> "PredictorModel":
        meta = np.asarray(tensors["_meta"], dtype=np.float64)
        if meta[0] != CKPT_KIND_PREDICTOR:
            raise ValueError("checkpoint is not a predictor checkpoint")
        cfg = PredictorConfig(
            in_ch=int(meta[1]), base_width=int(meta[2]), scale=int(meta[3])
        )
        model = cls(cfg)
        weights = {k: v for k, v in tensors.items() if k != "_meta"}
        if set(weights) != set(model.params.names()):
            raise ValueError("checkpoint parameter names do not match the model")
        model.params.load(weights)
        return model


def _net_input(img: Image) -> np.ndarray:
    arr = to_grayscale(img).data[:, :, 0].astype(np.float64)
    return (2.0 * arr - 1.0)[None, None]


def predict_rtdm(model: PredictorModel, lr: Image, psr: Image) -> TextureMap:
    """Predict the continuous texture map from an (LR, PSR) pair."""
    s = model.cfg.scale
    if (psr.height, psr.width) != (lr.height * s, lr.width * s):
        raise DimensionError(
            f"psr dims {psr.height}x{psr.width} are not {s}x the lr dims"
        )
    lr_up = resize(lr, psr.height, psr.width, "nearest")
    with no_grad():
        out = model.forward(Tensor(_net_input(lr_up)), Tensor(_net_input(psr)))
    return TextureMap(out.data[0, 0])


def predict_mask(
    model: PredictorModel,
    lr: Image,
    psr: Image,
    cfg: RtdmConfig | None = None,
    tau: float = 0.40,
) -> BinaryMask:
    """Predicted map pushed through the same binarize/cleanup/pool pipeline
    as the estimation path."""
    cfg = cfg or RtdmConfig()
    m = predict_rtdm(model, lr, psr)
    return downsample_pool(postprocess(binarize(m, tau), cfg), cfg.pool_factor)


class PredictorItem(NamedTuple):
    lr: Image
    psr: Image
    target: TextureMap


@dataclass
class PredictorTrainConfig:
    steps: int = 300
    batch_size: int = 4
    lr: float = 2e-3
    seed: int = 0


class PredictorLossRow(NamedTuple):
    step: int
    loss: float


def train_predictor(
    model: PredictorModel,
    dataset: Sequence[PredictorItem],
    cfg: PredictorTrainConfig | None = None,
) -> list[PredictorLossRow]:
    """L1 regression of the predicted map onto the estimation pipeline's map."""
    cfg = cfg or PredictorTrainConfig()
    if not dataset:
        raise ValueError("empty dataset")
    x_lr = []
    x_psr = []
    targets = []
    for item in dataset:
        up = resize(item.lr, item.psr.height, item.psr.width, "nearest")
        x_lr.append(_net_input(up)[0])
        x_psr.append(_net_input(item.psr)[0])
        targets.append(item.target.data[None])
    x_lr = np.stack(x_lr)
    x_psr = np.stack(x_psr)
    targets = np.stack(targets)

    rng = np.random.default_rng(cfg.seed)
    adam = AdamState(lr=cfg.lr)
    log: list[PredictorLossRow] = []
    for step in range(cfg.steps):
        idx = rng.integers(0, len(dataset), size=cfg.batch_size)
        pred = model.forward(Tensor(x_lr[idx]), Tensor(x_psr[idx]))
        loss = (pred - Tensor(targets[idx])).abs().mean()
        value = loss.item()
        if not np.isfinite(value):
            raise NumericError(f"non-finite predictor loss at step {step}")
        model.params.zero_grad()
        loss.backward()
        adam_step(model.params, adam)
        log.append(PredictorLossRow(step, value))
    return log


def rtdm_accuracy(pred: BinaryMask, oracle: BinaryMask) -> float:
    """Percentage of matching mask pixels."""
    if pred.data.shape != oracle.data.shape:
        raise DimensionError("mask dimensions differ")
    return 100.0 * float((pred.data == oracle.data).mean())
