"""Conditional epsilon-prediction denoiser: a small U-Net backbone with the
control branch injected after the first block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import ResBlock, TimeMlp
from .control import MiniControlBranch
from ..errors import DimensionError
from ..nnkit import Conv2d, GroupNorm, ParameterSet, Tensor, concat, nearest_upsample, no_grad

CKPT_KIND_DENOISER = 1.0

FREEZE_PRESETS = {
    "none": (),
    # Keep the first down block and all up blocks trainable; freeze the rest
    # of the backbone. The control branch is always trainable.
    "paper": (
        "backbone.down2.",
        "backbone.downconv2.",
        "backbone.mid.",
        "backbone.time_mlp.",
    ),
}


@dataclass
class ConditionSet:
    """Per-step conditioning: LR image at latent resolution, current noisy
    latent, binary texture mask, and an inert prompt slot."""

    noisy_latent: np.ndarray
    lr_cond: np.ndarray | None = None
    rtdm: np.ndarray | None = None
    prompt_slot: object = None

    def __post_init__(self):
        base = self.noisy_latent.shape
        if len(base) != 4:
            raise DimensionError(f"noisy_latent must be (N, C, H, W), got {base}")
        for name in ("lr_cond", "rtdm"):
            arr = getattr(self, name)
            if arr is not None and arr.shape[-2:] != base[-2:]:
                raise DimensionError(
                    f"{name} spatial dims {arr.shape[-2:]} != latent {base[-2:]}"
                )


class UNetBackbone:
    """2 down blocks, a middle block and 2 up blocks with skip connections.

    Downsampling is by strided conv; upsampling is nearest-neighbor followed
    by conv inside the up ResBlocks. The output conv is zero-initialized.
    """

    def __init__(
        self,
        ps: ParameterSet,
        name: str,
        in_ch: int,
        base_width: int,
        temb_dim: int,
        rng: np.random.Generator,
    ):
        c1, c2 = base_width, 2 * base_width
        self.c1 = c1
        mlp_dim = 2 * temb_dim
        self.time_mlp = TimeMlp(ps, f"{name}.time_mlp", temb_dim, mlp_dim, rng)
        self.conv_in = Conv2d(ps, f"{name}.conv_in", in_ch, c1, rng=rng)
        self.down1 = ResBlock(ps, f"{name}.down1", c1, c1, mlp_dim, rng)
        self.downconv1 = Conv2d(ps, f"{name}.downconv1", c1, c2, stride=2, rng=rng)
        self.down2 = ResBlock(ps, f"{name}.down2", c2, c2, mlp_dim, rng)
        self.downconv2 = Conv2d(ps, f"{name}.downconv2", c2, c2, stride=2, rng=rng)
        self.mid = ResBlock(ps, f"{name}.mid", c2, c2, mlp_dim, rng)
        self.up2 = ResBlock(ps, f"{name}.up2", c2 + c2, c2, mlp_dim, rng)
        self.up1 = ResBlock(ps, f"{name}.up1", c2 + c1, c1, mlp_dim, rng)
        self.out_norm = GroupNorm(ps, f"{name}.out_norm", c1)
        self.out_conv = Conv2d(ps, f"{name}.out_conv", c1, in_ch, zero_init=True)

    def entry(self, z: Tensor, temb: Tensor) -> Tensor:
        """Stem plus first down block; the control injection point."""
        return self.down1(self.conv_in(z), temb)

    def rest(self, d1: Tensor, temb: Tensor) -> Tensor:
        x1 = self.downconv1(d1)
        d2 = self.down2(x1, temb)
        x2 = self.downconv2(d2)
        m = self.mid(x2, temb)
        u2 = self.up2(concat([nearest_upsample(m, 2), d2], axis=1), temb)
        u1 = self.up1(concat([nearest_upsample(u2, 2), d1], axis=1), temb)
        return self.out_conv(self.out_norm(u1).silu())


@dataclass
class DenoiserConfig:
    in_ch: int = 1
    base_width: int = 32
    ctrl_width: int = 8
    temb_dim: int = 64


class DenoiserModel:
    """Backbone + control branch sharing one ParameterSet."""

    def __init__(self, cfg: DenoiserConfig | None = None, seed: int = 0):
        self.cfg = cfg or DenoiserConfig()
        rng = np.random.default_rng(seed)
        ps = ParameterSet()
        self.backbone = UNetBackbone(
            ps, "backbone", self.cfg.in_ch, self.cfg.base_width, self.cfg.temb_dim, rng
        )
        self.control = MiniControlBranch(
            ps,
            "ctrl",
            self.cfg.in_ch,
            self.cfg.ctrl_width,
            self.cfg.base_width,
            2 * self.cfg.temb_dim,
            rng,
        )
        self.params = ps
        n_ctrl = ps.param_count("ctrl.")
        n_back = ps.param_count("backbone.")
        if n_ctrl >= 0.1 * n_back:
            raise ValueError(
                f"control branch too large: {n_ctrl} params vs backbone {n_back}"
            )

    def predict_eps(self, conds: ConditionSet, t: int) -> Tensor:
        return denoise_forward(self, conds, t)

    def predict_eps_np(self, conds: ConditionSet, t: int) -> np.ndarray:
        with no_grad():
            return self.predict_eps(conds, t).data

    def apply_freeze_preset(self, preset: str) -> None:
        if preset not in FREEZE_PRESETS:
            raise ValueError(f"unknown freeze preset {preset!r}")
        for prefix in FREEZE_PRESETS[preset]:
            self.params.freeze_prefix(prefix)

    # -- checkpointing -------------------------------------------------------

    def to_checkpoint(self, sched_meta: tuple[int, float, float]) -> dict:
        T, beta_start, beta_end = sched_meta
        meta = np.array(
            [
                CKPT_KIND_DENOISER,
                T,
                beta_start,
                beta_end,
                self.cfg.in_ch,
                self.cfg.base_width,
                self.cfg.ctrl_width,
                self.cfg.temb_dim,
            ],
            dtype=np.float64,
        )
        out = {"_meta": meta}
        out.update(self.params.snapshot())
        return out

    @classmethod
    def from_checkpoint(cls, tensors: dict) -> tuple["DenoiserModel", tuple]:
        meta = np.asarray(tensors["_meta"], dtype=np.float64)
        if meta[0] != CKPT_KIND_DENOISER:
            raise ValueError("checkpoint is not a denoiser checkpoint")
        cfg = DenoiserConfig(
            in_ch=int(meta[4]),
            base_width=int(meta[5]),
            ctrl_width=int(meta[6]),
            temb_dim=int(meta[7]),
        )
        model = cls(cfg)
        weights = {k: v for k, v in tensors.items() if k != "_meta"}
        expected = set(model.params.names())
        if set(weights) != expected:
            raise ValueError("checkpoint parameter names do not match the model")
        model.params.load(weights)
        return model, (int(meta[1]), float(meta[2]), float(meta[3]))


def denoise_forward(
    model: DenoiserModel, conds: ConditionSet, t: int, use_control: bool = True
) -> Tensor:
    """Predict epsilon for the current latent under the given conditions."""
    z = Tensor(conds.noisy_latent)
    n = z.shape[0]
    temb = model.backbone.time_mlp(t, n)
    d1 = model.backbone.entry(z, temb)
    if use_control:
        if conds.lr_cond is None or conds.rtdm is None:
            raise DimensionError("control branch requires lr_cond and rtdm conditions")
        ctrl = model.control(
            Tensor(conds.lr_cond), z, Tensor(conds.rtdm.astype(np.float64)), temb, d1
        )
        d1 = d1 + ctrl
    out = model.backbone.rest(d1, temb)
    if out.shape != z.shape:
        raise DimensionError(f"denoiser output {out.shape} != latent {z.shape}")
    return out
