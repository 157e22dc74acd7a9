from .schedule import (
    AnalyticGaussianModel,
    NoiseSchedule,
    analytic_gaussian_eps,
    ddpm_step,
    make_schedule,
    q_sample,
)
from .control import MiniControlBranch, SftLayer, cross_normalize, sft_inject
from .model import (
    ConditionSet,
    DenoiserConfig,
    DenoiserModel,
    FREEZE_PRESETS,
    UNetBackbone,
    denoise_forward,
)
from .sampler import TaSamplerConfig, sample
from .train import LossRow, TrainConfig, TrainItem, tadl_loss, train, write_loss_log

__all__ = [
    "AnalyticGaussianModel",
    "ConditionSet",
    "DenoiserConfig",
    "DenoiserModel",
    "FREEZE_PRESETS",
    "LossRow",
    "MiniControlBranch",
    "NoiseSchedule",
    "SftLayer",
    "TaSamplerConfig",
    "TrainConfig",
    "TrainItem",
    "UNetBackbone",
    "analytic_gaussian_eps",
    "cross_normalize",
    "ddpm_step",
    "denoise_forward",
    "make_schedule",
    "q_sample",
    "sample",
    "sft_inject",
    "tadl_loss",
    "train",
    "write_loss_log",
]
