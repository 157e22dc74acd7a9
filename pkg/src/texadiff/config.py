"""TOML run configuration with strict key checking.

Every field has a default; only the master ``seed`` is mandatory. Unknown
sections or keys fail fast so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError


@dataclass
class TrainSettings:
    steps: int = 200
    batch_size: int = 4
    lr: float = 1e-3
    alpha_w: float = 1.0
    timesteps: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.02
    base_width: int = 32
    ctrl_width: int = 8
    temb_dim: int = 64
    freeze_preset: str = "none"


@dataclass
class SampleSettings:
    ta: bool = True
    t_lo: int = 0  # 0 = scale the [100, 500] @ T=1000 window to the schedule
    t_hi: int = 0
    parity: str = "even"
    tau: float = 0.40


@dataclass
class PredictorSettings:
    steps: int = 300
    batch_size: int = 4
    lr: float = 2e-3
    base_width: int = 16
    tau: float = 0.40


@dataclass
class RtdmSettings:
    tau_lo: float = 0.35
    tau_hi: float = 0.40
    window: int = 11
    sigma: float = 1.5
    c2: float = 0.03**2
    morph_radius: int = 1
    min_component_area: int = 64
    pool_factor: int = 8


@dataclass
class DegradeSettings:
    blur_sigma_range: list = field(default_factory=lambda: [0.4, 1.6])
    scale: int = 4
    noise_sigma_range: list = field(default_factory=lambda: [0.0, 0.04])
    n_scenes: int = 8
    scene_size: int = 128


@dataclass
class RunConfig:
    seed: int = 0
    rtdm: RtdmSettings = field(default_factory=RtdmSettings)
    degrade: DegradeSettings = field(default_factory=DegradeSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    sample: SampleSettings = field(default_factory=SampleSettings)
    predictor: PredictorSettings = field(default_factory=PredictorSettings)


_SECTIONS = {
    "rtdm": RtdmSettings,
    "degrade": DegradeSettings,
    "train": TrainSettings,
    "sample": SampleSettings,
    "predictor": PredictorSettings,
}


def parse_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML in {path}: {exc}") from exc

    if "seed" not in data:
        raise ConfigError("missing mandatory top-level key 'seed'")
    seed = data.pop("seed")
    if not isinstance(seed, int):
        raise ConfigError(f"'seed' must be an integer, got {seed!r}")

    cfg = RunConfig(seed=seed)
    for section, body in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        target = getattr(cfg, section)
        for key, value in body.items():
            if not hasattr(target, key):
                raise ConfigError(f"unknown config key [{section}] {key}")
            setattr(target, key, value)
    return cfg


def default_window(T: int, s: SampleSettings) -> tuple[int, int]:
    """Explicit window bounds, or the canonical [100, 500] @ T=1000 window
    rescaled to the schedule length."""
    if s.t_lo or s.t_hi:
        return s.t_lo, s.t_hi
    return max(1, round(0.1 * T)), max(2, round(0.5 * T))
