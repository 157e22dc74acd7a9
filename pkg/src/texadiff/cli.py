"""Command-line surface tying the pipeline together.

Exit codes: 0 ok, 2 I/O, 3 dimension/contract violation, 4 configuration
error, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import tnsr
from .config import RunConfig, default_window, parse_config
from .degrade import (
    DegradeConfig,
    Region,
    SceneSpec,
    build_dataset,
    default_spec_distribution,
    make_psr,
    synth_scene,
)
from .diffusion import (
    ConditionSet,
    DenoiserConfig,
    DenoiserModel,
    TaSamplerConfig,
    TrainConfig,
    TrainItem,
    make_schedule,
    sample,
    train,
    write_loss_log,
)
from .errors import ConfigError, DimensionError, NumericError
from .imagecore import Image, load_image, resize, save_image, to_grayscale
from .metrics import MetricReport, mask_iou, psnr, ssim
from .predictor import PredictorModel, predict_mask, rtdm_accuracy
from .rtdm import BinaryMask, RtdmConfig, estimate_rtdm

LATENT_FACTOR = 8


def _rtdm_cfg(cfg: RunConfig) -> RtdmConfig:
    r = cfg.rtdm
    return RtdmConfig(
        tau_lo=r.tau_lo,
        tau_hi=r.tau_hi,
        window=r.window,
        sigma=r.sigma,
        c2=r.c2,
        morph_radius=r.morph_radius,
        min_component_area=r.min_component_area,
        pool_factor=r.pool_factor,
    )


def _maybe_config(path) -> RunConfig:
    return parse_config(path) if path else RunConfig()


def _save_mask(mask: BinaryMask, tnsr_path: Path) -> None:
    tnsr.save_tensor(tnsr_path, mask.data.astype(np.float32))
    save_image(
        Image(mask.data.astype(np.float32)[:, :, None]),
        tnsr_path.with_suffix(".png"),
    )


def _load_mask(path: Path, tag: str = "latent") -> BinaryMask:
    if path.suffix == ".png":
        arr = load_image(path).gray2d()
        return BinaryMask((arr > 0.5).astype(np.uint8), tag)
    arr = tnsr.load_tensor(path)
    return BinaryMask(np.rint(arr).astype(np.uint8), tag)


def _to_net_range(img: Image, h: int, w: int, mode: str | None = None) -> np.ndarray:
    """Grayscale, resample to (h, w) and map to [-1, 1] as a (1, h, w) array.

    Clean latents use nearest (subsampling keeps per-pixel texture that box
    averaging would cancel); conditioning signals default to a smooth
    resample.
    """
    gray = to_grayscale(img)
    if (gray.height, gray.width) != (h, w):
        if mode is None:
            mode = "area" if gray.height >= h else "bicubic"
        gray = resize(gray, h, w, mode)
    return (2.0 * gray.data[:, :, 0].astype(np.float64) - 1.0)[None]


def _decode_latent(z: np.ndarray, out_h: int, out_w: int) -> Image:
    field = np.clip((z[0, 0] + 1.0) / 2.0, 0.0, 1.0)
    return resize(Image(field.astype(np.float32)[:, :, None]), out_h, out_w, "bicubic")


# -- rtdm-estimate -----------------------------------------------------------


def cmd_rtdm_estimate(args) -> int:
    cfg = _maybe_config(args.config)
    rcfg = _rtdm_cfg(cfg)
    lr = load_image(args.lr)
    hr = load_image(args.hr)
    psr = load_image(args.psr) if args.psr else None
    m, mask = estimate_rtdm(lr, hr, rcfg, args.tau, psr_override=psr)
    tnsr.save_tensor(args.out_map, m.data.astype(np.float32))
    _save_mask(mask, Path(args.out_mask))
    print(f"foreground_fraction {mask.foreground_fraction():.3f}")
    return 0


# -- dataset -------------------------------------------------------------------


def _spec_to_json(spec: SceneSpec) -> dict:
    return {
        "size": spec.size,
        "seed": spec.seed,
        "layout": [dataclasses.asdict(r) for r in spec.layout],
    }


def cmd_dataset(args) -> int:
    cfg = parse_config(args.config)
    d = cfg.degrade
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenes = build_dataset(
        d.n_scenes,
        default_spec_distribution,
        DegradeConfig(tuple(d.blur_sigma_range), d.scale, tuple(d.noise_sigma_range)),
        _rtdm_cfg(cfg),
        seed=cfg.seed,
        size=d.scene_size,
    )
    manifest = {
        "seed": cfg.seed,
        "scale": d.scale,
        "n_scenes": d.n_scenes,
        "scene_size": d.scene_size,
        "scenes": [],
    }
    for i, scene in enumerate(scenes):
        name = f"scene_{i:03d}"
        sdir = out / name
        sdir.mkdir(exist_ok=True)
        save_image(scene.hr, sdir / "hr.png")
        save_image(scene.lr, sdir / "lr.png")
        save_image(scene.psr, sdir / "psr.png")
        tnsr.save_tensor(sdir / "map.tnsr", scene.m.data.astype(np.float32))
        tnsr.save_tensor(sdir / "mask.tnsr", scene.mask.data.astype(np.float32))
        save_image(
            Image(scene.region_mask.data.astype(np.float32)[:, :, None]),
            sdir / "region.png",
        )
        manifest["scenes"].append(
            {"dir": name, "tau": scene.tau, "spec": _spec_to_json(scene.spec)}
        )
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(scenes)} scenes to {out}")
    return 0


def load_train_items(dataset_dir: Path) -> tuple[list[TrainItem], dict]:
    with open(dataset_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    items = []
    for entry in manifest["scenes"]:
        sdir = dataset_dir / entry["dir"]
        hr = load_image(sdir / "hr.png")
        lr = load_image(sdir / "lr.png")
        mask = tnsr.load_tensor(sdir / "mask.tnsr")
        lh, lw = hr.height // LATENT_FACTOR, hr.width // LATENT_FACTOR
        if mask.shape != (lh, lw):
            raise DimensionError(
                f"mask shape {mask.shape} != latent dims {(lh, lw)} in {sdir}"
            )
        items.append(
            TrainItem(
                z0=_to_net_range(hr, lh, lw, "nearest"),
                lr_cond=_to_net_range(lr, lh, lw, "area"),
                mask=np.rint(mask).astype(np.float64)[None],
            )
        )
    return items, manifest


# -- train ---------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = parse_config(args.config)
    t = cfg.train
    items, _ = load_train_items(Path(args.dataset))
    sched = make_schedule(t.timesteps, t.beta_start, t.beta_end)
    model = DenoiserModel(
        DenoiserConfig(
            in_ch=1,
            base_width=t.base_width,
            ctrl_width=t.ctrl_width,
            temb_dim=t.temb_dim,
        ),
        seed=cfg.seed,
    )
    preset = args.freeze_preset or t.freeze_preset
    log = train(
        model,
        items,
        sched,
        TrainConfig(
            steps=t.steps,
            batch_size=t.batch_size,
            lr=t.lr,
            alpha_w=t.alpha_w,
            seed=cfg.seed,
            freeze_preset=preset,
        ),
    )
    out = Path(args.out)
    tnsr.save_checkpoint(out, model.to_checkpoint((t.timesteps, t.beta_start, t.beta_end)))
    write_loss_log(out.with_suffix(".loss.csv"), log)
    print(f"trained {len(log)} steps; final loss {log[-1].loss:.6f}")
    return 0


# -- sample ----------------------------------------------------------------------


def _resolve_mask(args, cfg: RunConfig, lr: Image, latent_hw: tuple) -> BinaryMask:
    choice = args.mask
    lh, lw = latent_hw
    tau = args.tau if args.tau is not None else cfg.sample.tau
    rcfg = _rtdm_cfg(cfg)
    if choice == "ones":
        return BinaryMask(np.ones((lh, lw), dtype=np.uint8), "latent")
    if choice == "zeros":
        return BinaryMask(np.zeros((lh, lw), dtype=np.uint8), "latent")
    if choice == "oracle":
        if not args.hr:
            raise ConfigError("--mask oracle requires --hr")
        _, mask = estimate_rtdm(lr, load_image(args.hr), rcfg, tau)
        return mask
    if choice in ("predicted", "inverted"):
        if not args.predictor_ckpt:
            raise ConfigError(f"--mask {choice} requires --predictor-ckpt")
        pmodel = PredictorModel.from_checkpoint(tnsr.load_checkpoint(args.predictor_ckpt))
        mask = predict_mask(pmodel, lr, make_psr(lr, pmodel.cfg.scale), rcfg, tau)
        if choice == "inverted":
            mask = BinaryMask(1 - mask.data, "latent")
        return mask
    mask = _load_mask(Path(choice))
    if mask.data.shape != (lh, lw):
        raise DimensionError(f"mask shape {mask.data.shape} != latent dims {latent_hw}")
    return mask


def cmd_sample(args) -> int:
    cfg = _maybe_config(args.config)
    model, (t_count, beta_start, beta_end) = DenoiserModel.from_checkpoint(
        tnsr.load_checkpoint(args.ckpt)
    )
    sched = make_schedule(t_count, beta_start, beta_end)
    lr = load_image(args.lr)
    scale = cfg.degrade.scale
    hr_h, hr_w = lr.height * scale, lr.width * scale
    lh, lw = hr_h // LATENT_FACTOR, hr_w // LATENT_FACTOR

    mask = _resolve_mask(args, cfg, lr, (lh, lw))
    if mask.data.shape != (lh, lw):
        raise DimensionError(f"mask shape {mask.data.shape} != latent dims {(lh, lw)}")

    ta_on = cfg.sample.ta if args.ta is None else (args.ta == "on")
    if args.window:
        lo, hi = (int(v) for v in args.window.split(":"))
    else:
        lo, hi = default_window(sched.T, cfg.sample)
    ta = TaSamplerConfig(t_lo=lo, t_hi=hi, parity=cfg.sample.parity, enabled=ta_on)

    lr_cond = _to_net_range(lr, lh, lw)[None]
    mask_arr = mask.data.astype(np.float64)[None, None]

    def conds_builder(z_t, t):
        return ConditionSet(noisy_latent=z_t, lr_cond=lr_cond, rtdm=mask_arr)

    frozen_checks = []
    if not mask.data.any():

        def on_step(t, z_before, z_after, selective):
            if selective:
                frozen_checks.append(np.array_equal(z_before, z_after))

    else:
        on_step = None

    z0 = sample(
        model,
        conds_builder,
        sched,
        ta,
        seed=args.seed,
        shape=(1, 1, lh, lw),
        on_step=on_step,
    )
    if frozen_checks and not all(frozen_checks):
        raise NumericError("freeze invariant violated during sampling")

    out = Path(args.out)
    save_image(_decode_latent(z0, hr_h, hr_w), out)
    tnsr.save_tensor(out.with_suffix(".tnsr"), z0[0, 0].astype(np.float32))
    _save_mask(mask, out.with_name(out.stem + "_mask.tnsr"))
    print(f"sampled {lh}x{lw} latent -> {out}")
    return 0


# -- eval -------------------------------------------------------------------------


def cmd_eval(args) -> int:
    report = MetricReport()
    if args.pred and args.ref:
        a = load_image(args.pred)
        b = load_image(args.ref)
        report.psnr = psnr(a, b)
        report.ssim = ssim(a, b)
    if args.mask_pred and args.mask_ref:
        mp = _load_mask(Path(args.mask_pred))
        mr = _load_mask(Path(args.mask_ref))
        report.mask_accuracy = rtdm_accuracy(mp, mr)
        report.mask_iou = mask_iou(mp, mr)
    print(report.to_json())
    return 0


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texadiff",
        description="Texture-aware diffusion super-resolution testbed",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rtdm-estimate", help="estimate a texture map/mask from an LR-HR pair")
    p.add_argument("--lr", required=True)
    p.add_argument("--hr", required=True)
    p.add_argument("--psr")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--out-map", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_rtdm_estimate)

    p = sub.add_parser("dataset", help="generate a synthetic scene dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the denoiser on a dataset directory")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--freeze-preset", choices=["none", "paper"])
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="run the texture-aware sampler")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--lr", required=True)
    p.add_argument("--mask", required=True,
                   help="predicted|oracle|ones|zeros|inverted or a mask file path")
    p.add_argument("--tau", type=float, choices=[0.35, 0.40])
    p.add_argument("--ta", choices=["on", "off"])
    p.add_argument("--window", help="t_lo:t_hi alternating window bounds")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--hr", help="HR reference (oracle mask source)")
    p.add_argument("--predictor-ckpt", help="predictor checkpoint (predicted/inverted)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="full-reference metrics between two images")
    p.add_argument("--pred")
    p.add_argument("--ref")
    p.add_argument("--mask-pred")
    p.add_argument("--mask-ref")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    except DimensionError as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 5
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"contract error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
