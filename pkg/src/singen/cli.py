"""Command-line surface: train / generate / harmonize / edit / evaluate.

Every configuration key is available both in the JSON config file and as a
CLI flag (flag wins). Exit codes: 0 success, 2 invalid config/arguments,
3 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


from . import image_io, metrics, sampler, trainer
from .config import ConfigError, RunConfig
from .trainer import CheckpointError, TrainingDivergedError


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}") from exc


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    defaults = RunConfig().to_flat_dict()
    group = parser.add_argument_group("config overrides (flat config keys)")
    for key, default in sorted(defaults.items()):
        if default is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(default, bool):
            group.add_argument(flag, dest=key, type=_parse_bool, default=None,
                               metavar="BOOL")
        elif isinstance(default, list):
            group.add_argument(flag, dest=key, type=_parse_int_list, default=None,
                               metavar="I,J,...")
        elif isinstance(default, int):
            group.add_argument(flag, dest=key, type=int, default=None, metavar="N")
        else:
            group.add_argument(flag, dest=key, type=float, default=None, metavar="X")
    # keys whose dataclass default is None need explicit typing
    for key, argtype in (("scales_cap", int), ("sigma_rec", float)):
        if key not in defaults or defaults[key] is None:
            flag = "--" + key.replace("_", "-")
            group.add_argument(flag, dest=key, type=argtype, default=None, metavar="X")


def _collect_overrides(args: argparse.Namespace) -> dict:
    keys = set(RunConfig().to_flat_dict()) | {"scales_cap", "sigma_rec"}
    found = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            found[key] = value
    return found


def _effective_config(args: argparse.Namespace) -> RunConfig:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    return base.replace(**_collect_overrides(args))


def cmd_train(args: argparse.Namespace) -> int:
    run_dir = Path(args.out)
    cfg_copy = run_dir / "config.copy"
    has_scales = any(run_dir.glob("scale_*/meta"))
    if cfg_copy.exists() and has_scales:
        saved = RunConfig.load(cfg_copy)
        requested = saved.replace(**_collect_overrides(args))
        if requested.config_hash() != saved.config_hash():
            print(f"error: {run_dir} was trained with a different configuration; "
                  "start a new run directory", file=sys.stderr)
            return 2
        cascade = trainer.load_checkpoint(run_dir, allow_partial=True)
        if cascade.complete:
            print(f"{run_dir} is already fully trained; nothing to do")
            return 0
        print(f"resuming {run_dir} ({len(cascade.state.trained)} of "
              f"{len(cascade.models)} scales trained)")
        trainer.continue_training(cascade, run_dir=run_dir)
    else:
        image_path = Path(args.image) if args.image else None
        if image_path is None:
            print("error: --image is required for a new run", file=sys.stderr)
            return 2
        if not image_path.exists():
            print(f"error: image not found: {image_path}", file=sys.stderr)
            return 2
        cfg = _effective_config(args)
        if cfg_copy.exists():
            saved = RunConfig.load(cfg_copy)
            if saved.config_hash() != cfg.config_hash():
                print(f"error: {run_dir} holds a different configuration; "
                      "start a new run directory", file=sys.stderr)
                return 2
        image = image_io.load_image(image_path)
        cascade = trainer.train(image, cfg, run_dir=run_dir)
    print(f"trained {len(cascade.models)} scales -> {run_dir}")
    return 0


def _out_dims(cascade, args) -> tuple[int, int] | None:
    if args.width_mult == 1.0 and args.height_mult == 1.0:
        return None
    h0, w0 = cascade.pyramid.dims(0)
    return (max(1, round(h0 * args.height_mult)), max(1, round(w0 * args.width_mult)))


def cmd_generate(args: argparse.Namespace) -> int:
    cascade = trainer.load_checkpoint(args.run)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = cascade.coarsest_index if args.start_scale is None else args.start_scale
    images = sampler.generate(cascade, count=args.n, start_scale=start,
                              seed=args.seed, out_dims=_out_dims(cascade, args),
                              noise_scale=args.noise)
    files = []
    for i, img in enumerate(images):
        name = f"sample_{i:03d}.png"
        image_io.save_image(img, out_dir / name)
        files.append(name)
    manifest = {"seed": args.seed, "start_scale": start, "noise_scale": args.noise,
                "dims": [list(img.shape[-2:]) for img in images], "files": files}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(files)} samples to {out_dir}")
    return 0


def cmd_harmonize(args: argparse.Namespace) -> int:
    cascade = trainer.load_checkpoint(args.run)
    composite = image_io.load_image(args.image)
    result = sampler.harmonize(cascade, composite, args.inject_scale,
                               seed=args.seed, noise_scale=args.noise)
    image_io.save_image(result, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_edit(args: argparse.Namespace) -> int:
    cascade = trainer.load_checkpoint(args.run)
    edited = image_io.load_image(args.image)
    mask_img = image_io.load_image(args.mask)
    mask = (mask_img.mean(dim=1, keepdim=True) > 0).float()
    result = sampler.edit(cascade, edited, mask, args.inject_scale,
                          seed=args.seed, feather_px=args.feather,
                          noise_scale=args.noise)
    image_io.save_image(result, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cascade = trainer.load_checkpoint(args.run)
    real = cascade.pyramid[0]
    fake_dir = Path(args.fakes)
    fake_paths = sorted(p for p in fake_dir.iterdir()
                        if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if len(fake_paths) < 2:
        print(f"error: need at least 2 generated images in {fake_dir}, "
              f"found {len(fake_paths)}", file=sys.stderr)
        return 2
    fakes = []
    for path in fake_paths:
        img = image_io.load_image(path)
        if img.shape != real.shape:
            print(f"error: {path.name} has dims {tuple(img.shape[-2:])}, expected "
                  f"{tuple(real.shape[-2:])}", file=sys.stderr)
            return 2
        fakes.append(img)

    extractor = metrics.create_extractor(args.extractor)
    per_image = {p.name: metrics.sifid(real, f, extractor)
                 for p, f in zip(fake_paths, fakes)}
    report = metrics.diversity([(f + 1.0) / 2.0 for f in fakes], (real + 1.0) / 2.0)

    out_path = Path(args.out) if args.out else Path(args.run) / "metrics.json"
    heatmap_name = out_path.stem + "_diversity_heatmap.png"
    image_io.save_grayscale(report.std_map.mean(dim=0), out_path.parent / heatmap_name)
    payload = {
        "extractor": extractor.name,
        "sifid": {"per_image": per_image,
                  "mean": sum(per_image.values()) / len(per_image)},
        "diversity": {"scalar": report.scalar, "normalized": report.normalized,
                      "heatmap": heatmap_name},
    }
    out_path.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singen",
        description="Train a generative model on one image; sample, harmonize, "
                    "edit, and evaluate with it.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a multi-scale model on one image")
    p_train.add_argument("--image", help="training image (PNG/JPEG)")
    p_train.add_argument("--out", required=True, help="run directory")
    p_train.add_argument("--config", help="JSON config file (flat keys)")
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_gen = sub.add_parser("generate", help="sample new images from a trained run")
    p_gen.add_argument("--run", required=True)
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--n", type=int, default=1)
    p_gen.add_argument("--start-scale", type=int, default=None,
                       help="scale to start from (default: coarsest)")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--noise", type=float, default=1.0, help="noise amplitude multiplier")
    p_gen.add_argument("--width-mult", type=float, default=1.0)
    p_gen.add_argument("--height-mult", type=float, default=1.0)
    p_gen.set_defaults(func=cmd_generate)

    p_harm = sub.add_parser("harmonize", help="blend a pasted object into the trained image")
    p_harm.add_argument("--run", required=True)
    p_harm.add_argument("--image", required=True, help="composite image")
    p_harm.add_argument("--inject-scale", type=int, required=True)
    p_harm.add_argument("--out", required=True, help="output PNG")
    p_harm.add_argument("--seed", type=int, default=0)
    p_harm.add_argument("--noise", type=float, default=1.0)
    p_harm.set_defaults(func=cmd_harmonize)

    p_edit = sub.add_parser("edit", help="repaint only the masked region of an edit")
    p_edit.add_argument("--run", required=True)
    p_edit.add_argument("--image", required=True, help="edited image (finest dims)")
    p_edit.add_argument("--mask", required=True, help="binary mask image (finest dims)")
    p_edit.add_argument("--inject-scale", type=int, required=True)
    p_edit.add_argument("--out", required=True, help="output PNG")
    p_edit.add_argument("--seed", type=int, default=0)
    p_edit.add_argument("--noise", type=float, default=1.0)
    p_edit.add_argument("--feather", type=int, default=5, help="feather width in px")
    p_edit.set_defaults(func=cmd_edit)

    p_eval = sub.add_parser("evaluate", help="SIFID + diversity of generated samples")
    p_eval.add_argument("--run", required=True)
    p_eval.add_argument("--fakes", required=True, help="directory of generated PNGs")
    p_eval.add_argument("--out", help="metrics JSON path (default: run/metrics.json)")
    p_eval.add_argument("--extractor", default="random",
                        choices=("random", "inception", "auto"))
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, CheckpointError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
