"""Command-line surface: synth, blend, decompose, maps, split, eval.

Every subcommand accepts ``--seed``, ``--config`` (a JSON document
mirroring the parameter records) and ``--out``; individual flags beat
the config file, which beats the built-in defaults.  Exit codes: 0 on
success, 1 for usage errors, 2 for data errors (unreadable or
inconsistent inputs).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import pipeline, rain
from .blend import BLEND_MODES, composite_with_mask
from .imaging import load_depth, load_image, save_image, save_map, save_mask
from .pipeline import (
    Manifest,
    SampleSpec,
    SynthConfig,
    build_dataset,
    config_from_dict,
    decompose_to_files,
    evaluate_to_report,
    split_manifest,
)


class CliUsageError(Exception):
    """Bad invocation (unknown flag, missing argument, infeasible request)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise CliUsageError(message)


# flag destination -> (config section, key); None section = top level
_SCALAR_OVERRIDES = {
    "alpha": ("rain", "alpha"),
    "beta": ("rain", "beta"),
    "d_near": ("rain", "d_near"),
    "atm_light": ("rain", "atm_light"),
    "density": ("streaks", "density"),
    "angle_mean": ("streaks", "angle_mean"),
    "angle_jitter": ("streaks", "angle_jitter"),
    "width": ("streaks", "width"),
    "blend_mode": ("blend", "mode"),
    "transparency": ("blend", "transparency"),
    "drop_threshold": ("blend", "mask_threshold"),
    "sigma_s": ("rgf", "sigma_s"),
    "sigma_r": ("rgf", "sigma_r"),
    "iterations": ("rgf", "n_iter"),
    "window_radius": ("rgf", "window_radius"),
    "streak_threshold": (None, "streak_threshold"),
}

_RANGE_OVERRIDES = {
    "length_min": ("streaks", "length_range", 0, (20.0, 40.0)),
    "length_max": ("streaks", "length_range", 1, (20.0, 40.0)),
    "intensity_min": ("streaks", "intensity_range", 0, (0.25, 0.65)),
    "intensity_max": ("streaks", "intensity_range", 1, (0.25, 0.65)),
}


def resolve_config(args: argparse.Namespace) -> SynthConfig:
    """Merge defaults, the --config document, and command-line flags."""
    if getattr(args, "config", None):
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{args.config}: not valid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
    else:
        data = {}
    for dest, (section, key) in _SCALAR_OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if section is None:
            data[key] = value
        else:
            data.setdefault(section, {})[key] = value
    for dest, (section, key, index, default) in _RANGE_OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        pair = list(data.get(section, {}).get(key, default))
        pair[index] = value
        data.setdefault(section, {})[key] = pair
    return config_from_dict(data)


def _add_common(parser: argparse.ArgumentParser, out_help: str) -> None:
    parser.add_argument("--seed", type=int, default=0, help="base random seed (default 0)")
    parser.add_argument("--config", help="JSON config file mirroring the parameter records")
    parser.add_argument("--out", default=None, help=out_help)


def _add_rain_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, help="streak attenuation coefficient [1/m]")
    parser.add_argument("--beta", type=float, help="haze attenuation coefficient [1/m]")
    parser.add_argument("--d-near", dest="d_near", type=float, help="streak saturation depth [m]")
    parser.add_argument("--atm-light", dest="atm_light", type=float, help="atmospheric light in [0, 1]")
    parser.add_argument("--density", type=float, help="streaks per megapixel")
    parser.add_argument("--angle-mean", dest="angle_mean", type=float, help="mean streak angle from vertical [deg]")
    parser.add_argument("--angle-jitter", dest="angle_jitter", type=float, help="streak angle jitter [deg]")
    parser.add_argument("--length-min", dest="length_min", type=float, help="minimum streak length [px]")
    parser.add_argument("--length-max", dest="length_max", type=float, help="maximum streak length [px]")
    parser.add_argument("--width", type=float, help="streak width [px]")
    parser.add_argument("--intensity-min", dest="intensity_min", type=float, help="minimum streak intensity")
    parser.add_argument("--intensity-max", dest="intensity_max", type=float, help="maximum streak intensity")
    parser.add_argument("--streak-threshold", dest="streak_threshold", type=float, help="streak mask threshold in [0, 1]")


def _add_blend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--blend-mode", dest="blend_mode", choices=BLEND_MODES, help="cover blend mode")
    parser.add_argument("--transparency", type=float, help="cover transparency t in (0, 1)")
    parser.add_argument("--drop-threshold", dest="drop_threshold", type=int, help="drop mask byte threshold (0-255)")


def _add_rgf_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma-s", dest="sigma_s", type=float, help="spatial Gaussian sigma [px]")
    parser.add_argument("--sigma-r", dest="sigma_r", type=float, help="range Gaussian sigma in [0, 1] units")
    parser.add_argument("--iterations", type=int, help="rolling guidance iterations")
    parser.add_argument("--window-radius", dest="window_radius", type=int, help="filter window radius [px]")


def build_parser() -> _Parser:
    parser = _Parser(prog="morsynth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesise rainy samples from clean image + depth pairs")
    _add_common(p, "output dataset directory (required)")
    p.add_argument("--background", required=True, help="clean RGB PNG, or a directory of them")
    p.add_argument("--depth", required=True, help="depth PFM/16-bit PNG, or a directory matched by stem")
    p.add_argument("--cover", help="raindrop cover PNG, or a directory matched by stem")
    p.add_argument("--depth-scale", dest="depth_scale", type=float, help="metres per unit for 16-bit PNG depth")
    p.add_argument("--count", type=int, help="number of samples (seed-varied for a single input pair)")
    p.add_argument("--jobs", type=int, default=None, help="parallel sample builds (default $MOR_SYNTH_JOBS or 1)")
    p.add_argument("--decompose", action="store_true", help="also emit low/high decomposition per sample")
    _add_rain_flags(p)
    _add_blend_flags(p)
    _add_rgf_flags(p)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("blend", help="blend a cover photo onto a background and derive the drop mask")
    _add_common(p, "output directory for composite.png and drop_mask.png (required)")
    p.add_argument("--background", required=True, help="background RGB PNG")
    p.add_argument("--cover", required=True, help="cover RGB PNG")
    _add_blend_flags(p)
    p.set_defaults(handler=_cmd_blend)

    p = sub.add_parser("decompose", help="split an image into low/high frequency PNGs")
    _add_common(p, "output directory for low.png and high.png")
    p.add_argument("--input", required=True, help="input RGB PNG")
    p.add_argument("--out-low", dest="out_low", help="explicit path for the low PNG")
    p.add_argument("--out-high", dest="out_high", help="explicit path for the high PNG")
    _add_rgf_flags(p)
    p.set_defaults(handler=_cmd_decompose)

    p = sub.add_parser("maps", help="emit ground-truth maps for a depth map (and optional cover)")
    _add_common(p, "output directory for the map PNGs (required)")
    p.add_argument("--depth", required=True, help="depth PFM/16-bit PNG")
    p.add_argument("--depth-scale", dest="depth_scale", type=float, help="metres per unit for 16-bit PNG depth")
    p.add_argument("--background", help="clean RGB PNG (needed for the drop mask)")
    p.add_argument("--cover", help="raindrop cover PNG (requires --background)")
    _add_rain_flags(p)
    _add_blend_flags(p)
    p.set_defaults(handler=_cmd_maps)

    p = sub.add_parser("split", help="fill in groups and a seeded train/test split of a manifest")
    _add_common(p, "output manifest path (default: rewrite the input manifest)")
    p.add_argument("--manifest", required=True, help="manifest JSON produced by synth")
    p.add_argument("--group-size", dest="group_size", type=int, default=20, help="samples per group (default 20)")
    p.add_argument("--train-per-group", dest="train_per_group", type=int, required=True, help="train draws per group")
    p.add_argument("--test-per-group", dest="test_per_group", type=int, default=0, help="test draws per group (default 0)")
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("eval", help="score restored images against ground truth (PSNR/SSIM)")
    _add_common(p, "report path; .csv and .png twins are written next to it (default report.json)")
    p.add_argument("--pred", required=True, help="directory of restored PNGs")
    p.add_argument("--gt", required=True, help="directory of ground-truth PNGs with matching names")
    p.add_argument("--no-figures", dest="no_figures", action="store_true", help="skip the summary figure")
    p.set_defaults(handler=_cmd_eval)

    return parser


# ---------------------------------------------------------------------------
# handlers


def _require_out(args: argparse.Namespace) -> Path:
    if not args.out:
        raise CliUsageError("--out is required for this command")
    return Path(args.out)


def _resolve_jobs(args: argparse.Namespace) -> int:
    if args.jobs is not None:
        jobs = args.jobs
    else:
        raw = os.environ.get("MOR_SYNTH_JOBS", "1")
        try:
            jobs = int(raw)
        except ValueError:
            raise CliUsageError(f"MOR_SYNTH_JOBS must be an integer, got {raw!r}")
    if jobs < 1:
        raise CliUsageError(f"--jobs must be >= 1, got {jobs}")
    return jobs


def _match_by_stem(directory: Path, stem: str, suffixes: tuple[str, ...], role: str) -> Path:
    for suffix in suffixes:
        candidate = directory / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    raise ValueError(f"no {role} named {stem}{suffixes[0]} (or alternatives) in {directory}")


def _collect_specs(args: argparse.Namespace) -> list[SampleSpec]:
    background = Path(args.background)
    depth = Path(args.depth)
    cover = Path(args.cover) if args.cover else None
    if background.is_dir():
        if not depth.is_dir():
            raise CliUsageError("--depth must be a directory when --background is one")
        files = sorted(background.glob("*.png"))
        if not files:
            raise ValueError(f"no PNG files in {background}")
        if args.count is not None:
            if args.count < 1:
                raise CliUsageError(f"--count must be >= 1, got {args.count}")
            files = files[: args.count]
        specs = []
        for f in files:
            depth_path = _match_by_stem(depth, f.stem, (".pfm", ".png"), "depth map")
            cover_path = None
            if cover is not None:
                if cover.is_dir():
                    cover_path = _match_by_stem(cover, f.stem, (".png",), "cover image")
                else:
                    cover_path = cover
            specs.append(
                SampleSpec(id=f.stem, background=str(f), depth=str(depth_path), cover=str(cover_path) if cover_path else None)
            )
        return specs
    count = 1 if args.count is None else args.count
    if count < 1:
        raise CliUsageError(f"--count must be >= 1, got {count}")
    if cover is not None and cover.is_dir():
        raise CliUsageError("--cover must be a file when --background is a file")
    stem = background.stem
    return [
        SampleSpec(
            id=stem if count == 1 else f"{stem}_{index:04d}",
            background=str(background),
            depth=str(depth),
            cover=str(cover) if cover else None,
        )
        for index in range(count)
    ]


def _cmd_synth(args: argparse.Namespace) -> int:
    out_dir = _require_out(args)
    config = resolve_config(args)
    specs = _collect_specs(args)
    manifest = build_dataset(
        specs,
        config,
        master_seed=args.seed,
        out_dir=out_dir,
        jobs=_resolve_jobs(args),
        depth_scale=args.depth_scale,
        emit_decomposition=args.decompose,
    )
    print(f"built {len(manifest.samples)} sample(s) -> {out_dir / 'manifest.json'}")
    return 0


def _cmd_blend(args: argparse.Namespace) -> int:
    out_dir = _require_out(args)
    config = resolve_config(args)
    background = load_image(args.background)
    cover = load_image(args.cover)
    result = composite_with_mask(background, cover, config.blend)
    save_image(result.composite, out_dir / "composite.png")
    save_mask(result.drop_mask, out_dir / "drop_mask.png")
    covered = int(result.drop_mask.data.sum())
    print(f"wrote {out_dir / 'composite.png'} ({config.blend.mode} mode, {covered} masked pixels)")
    return 0


def _cmd_decompose(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.out_low and args.out_high:
        out_low, out_high = Path(args.out_low), Path(args.out_high)
    elif args.out_low or args.out_high:
        raise CliUsageError("--out-low and --out-high must be given together")
    else:
        out_dir = _require_out(args)
        out_low, out_high = out_dir / "low.png", out_dir / "high.png"
    decompose_to_files(args.input, config.rgf, out_low, out_high)
    print(f"wrote {out_low} and {out_high}")
    return 0


def _cmd_maps(args: argparse.Namespace) -> int:
    out_dir = _require_out(args)
    config = resolve_config(args)
    if args.cover and not args.background:
        raise CliUsageError("--cover requires --background")
    depth = load_depth(args.depth, png_scale=args.depth_scale)
    height, width = depth.shape
    if args.background:
        background = load_image(args.background)
        cover = load_image(args.cover) if args.cover else None
        _, maps = pipeline.build_sample(background, depth, cover, config, args.seed)
    else:
        pattern = rain.generate_streak_pattern(
            width, height, replace(config.streaks, seed=args.seed)
        )
        maps = rain.build_ground_truth(
            depth, pattern, config.rain, streak_threshold=config.streak_threshold
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    save_mask(maps.streak_mask, out_dir / "streak_mask.png")
    save_mask(maps.drop_mask, out_dir / "drop_mask.png")
    save_map(maps.haze, out_dir / "haze.png")
    save_map(maps.streaks, out_dir / "streaks.png")
    print(f"wrote 4 map PNGs -> {out_dir}")
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    if args.group_size < 1:
        raise CliUsageError(f"--group-size must be >= 1, got {args.group_size}")
    if args.train_per_group < 0 or args.test_per_group < 0:
        raise CliUsageError("per-group counts must be >= 0")
    if args.train_per_group + args.test_per_group > args.group_size:
        raise CliUsageError(
            f"cannot draw {args.train_per_group} train + {args.test_per_group} test "
            f"from groups of {args.group_size}"
        )
    manifest = Manifest.load(args.manifest)
    updated = split_manifest(
        manifest,
        group_size=args.group_size,
        per_group_train=args.train_per_group,
        per_group_test=args.test_per_group,
        seed=args.seed,
    )
    out_path = Path(args.out) if args.out else Path(args.manifest)
    updated.save(out_path)
    train = len(updated.split.get("train", ()))
    test = len(updated.split.get("test", ()))
    print(f"split {len(updated.groups)} groups: {train} train / {test} test -> {out_path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    report_path = Path(args.out) if args.out else Path("report.json")
    report = evaluate_to_report(args.pred, args.gt, report_path, figures=not args.no_figures)
    mean_psnr = "inf" if math.isinf(report.mean_psnr) else f"{report.mean_psnr:.4f}"
    print(
        f"evaluated {len(report.rows)} image(s): mean PSNR {mean_psnr} dB, "
        f"mean SSIM {report.mean_ssim:.4f} -> {report_path}"
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except CliUsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())
