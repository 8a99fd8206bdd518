"""Command line entry point.

One subcommand per pipeline stage plus `run` (all stages), `synth`
(synthetic dataset generator) and `calibrate` (interaction radius search).
Every flag can also come from a key = value config file passed with
--config or the DRIVESTYLE_CONFIG environment variable; flags win.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import CONFIG_ENV_VAR, PipelineConfig, build_config, parse_config_file
from .errors import ConfigError, DriveStyleError
from .pipeline import (PIPELINE_STAGES, calibrate_radius, run_pipeline, run_stage)
from .synthgen import (DEFAULT_PROFILES, GenConfig, STYLES, generate_dataset,
                       write_dataset)

_STAGE_NAMES = tuple(name for name, _ in PIPELINE_STAGES)

# argparse dest -> config field for flags that do not match one to one
_DEST_TO_FIELD = {"k": "k_values", "format": "formats"}


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--input", help="recording dir, glob, or *_recordingMeta.csv")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--min-frames", dest="min_frames", type=int)
    parser.add_argument("--min-mean-speed", dest="min_mean_speed", type=float)
    parser.add_argument("--dv7-series", dest="dv7_series",
                        choices=["full", "positive"])
    parser.add_argument("--exceedance-alpha", dest="exceedance_alpha",
                        choices=["dv2", "subseries"])
    parser.add_argument("--scale", dest="scale",
                        action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--k", dest="k", action="append", type=int,
                        help="repeatable; cluster counts to fit")
    parser.add_argument("--report-k", dest="report_k", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--elbow-kmin", dest="elbow_kmin", type=int)
    parser.add_argument("--elbow-kmax", dest="elbow_kmax", type=int)
    parser.add_argument("--style-map", dest="style_map",
                        help="JSON file mapping cluster id to style name")
    parser.add_argument("--radius", type=float)
    parser.add_argument("--min-overlap-frames", dest="min_overlap_frames", type=int)
    parser.add_argument("--format", dest="format", action="append",
                        choices=["json", "csv"], help="repeatable; report formats")
    parser.add_argument("--threads", type=int)


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides = {}
    for dest, value in vars(args).items():
        if dest in ("command", "config", "target", "radius_min", "radius_max",
                    "step"):
            continue
        if value is None:
            continue
        overrides[_DEST_TO_FIELD.get(dest, dest)] = value
    return overrides


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config_path = args.config or os.environ.get(CONFIG_ENV_VAR)
    file_values = parse_config_file(config_path) if config_path else {}
    return build_config(file_values, _overrides_from_args(args))


def _parse_tracks_per_style(raw: str) -> dict[str, int]:
    parts = raw.split(",")
    if len(parts) != len(STYLES):
        raise ConfigError(
            f"--tracks-per-style wants {len(STYLES)} comma separated counts")
    try:
        counts = [int(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad --tracks-per-style value: {raw!r}") from exc
    return dict(zip(STYLES, counts))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivestyle",
        description="Volatility-based driving style analysis for roundabout "
                    "trajectory recordings.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in _STAGE_NAMES:
        stage_parser = sub.add_parser(name, help=f"run the {name} stage")
        _add_pipeline_flags(stage_parser)

    run_parser = sub.add_parser("run", help="run every stage in order")
    _add_pipeline_flags(run_parser)

    synth = sub.add_parser("synth", help="generate a synthetic recording")
    synth.add_argument("--output-dir", dest="output_dir", required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--tracks-per-style", dest="tracks_per_style",
                       help="conservative,normal,aggressive counts, e.g. 100,100,100")
    synth.add_argument("--duration-frames", dest="duration_frames", type=int,
                       default=500)
    synth.add_argument("--frame-rate", dest="frame_rate", type=float, default=25.0)
    synth.add_argument("--vru-count", dest="vru_count", type=int, default=0)
    synth.add_argument("--vru-placement", dest="vru_placement", type=float,
                       default=0.0)

    cal = sub.add_parser("calibrate",
                         help="search for the interaction radius hitting a "
                              "target interacting-driver count")
    _add_pipeline_flags(cal)
    cal.add_argument("--target", type=int, required=True)
    cal.add_argument("--radius-min", dest="radius_min", type=float, default=0.5)
    cal.add_argument("--radius-max", dest="radius_max", type=float, default=50.0)
    cal.add_argument("--step", type=float, default=0.25)
    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    kwargs = {
        "duration_frames": args.duration_frames,
        "frame_rate": args.frame_rate,
        "vru_count": args.vru_count,
        "vru_placement": args.vru_placement,
        "seed": args.seed,
        "profiles": dict(DEFAULT_PROFILES),
    }
    if args.tracks_per_style:
        kwargs["tracks_per_style"] = _parse_tracks_per_style(args.tracks_per_style)
    config = GenConfig(**kwargs)
    recording, truth = generate_dataset(config)
    for path in write_dataset(recording, truth, args.output_dir):
        print(path)
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    result = calibrate_radius(cfg, args.target, radius_min=args.radius_min,
                              radius_max=args.radius_max, step=args.step)
    if result is None:
        print(f"target {args.target} not reachable at radius "
              f"{args.radius_max}", file=sys.stderr)
        return 2
    radius, count = result
    print(f"radius={radius} drivers={count}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "calibrate":
            return _cmd_calibrate(args)
        cfg = _load_config(args)
        if args.command == "run":
            written = run_pipeline(cfg)
        else:
            written = run_stage(args.command, cfg)
        for path in dict.fromkeys(str(p) for p in written):
            print(path)
        return 0
    except DriveStyleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
