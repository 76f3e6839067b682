"""Command-line entry point: ``sparseground {simulate,detect,evaluate,bench}``.

Exit codes: 0 on success (a partition fallback is only a warning), 2 on bad
input (unreadable or malformed files, invalid settings, unknown names).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .baselines import lpr_fit, vanilla_ransac
from .config import ConfigError, DetectConfig, load_config
from .evaluation import METHODS, IdMismatchError, bench_all, load_prediction, score
from .partition import detect_ground, write_labeling
from .ransac import HypothesisError
from .scan import CloudFormatError, load_cloud, organize, write_cloud
from .simulate import LidarConfig, canonical_scenes, load_scene, raycast
from .tangent import estimate_tangents


EXIT_OK = 0
EXIT_INPUT = 2

# flag name -> DetectConfig field
DETECT_FLAGS = {
    "epsilon": float,
    "delta_deg": float,
    "hypotheses": int,
    "grid_size": int,
    "min_quadrant_inliers": int,
    "crop_radius": float,
    "downsample": float,
    "rows": int,
    "cols": int,
}

ECHO_KEYS = ("epsilon", "delta_deg", "hypotheses", "grid_size", "min_quadrant_inliers",
             "crop_radius", "downsample", "seed")


class UsageError(Exception):
    pass


def _add_detect_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int, help="hypothesis sampling seed")
    for name, kind in DETECT_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), type=kind, default=None, dest=name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparseground", description="Ground detection for sparse lidar scans")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="raycast a scene into a labeled cloud CSV")
    p.add_argument("--scene", required=True, help="canonical scene name or scene file path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--azimuth-resolution", type=float, help="degrees per azimuth step")
    p.add_argument("--sensor-height", type=float)
    p.add_argument("--max-range", type=float)
    p.add_argument("--noise-sigma", type=float, help="range noise std, meters")

    p = sub.add_parser("detect", help="label ground points of a cloud CSV")
    p.add_argument("input")
    p.add_argument("--method", choices=METHODS, default="proposed")
    p.add_argument("-o", "--out", help="labeling CSV (default: <input stem>.ground.csv)")
    p.add_argument("--dump-tangents", metavar="PATH", help="also write per-point tangents")
    _add_detect_options(p)

    p = sub.add_parser("evaluate", help="score a labeling against a labeled cloud")
    p.add_argument("prediction", help="labeling CSV or labeled cloud CSV")
    p.add_argument("truth", help="labeled cloud CSV")
    p.add_argument("-o", "--out", help="also write the metrics as a CSV row")
    p.add_argument("--rows", type=int, default=DetectConfig().rows)

    p = sub.add_parser("bench", help="time the detection methods on one cloud")
    p.add_argument("input")
    p.add_argument("--method", choices=METHODS, action="append", dest="methods",
                   help="repeatable; default: all methods")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("-o", "--out", help="also write the report as CSV")
    _add_detect_options(p)
    return parser


def effective_config(args: argparse.Namespace) -> DetectConfig:
    """Built-in defaults, then the config file, then explicit flags."""
    config = load_config(args.config)
    overrides = {name: getattr(args, name) for name in DETECT_FLAGS}
    overrides["seed"] = args.seed
    return config.updated(**overrides)


def echo_config(config: DetectConfig) -> str:
    values = config.as_dict()
    return "config: " + " ".join(f"{k}={values[k]}" for k in ECHO_KEYS) + f" hash={config.digest()}"


# --------------------------------------------------------------------------
# commands

def _resolve_scene(name: str):
    scenes = canonical_scenes()
    if name in scenes:
        return scenes[name]
    if Path(name).is_file():
        return load_scene(name)
    raise UsageError(f"unknown scene {name!r}; available: {', '.join(sorted(scenes))} (or a scene file path)")


def cmd_simulate(args: argparse.Namespace) -> int:
    scene = _resolve_scene(args.scene)
    overrides = {
        "azimuth_resolution": args.azimuth_resolution,
        "sensor_height": args.sensor_height,
        "max_range": args.max_range,
        "noise_sigma": args.noise_sigma,
    }
    lidar = LidarConfig(**{k: v for k, v in overrides.items() if v is not None})
    cloud = raycast(scene, lidar, seed=args.seed)
    write_cloud(args.out, cloud)
    ground = int(cloud.label.sum()) if cloud.label is not None else 0
    print(f"scene {scene.name}: {len(cloud)} points ({ground} ground) -> {args.out}")
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    config = effective_config(args)
    print(echo_config(config))
    cloud = load_cloud(args.input, rows=config.rows)
    if args.method == "proposed":
        labeling = detect_ground(cloud, config)
    elif args.method == "vanilla":
        labeling = vanilla_ransac(cloud, config)[1]
    else:
        labeling = lpr_fit(cloud, config)
    out = Path(args.out) if args.out else Path(args.input).with_suffix(".ground.csv")
    sidecar = write_labeling(out, labeling, config)
    if args.dump_tangents:
        tangents = labeling.tangents
        if tangents is None:
            tangents = estimate_tangents(organize(cloud, config.rows, config.cols), config.max_gap,
                                         config.max_chord, config.tangent_support)
        tangents.write_csv(args.dump_tangents)
    if labeling.info.get("fallback"):
        print("warning: no feasible cross partition; labeled with a single plane")
    print(f"{args.method}: {labeling.ground_count}/{len(labeling)} points ground -> {out} (+ {sidecar.name})")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    prediction = load_prediction(args.prediction, rows=args.rows)
    truth = load_cloud(args.truth, rows=args.rows)
    metrics = score(prediction, truth)
    print(metrics.format())
    if args.out:
        row = metrics.as_dict()
        cells = ["" if v is None else (f"{v:.6f}" if isinstance(v, float) else str(v)) for v in row.values()]
        Path(args.out).write_text(",".join(row) + "\n" + ",".join(cells) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    config = effective_config(args)
    print(echo_config(config))
    cloud = load_cloud(args.input, rows=config.rows)
    methods: List[str] = list(dict.fromkeys(args.methods)) if args.methods else list(METHODS)
    report = bench_all(cloud, methods, args.runs, config)
    print(report.format())
    if args.out:
        Path(args.out).write_text(report.csv(), encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}

INPUT_ERRORS = (
    UsageError,
    CloudFormatError,
    ConfigError,
    IdMismatchError,
    HypothesisError,
    configparser.Error,
    OSError,
    ValueError,
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
