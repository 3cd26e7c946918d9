"""Command-line interface.

Subcommands: generate-data, train, infer, evaluate, ablate, print-config.
Exit codes: 0 success, 1 partial per-frame failures, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .config import (
    ConfigError,
    PipelineConfig,
    config_text,
    default_config,
    load_config,
    toy_config,
)
from .pipeline import evaluate_frames, generate_data, infer_frames, run_ablation, run_training

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _add_common(parser: argparse.ArgumentParser, *, config_required: bool = True):
    parser.add_argument("--config", required=config_required,
                        help="pipeline config YAML")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--variant", default=None,
                        help="override the config variant")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker threads for frame/window parallelism")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roaderase",
        description="Road obstacle detection by erasing: inpaint the "
                    "drivable area and score the discrepancy.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="build the synthetic training set")
    _add_common(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--force", action="store_true",
                   help="overwrite an existing dataset")

    p = sub.add_parser("train", help="train the discrepancy model")
    _add_common(p)
    p.add_argument("--data", required=True, help="generated dataset directory")
    p.add_argument("--out", required=True, help="run directory for checkpoint/history")

    p = sub.add_parser("infer", help="score frames into heatmaps")
    _add_common(p)
    p.add_argument("--frames", required=True, help="frame directory (images/, roi/ or sem/)")
    p.add_argument("--out", required=True, help="heatmap output directory")
    p.add_argument("--checkpoint", default=None, help="override the config checkpoint")

    p = sub.add_parser("evaluate", help="compute AP / FPR95 reports")
    _add_common(p)
    p.add_argument("--heatmaps", required=True, help="heatmap directory from infer")
    p.add_argument("--frames", required=True, help="frame directory with labels/ and roi/")
    p.add_argument("--out", required=True, help="report output directory")

    p = sub.add_parser("ablate", help="run several variants and tabulate metrics")
    _add_common(p)
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", required=True,
                   help="comma-separated variant names")

    p = sub.add_parser("print-config", help="print a config with all defaults")
    p.add_argument("--toy", action="store_true",
                   help="print the desk-scale toy preset instead")
    return parser


def _load(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
    if args.variant is not None:
        cfg.variant = args.variant
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    if getattr(args, "checkpoint", None):
        cfg.checkpoint = args.checkpoint
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    log = lambda msg: print(msg, file=sys.stderr)  # noqa: E731

    if args.command == "print-config":
        cfg = toy_config() if args.toy else default_config()
        print(config_text(cfg), end="")
        return EXIT_OK

    try:
        cfg = _load(args)
    except ConfigError as exc:
        log(f"config error: {exc}")
        return EXIT_CONFIG

    try:
        if args.command == "generate-data":
            generate_data(cfg, args.out, force=args.force, log=log)
            return EXIT_OK
        if args.command == "train":
            result = run_training(cfg, args.data, args.out, log=log)
            log(f"best epoch {result['best_epoch']} "
                f"val loss {result['best_val_loss']:.4f}")
            return EXIT_OK
        if args.command == "infer":
            manifest = infer_frames(cfg, args.frames, args.out, log=log)
            if manifest["failures"]:
                log(f"{len(manifest['failures'])} frame(s) failed")
                return EXIT_PARTIAL
            return EXIT_OK
        if args.command == "evaluate":
            evaluate_frames(cfg, args.heatmaps, args.frames, args.out, log=log)
            return EXIT_OK
        if args.command == "ablate":
            variants = [v.strip() for v in args.variants.split(",") if v.strip()]
            run_ablation(cfg, args.frames, args.out, variants, log=log)
            return EXIT_OK
    except ConfigError as exc:
        log(f"config error: {exc}")
        return EXIT_CONFIG
    except FileExistsError as exc:
        log(str(exc))
        return EXIT_CONFIG
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
