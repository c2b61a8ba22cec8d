"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from trac.config import ConfigError, parse_config
from trac.pipeline import STAGES, VARIANTS, StageError, run_ablation, run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 1, 2

# subcommand -> stages it runs
_SINGLE = {"gen-data": ("generate",), "build": ("build",), "pretrain": ("pretrain",), "train": ("train",),
           "evaluate": ("evaluate",)}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' file")
    p.add_argument("--profile", choices=("full", "desk"), help="preset applied before the config file")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--dataset", help="existing dataset.jsonl (skips generation)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; repeatable")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trac", description="Offline safe RL as contrastive trajectory classification")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("gen-data", "generate the PointHazard dataset"),
                            ("build", "select desirable/undesirable trajectories and write partition.csv"),
                            ("pretrain", "behavior-clone the reference policy and the bc_safe baseline"),
                            ("train", "train the learner with the contrastive loss"),
                            ("evaluate", "evaluate checkpoints and write eval/summary CSVs")]:
        _common(sub.add_parser(name, help=help_text))
    run = sub.add_parser("run", help="all stages per seed")
    _common(run)
    run.add_argument("--stage", choices=STAGES, default=STAGES[0], help="first stage to run; earlier ones are loaded")
    run.add_argument("--plot", action="store_true", help="render figures after evaluation")
    ablate = sub.add_parser("ablate", help="loss/reference ablations or a parameter sweep")
    _common(ablate)
    ablate.add_argument("variant", choices=VARIANTS + ("sweep",))
    ablate.add_argument("--param", help="config key to sweep")
    ablate.add_argument("--values", help="comma-separated sweep values")
    plot = sub.add_parser("plot", help="render SVG figures and point CSVs for an output directory")
    _common(plot)
    return parser


def _config_from_args(args):
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    for key in ("out_dir", "seeds", "dataset"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    return parse_config(args.config, overrides, args.profile)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "plot":
            from trac.plotting import plot_run

            for path in plot_run(cfg.out_dir, cfg.cost_threshold):
                print(path)
            return EXIT_OK
        if args.command == "ablate":
            values = [v for v in (args.values or "").split(",") if v]
            try:
                res = run_ablation(cfg, args.variant, args.param, values)
            except ValueError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            names = dict.fromkeys(n for n, _ in res.reports)
            for name in names:
                nr, nc = res.aggregate(name)
                print(f"{name},{nr!r},{nc!r}")
            print(res.path)
            return EXIT_OK
        if args.command == "run":
            stages = STAGES[STAGES.index(args.stage):]
        else:
            stages = _SINGLE[args.command]
        result = run_pipeline(cfg, stages)
        if "evaluate" in stages:
            print("method,normalized_reward,normalized_cost,safe")
            for method in dict.fromkeys(m for m, _ in result.reports):
                nr, nc = result.aggregate(method)
                print(f"{method},{nr!r},{nc!r},{int(nc <= 1.0)}")
        if args.command == "run" and args.plot:
            from trac.plotting import plot_run

            for path in plot_run(cfg.out_dir, cfg.cost_threshold):
                print(path)
        return EXIT_OK
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
