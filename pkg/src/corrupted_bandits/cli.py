"""Command line entry point: run / diagnose / plot."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    ConfigError,
    coverage_diagnostic,
    level_corruption_diagnostic,
    load_config,
    run_experiment,
)
from .outputs import emit_outputs, replot

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
DIAGNOSTIC_AGENTS = ["robust_weighted_oful", "multilevel_weighted_oful"]

log = logging.getLogger("corrupted_bandits")


def _load(args):
    cfg = load_config(args.config)
    overrides = {"output_dir": str(args.out)}
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        overrides["base_seed"] = args.seed
    if getattr(args, "independent_streams", False):
        overrides["independent_streams"] = True
    return replace(cfg, **overrides)


def cmd_run(args) -> int:
    cfg = _load(args)
    results_by_k = {}
    for k in cfg.grid:
        log.info("k=%d: %d trials x %d rounds", k, cfg.trials, cfg.env.T)
        results_by_k[k] = run_experiment(cfg, k)
    for path in emit_outputs(results_by_k, cfg, args.out):
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = _load(args)
    cfg = replace(cfg, agents=DIAGNOSTIC_AGENTS)
    report = {}
    results_by_k = {}
    for k in cfg.grid:
        results = run_experiment(cfg, k)
        results_by_k[k] = results
        entry = coverage_diagnostic(results)
        entry["level_corruption"] = level_corruption_diagnostic(results, cfg.delta)
        report[str(k)] = entry
        print(f"k={k}: " + ", ".join(
            f"{name}={val:.3f}" for name, val in entry.items() if isinstance(val, float)
        ) + f", level_corruption={entry['level_corruption']['pass_rate']:.3f}")
    emit_outputs(results_by_k, cfg, args.out, extra_manifest={"diagnostics": report})
    with open(Path(args.out) / "diagnostics.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def cmd_plot(args) -> int:
    for path in replot(args.in_dir):
        log.info("wrote %s", path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corrupted-bandits", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate every agent over the corruption grid")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--independent-streams", action="store_true",
                     help="give each agent its own environment realization")
    run.set_defaults(func=cmd_run)

    diag = sub.add_parser("diagnose", help="confidence-set and per-level corruption pass rates")
    diag.add_argument("--config", required=True)
    diag.add_argument("--out", required=True, type=Path)
    diag.set_defaults(func=cmd_diagnose)

    plot = sub.add_parser("plot", help="re-emit SVG plots from regret CSVs")
    plot.add_argument("--in", dest="in_dir", required=True, type=Path)
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
