"""Regret-vs-rounds panels at desk scale, with a final-regret table per corruption value."""

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from corrupted_bandits.harness import aggregate, load_config, run_experiment
from corrupted_bandits.outputs import emit_outputs

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "desk.ini"))
    ap.add_argument("--out", default="results/desk")
    ap.add_argument("--trials", type=int)
    args = ap.parse_args(argv)

    cfg = load_config(args.config)
    if args.trials:
        cfg = replace(cfg, trials=args.trials)
    results_by_k = {}
    for k in cfg.grid:
        results = run_experiment(cfg, k, diagnostics=False)
        results_by_k[k] = results
        s = aggregate(results)
        c_norm = np.mean([r.total_C for r in results])
        print(f"k={k} (C={2 * k}, normalized {c_norm:.1f})")
        for name in cfg.agents:
            finals = np.array([r.cum_regret[name][-1] for r in results])
            print(f"  {name:<26} {s.mean[name][-1]:8.1f} +- {finals.std(ddof=1) / math.sqrt(len(finals)):.1f}")
    emit_outputs(results_by_k, cfg, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
