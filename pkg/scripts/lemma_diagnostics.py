"""Monte-Carlo pass rates of the confidence-set and per-level corruption events."""

import argparse
import sys

from corrupted_bandits.adversary import AttackConfig
from corrupted_bandits.env import EnvConfig
from corrupted_bandits.harness import (
    ExperimentConfig,
    coverage_diagnostic,
    level_corruption_diagnostic,
    run_experiment,
)


def run(agent: str, k: int, trials: int, delta: float, T: int, seed: int):
    cfg = ExperimentConfig(
        env=EnvConfig(d=10, T=T, K=20), attack=AttackConfig(k=k),
        agents=[agent], trials=trials, delta=delta, base_seed=seed,
    )
    return run_experiment(cfg, k)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--T", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    cov = coverage_diagnostic(run("robust_weighted_oful", 0, args.trials, 0.05, args.T, args.seed))
    print(f"robust coverage, k=0, delta=0.05: {cov['robust']:.3f} (target {cov['robust_target']:.2f})")
    cov = coverage_diagnostic(run("multilevel_weighted_oful", 50, args.trials, 0.05, args.T, args.seed))
    print(f"multi-level coverage, k=50, delta=0.05: {cov['multilevel']:.3f} (target {cov['multilevel_target']:.2f})")
    lvl = level_corruption_diagnostic(run("multilevel_weighted_oful", 100, args.trials, 0.1, args.T, args.seed), 0.1)
    print(f"per-level corruption, k=100, delta=0.1: {lvl['pass_rate']:.3f} (target {lvl['target']:.2f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
