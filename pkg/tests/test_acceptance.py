"""Acceptance criteria, each checked at its stated tolerance.

Every check prints one PASS/FAIL line (also collected in the pytest terminal
summary). Run directly with ``python3 -m tests.test_acceptance`` for the lines alone.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from corrupted_bandits.adversary import AttackConfig
from corrupted_bandits.agents import level_probabilities, num_levels, sample_level
from corrupted_bandits.env import EnvConfig
from corrupted_bandits.harness import (
    ExperimentConfig,
    aggregate,
    coverage_diagnostic,
    level_corruption_diagnostic,
    run_experiment,
)
from corrupted_bandits.linalg import Ellipsoid, ellipsoid_ucb, ellipsoids_intersect, min_distance_in, ridge_init, ridge_update

from .conftest import ACCEPTANCE_LINES, boundary_points, members, random_ellipsoid, uniform_in

pytestmark = pytest.mark.slow

DESK_AGENTS = ["oful", "weighted_oful", "robust_weighted_oful", "multilevel_weighted_oful", "greedy"]


def report(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pooled_sd(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt((np.var(a, ddof=1) + np.var(b, ddof=1)) / 2.0)


def final_regrets(results, name) -> np.ndarray:
    return np.array([r.cum_regret[name][-1] for r in results])


# -- 1: qualitative ordering at desk scale -----------------------------------

def check_desk_ordering() -> bool:
    cfg = ExperimentConfig(
        env=EnvConfig(d=10, T=2000, K=20, R=0.5, sigma_max=0.05), attack=AttackConfig(k=0),
        agents=DESK_AGENTS, trials=10, delta=0.01, base_seed=20240101,
    )
    start = time.perf_counter()
    parts, ok = [], True

    res0 = run_experiment(cfg, 0, diagnostics=False)
    w, o = final_regrets(res0, "weighted_oful"), final_regrets(res0, "oful")
    a_ok = w.mean() <= o.mean()
    ok &= a_ok
    parts.append(f"(a) k=0 woful {w.mean():.1f} <= oful {o.mean():.1f}: {a_ok}")

    for k in (60, 200):
        res = run_experiment(cfg, k, diagnostics=False)
        ml = final_regrets(res, "multilevel_weighted_oful")
        for rival in ("oful", "weighted_oful", "greedy"):
            other = final_regrets(res, rival)
            margin = pooled_sd(ml, other)
            sub = ml.mean() < other.mean() - margin
            ok &= sub
            parts.append(f"k={k} ml {ml.mean():.1f} < {rival} {other.mean():.1f} - {margin:.1f}: {sub}")
        rob = final_regrets(res, "robust_weighted_oful")
        margin = pooled_sd(rob, ml)
        sub = rob.mean() <= ml.mean() + margin
        ok &= sub
        parts.append(f"k={k} robust {rob.mean():.1f} <= ml {ml.mean():.1f} + {margin:.1f}: {sub}")

    elapsed = time.perf_counter() - start
    budget = elapsed < 300
    ok &= budget
    parts.append(f"runtime {elapsed:.0f}s < 300s: {budget}")
    return report(1, bool(ok), "; ".join(parts))


# -- 2 and 3: confidence-set coverage ----------------------------------------

def check_robust_coverage() -> bool:
    cfg = ExperimentConfig(
        env=EnvConfig(d=10, T=500, K=20), attack=AttackConfig(k=0),
        agents=["robust_weighted_oful"], trials=200, delta=0.05, base_seed=2,
    )
    cov = coverage_diagnostic(run_experiment(cfg, 0))
    rate = cov["robust"]
    return report(2, rate >= 0.93, f"robust coverage {rate:.3f} over 200 trials (threshold 0.93)")


def check_multilevel_coverage() -> bool:
    cfg = ExperimentConfig(
        env=EnvConfig(d=10, T=500, K=20), attack=AttackConfig(k=50),
        agents=["multilevel_weighted_oful"], trials=200, delta=0.05, base_seed=3,
    )
    cov = coverage_diagnostic(run_experiment(cfg, 50))
    rate = cov["multilevel"]
    return report(3, rate >= 0.80, f"multi-level coverage {rate:.3f} over 200 trials at k=50 (threshold 0.80)")


# -- 4: per-level corruption -------------------------------------------------

def check_level_corruption() -> bool:
    cfg = ExperimentConfig(
        env=EnvConfig(d=10, T=500, K=20), attack=AttackConfig(k=100),
        agents=["multilevel_weighted_oful"], trials=500, delta=0.1, base_seed=4,
    )
    res = level_corruption_diagnostic(run_experiment(cfg, 100), 0.1)
    rate = res["pass_rate"]
    return report(4, rate >= 0.86, f"per-level corruption bound held in {rate:.3f} of 500 trials (threshold 0.86)")


# -- 5: incremental ridge vs direct solve ------------------------------------

def check_linalg_oracle() -> bool:
    rng = np.random.default_rng(5)
    worst_inc, worst_ref = 0.0, 0.0
    for _ in range(100):
        d = int(rng.integers(1, 51))
        n = int(rng.integers(1, 1001))
        A = rng.uniform(-1, 1, size=(n, d)) / np.sqrt(d)
        y = rng.normal(size=n)
        sb = rng.uniform(0.3, 2.0, size=n)
        state = ridge_init(d, 1.0)
        for a, r, s in zip(A, y, sb):
            ridge_update(state, a, r, s)
        w = 1.0 / sb**2
        direct = np.linalg.solve(np.eye(d) + (A.T * w) @ A, A.T @ (w * y))
        scale = max(np.linalg.norm(direct), 1e-300)
        worst_inc = max(worst_inc, np.linalg.norm(state.estimate - direct) / scale)
        state.refactorize()
        worst_ref = max(worst_ref, np.linalg.norm(state.estimate - direct) / scale)
    ok = worst_inc <= 1e-8 and worst_ref <= 1e-12
    return report(5, ok, f"max relative error incremental {worst_inc:.2e} (<=1e-8), refactorized {worst_ref:.2e} (<=1e-12)")


# -- 6: level sampling distribution ------------------------------------------

def check_level_sampling() -> bool:
    l_max = num_levels(1000)
    n = 1_000_000
    draws = sample_level(np.random.default_rng(6), l_max, size=n)
    p = level_probabilities(l_max)
    closed = np.array([0.5 + 2.0**-l_max] + [2.0**-lv for lv in range(2, l_max + 1)])
    counts = np.bincount(draws, minlength=l_max + 1)[1:]
    z = np.abs(counts / n - closed) / np.sqrt(closed * (1 - closed) / n)
    chi2 = float(((counts - n * closed) ** 2 / (n * closed)).sum())
    q = float(stats.chi2.ppf(0.999, l_max - 1))
    ok = l_max == 11 and np.allclose(p, closed, rtol=0, atol=1e-15) and z.max() <= 4 and chi2 < q
    return report(6, ok, f"l_max={l_max}, max |z|={z.max():.2f} (<=4), chi2={chi2:.2f} < {q:.2f}")


# -- 7: growth ratio ---------------------------------------------------------

def check_growth_ratio() -> bool:
    T = 1000
    k = int(math.floor(T**0.2))
    means = {}
    for horizon in (T, 2 * T):
        cfg = ExperimentConfig(
            env=EnvConfig(d=10, T=horizon, K=20), attack=AttackConfig(k=k),
            agents=["multilevel_weighted_oful"], trials=20, delta=0.01, base_seed=7,
        )
        s = aggregate(run_experiment(cfg, k, diagnostics=False))
        means[horizon] = float(s.mean["multilevel_weighted_oful"][-1])
    ratio = means[2 * T] / means[T]
    return report(7, ratio <= 1.9, f"Regret(2000)/Regret(1000) = {means[2 * T]:.1f}/{means[T]:.1f} = {ratio:.3f} (<=1.9), k={k}")


# -- 8: ellipsoid geometry ---------------------------------------------------

def check_geometry() -> bool:
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        e = random_ellipsoid(rng)
        a = rng.normal(size=2)
        worst = max(worst, abs(ellipsoid_ucb(e, a) - (boundary_points(e, 1_000_000) @ a).max()))
    ucb_ok = worst <= 1e-3

    bad, near, hits = 0, 0, 0
    for _ in range(50):
        e1, e2 = random_ellipsoid(rng, spread=2.0), random_ellipsoid(rng, spread=2.0)
        sampled = bool(members(e2, uniform_in(e1, 100_000, rng)).any())
        said = ellipsoids_intersect(e1, e2)
        hits += said
        if said != sampled:
            # only acceptable where the pair is within 1% of tangency
            gap = abs(min_distance_in(e1, e2) - e2.radius) / e2.radius
            if gap <= 1e-2:
                near += 1
            else:
                bad += 1
    inter_ok = bad == 0
    detail = (f"ucb max error {worst:.1e} (<=1e-3); intersection disagreements {bad} "
              f"away from tangency, {near} near tangency, {hits}/50 intersecting")
    return report(8, ucb_ok and inter_ok, detail)


CHECKS = [
    check_desk_ordering,
    check_robust_coverage,
    check_multilevel_coverage,
    check_level_corruption,
    check_linalg_oracle,
    check_level_sampling,
    check_growth_ratio,
    check_geometry,
]


def test_criterion_1_desk_ordering():
    assert check_desk_ordering()


def test_criterion_2_robust_coverage():
    assert check_robust_coverage()


def test_criterion_3_multilevel_coverage():
    assert check_multilevel_coverage()


def test_criterion_4_level_corruption():
    assert check_level_corruption()


def test_criterion_5_linalg_oracle():
    assert check_linalg_oracle()


def test_criterion_6_level_sampling():
    assert check_level_sampling()


def test_criterion_7_growth_ratio():
    assert check_growth_ratio()


def test_criterion_8_geometry():
    assert check_geometry()


if __name__ == "__main__":
    for check in CHECKS:
        check()
