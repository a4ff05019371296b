import numpy as np
import pytest

from corrupted_bandits.adversary import (
    AttackConfig,
    CorruptionLedger,
    Strategy,
    corrupt_round,
    ledger_update,
)
from corrupted_bandits.env import EnvConfig, Environment, RoundContext


def make_round(t, mean, noise):
    actions = np.array([[mean]])
    eps = np.array([noise])
    return RoundContext(t, actions, 0.01, eps, actions @ np.array([1.0]) + eps)


def test_flip_formula():
    ctx = corrupt_round(make_round(1, 0.6, 0.1), AttackConfig(k=5), np.array([1.0]))
    assert ctx.corrupted_rewards[0] == pytest.approx(-0.5)
    assert ctx.stoch_rewards[0] == pytest.approx(0.7)
    assert abs(ctx.corrupted_rewards[0] - ctx.stoch_rewards[0]) == pytest.approx(1.2)


def test_uncorrupted_phase_is_identity():
    ctx = corrupt_round(make_round(6, 0.6, 0.1), AttackConfig(k=5), np.array([1.0]))
    np.testing.assert_array_equal(ctx.corrupted_rewards, ctx.stoch_rewards)
    ledger = ledger_update(CorruptionLedger(0.5), ctx)
    assert ledger.per_round_sup == [0.0]
    assert ledger.total_C == 0.0


def test_null_adversary():
    cfg = EnvConfig(d=4, K=5)
    env = Environment(cfg, 10, np.random.default_rng(0))
    ledger = CorruptionLedger(cfg.R)
    for t in range(1, 50):
        ctx = corrupt_round(env.round(t), AttackConfig(k=10, strategy="none"), cfg.mu_star)
        np.testing.assert_array_equal(ctx.corrupted_rewards, ctx.stoch_rewards)
        ledger_update(ledger, ctx)
    assert ledger.total_C == 0.0


def test_attack_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(k=-1)
    with pytest.raises(ValueError):
        AttackConfig(strategy="targeted")
    with pytest.raises(ValueError):
        AttackConfig(k=20).validate(T=10)
    assert AttackConfig(strategy="flip").strategy is Strategy.FLIP


def test_normalization_arithmetic():
    ledger = CorruptionLedger(0.5)
    for sup in (1.2, 0.3):
        ctx = make_round(1, 0.0, 0.0)
        ctx.corrupted_rewards = ctx.stoch_rewards + sup
        ledger_update(ledger, ctx, level_played=1)
    assert ledger.total_C == pytest.approx(1.0)
    assert ledger.total_unnormalized == pytest.approx(1.5)


def test_flip_ledger_against_replay():
    cfg = EnvConfig(d=10, K=20)
    k = 40
    env = Environment(cfg, k, np.random.default_rng(3))
    attack = AttackConfig(k=k)
    rng_levels = np.random.default_rng(4)
    ledger = CorruptionLedger(cfg.R)
    stored = []
    prev = 0.0
    for t in range(1, 101):
        ctx = corrupt_round(env.round(t), attack, cfg.mu_star)
        stored.append(ctx)
        ledger_update(ledger, ctx, level_played=int(rng_levels.integers(1, 5)))
        assert ledger.total_C >= prev
        prev = ledger.total_C
    # replay oracle: recompute the sup differences from the stored rounds
    replay = sum(
        max(abs(2.0 * float(a @ cfg.mu_star)) for a in ctx.actions) for ctx in stored[:k]
    ) / (cfg.R + 1)
    assert ledger.total_C == pytest.approx(replay, rel=1e-12)
    assert ledger.total_C <= 2 * k / (cfg.R + 1)
    assert sum(ledger.per_level.values()) == pytest.approx(ledger.total_C, abs=1e-12)
    assert all(v >= 0 for v in ledger.per_level.values())
    for lv in ledger.per_level:
        assert ledger.level_trajectory(lv)[-1] == pytest.approx(ledger.per_level[lv], abs=1e-12)


def test_zero_k_means_zero_corruption():
    cfg = EnvConfig(d=3, K=4)
    env = Environment(cfg, 0, np.random.default_rng(5))
    ledger = CorruptionLedger(cfg.R)
    for t in range(1, 30):
        ledger_update(ledger, corrupt_round(env.round(t), AttackConfig(k=0), cfg.mu_star))
    assert ledger.total_C == 0.0
