"""Reward corruption and the corruption-budget ledger."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .env import RoundContext

NO_LEVEL = 0  # level tag for agents without sub-sampled estimators


class Strategy(str, Enum):
    FLIP = "flip"
    NONE = "none"


@dataclass
class AttackConfig:
    k: int = 0
    strategy: Strategy = Strategy.FLIP

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.k < 0:
            raise ValueError(f"attack.k: must be >= 0, got {self.k}")

    def validate(self, T: int) -> None:
        if self.k > T:
            raise ValueError(f"attack.k: {self.k} exceeds horizon T={T}")


def corrupt_round(ctx: RoundContext, cfg: AttackConfig, mu_star) -> RoundContext:
    """Fill ``ctx.corrupted_rewards``; the flip attack negates the mean reward during t <= k."""
    if cfg.strategy is Strategy.FLIP and ctx.t <= cfg.k:
        ctx.corrupted_rewards = -(ctx.actions @ np.asarray(mu_star, dtype=float)) + ctx.noise
    else:
        ctx.corrupted_rewards = ctx.stoch_rewards.copy()
    ctx.phase.append("adversary")
    return ctx


def round_sup_diff(ctx: RoundContext) -> float:
    return float(np.abs(ctx.stoch_rewards - ctx.corrupted_rewards).max())


@dataclass
class CorruptionLedger:
    R: float
    per_round_sup: list = field(default_factory=list)
    total_C: float = 0.0
    per_level: dict = field(default_factory=lambda: defaultdict(float))
    levels_played: list = field(default_factory=list)

    @property
    def total_unnormalized(self) -> float:
        """Sum of per-round sup differences without the 1/(R+1) factor."""
        return float(sum(self.per_round_sup))

    def level_trajectory(self, level: int) -> np.ndarray:
        """Corruption accumulated by ``level`` after each round."""
        sup = np.asarray(self.per_round_sup)
        hits = np.asarray(self.levels_played) == level
        return np.cumsum(np.where(hits, sup, 0.0)) / (self.R + 1.0)


def ledger_update(ledger: CorruptionLedger, ctx: RoundContext, level_played: int = NO_LEVEL, R=None):
    R = ledger.R if R is None else R
    sup = round_sup_diff(ctx)
    ledger.per_round_sup.append(sup)
    ledger.levels_played.append(int(level_played))
    inc = sup / (R + 1.0)
    ledger.total_C += inc
    ledger.per_level[int(level_played)] += inc
    return ledger
