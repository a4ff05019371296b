"""Linear bandit environment with heteroscedastic, clamped Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def default_mu_star(d: int) -> np.ndarray:
    return np.full(d, 1.0 / np.sqrt(d))


@dataclass
class EnvConfig:
    d: int = 10
    T: int = 2000
    K: int = 20
    A: float = 1.0
    B: float = 1.0
    R: float = 0.5
    sigma_max: float = 0.05
    mu_star: np.ndarray | None = None
    seed: int = 0
    per_action_noise: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"env.d: must be >= 1, got {self.d}")
        if self.mu_star is None:
            self.mu_star = default_mu_star(self.d)
        self.mu_star = np.asarray(self.mu_star, dtype=float)
        self.validate()

    def validate(self) -> None:
        if self.d < 1:
            raise ValueError(f"env.d: must be >= 1, got {self.d}")
        if self.T < 1:
            raise ValueError(f"env.T: must be >= 1, got {self.T}")
        if self.K < 1:
            raise ValueError(f"env.K: must be >= 1, got {self.K}")
        for name in ("A", "B", "R"):
            if not getattr(self, name) > 0:
                raise ValueError(f"env.{name}: must be positive, got {getattr(self, name)}")
        if self.sigma_max < 0:
            raise ValueError(f"env.sigma_max: must be nonnegative, got {self.sigma_max}")
        if self.mu_star.shape != (self.d,):
            raise ValueError(f"env.mu_star: expected {self.d} entries, got {self.mu_star.shape}")
        if np.linalg.norm(self.mu_star) > self.B + 1e-12:
            raise ValueError(f"env.mu_star: norm {np.linalg.norm(self.mu_star):.6g} exceeds B={self.B}")


@dataclass
class RoundContext:
    t: int
    actions: np.ndarray  # (K, d)
    sigma_t: float
    noise: np.ndarray  # (K,), identical entries unless per-action noise is on
    stoch_rewards: np.ndarray
    corrupted_rewards: np.ndarray | None = None
    phase: list = field(default_factory=list)

    @property
    def mean_rewards(self) -> np.ndarray:
        return self.stoch_rewards - self.noise


def _fresh_set(rng: np.random.Generator, cfg: EnvConfig) -> np.ndarray:
    half_width = 1.0 / np.sqrt(cfg.d)
    return rng.uniform(-half_width, half_width, size=(cfg.K, cfg.d))


class DecisionSets:
    """Stateful generator: fresh sets while t <= k, then one fixed set for good.

    The fixed set is drawn from the stream at the first uncorrupted round, so
    the draws of the corrupted phase do not depend on how long it lasts.
    """

    def __init__(self, cfg: EnvConfig, k: int):
        self.cfg = cfg
        self.k = k
        self.fixed: np.ndarray | None = None

    def __call__(self, rng: np.random.Generator, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError(f"round index must be >= 1, got {t}")
        if t <= self.k:
            return _fresh_set(rng, self.cfg)
        if self.fixed is None:
            self.fixed = _fresh_set(rng, self.cfg)
        return self.fixed


def gen_decision_set(rng, cfg: EnvConfig, t: int, k: int, cache: DecisionSets | None = None):
    """Functional form of ``DecisionSets``; pass the same ``cache`` across rounds."""
    if cache is None:
        cache = DecisionSets(cfg, k)
    return cache(rng, t)


def sample_sigma(rng: np.random.Generator, cfg: EnvConfig) -> float:
    return float(rng.uniform(0.0, cfg.sigma_max))


def sample_noise(rng: np.random.Generator, sigma_t: float, R: float, size=None):
    """N(0, sigma_t^2) clamped to [-R, R]."""
    raw = rng.normal(0.0, sigma_t, size=size)
    out = np.clip(raw, -R, R)
    return float(out) if size is None else out


def compute_gap(actions, mu_star) -> float:
    """Best reward minus the best reward outside the argmax set; inf if no such action."""
    actions = np.asarray(actions, dtype=float)
    if actions.ndim != 2 or actions.shape[0] == 0:
        raise ValueError("compute_gap needs a non-empty (K, d) action array")
    rewards = actions @ np.asarray(mu_star, dtype=float)
    best = rewards.max()
    rest = rewards[rewards < best]
    if rest.size == 0:
        return float("inf")
    return float(best - rest.max())


class Environment:
    """Round generator for one trial; all randomness comes from ``rng``."""

    def __init__(self, cfg: EnvConfig, k: int, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        self.sets = DecisionSets(cfg, k)

    def round(self, t: int) -> RoundContext:
        cfg = self.cfg
        actions = self.sets(self.rng, t)
        sigma_t = sample_sigma(self.rng, cfg)
        if cfg.per_action_noise:
            noise = sample_noise(self.rng, sigma_t, cfg.R, size=cfg.K)
        else:
            noise = np.full(cfg.K, sample_noise(self.rng, sigma_t, cfg.R))
        means = actions @ cfg.mu_star
        if np.abs(means).max() > 1.0 + 1e-12 or np.linalg.norm(actions, axis=1).max() > cfg.A + 1e-12:
            raise ValueError(f"round {t}: generated actions violate |a| <= A or |<a, mu*>| <= 1")
        ctx = RoundContext(t, actions, sigma_t, noise, means + noise)
        ctx.phase.append("env")
        return ctx

    def rounds(self, T: int | None = None):
        for t in range(1, (T or self.cfg.T) + 1):
            yield self.round(t)
