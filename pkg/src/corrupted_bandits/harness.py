"""Experiment orchestration: seeded trials, pseudo-regret, and confidence-event diagnostics."""

from __future__ import annotations

import configparser
import hashlib
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adversary import NO_LEVEL, AttackConfig, CorruptionLedger, Strategy, corrupt_round, ledger_update
from .agents import (
    AGENT_KINDS,
    ConfidenceParams,
    MultiLevelWeightedOFUL,
    level_cbar,
    make_agent,
    radius_alpha,
    radius_beta,
    radius_gamma,
)
from .env import EnvConfig, Environment

WORKERS_ENV = "CORRUPTED_BANDITS_WORKERS"
ENV_STREAM = 1


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the offending field path."""


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    agents: list = field(default_factory=lambda: list(AGENT_KINDS))
    trials: int = 10
    delta: float = 0.01
    base_seed: int = 0
    output_dir: str = "results"
    corruption_grid: list = field(default_factory=list)
    independent_streams: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError(f"experiment.trials: must be >= 1, got {self.trials}")
        if not 0 < self.delta < 1 / 3:
            raise ConfigError(f"experiment.delta: must lie in (0, 1/3), got {self.delta}")
        if self.base_seed < 0 or self.base_seed >= 2**64:
            raise ConfigError(f"experiment.base_seed: must be a 64-bit unsigned integer, got {self.base_seed}")
        for name in self.agents:
            if name not in AGENT_KINDS:
                raise ConfigError(f"experiment.agents: unknown agent {name!r}")
        if self.attack.k > self.env.T:
            raise ConfigError(f"attack.k: {self.attack.k} exceeds horizon T={self.env.T}")
        for k in self.corruption_grid:
            if not 0 <= k <= self.env.T:
                raise ConfigError(f"experiment.corruption_grid: value {k} outside [0, T={self.env.T}]")

    @property
    def grid(self) -> list[int]:
        return list(self.corruption_grid) or [self.attack.k]


def _parse_list(raw: str, cast, path: str) -> list:
    items = [x.strip() for x in raw.split(",") if x.strip()]
    try:
        return [cast(x) for x in items]
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_bool(raw: str, path: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{path}: expected a boolean, got {raw!r}")


_ENV_KEYS = {"d": int, "T": int, "K": int, "A": float, "B": float, "R": float, "sigma_max": float, "seed": int}
_EXP_KEYS = {"agents", "trials", "delta", "base_seed", "output_dir", "corruption_grid", "independent_streams"}


def config_from_mapping(sections: dict) -> ExperimentConfig:
    """Build a config from {section: {key: str}}; unknown sections or keys are errors."""
    for sec in sections:
        if sec not in ("env", "attack", "experiment"):
            raise ConfigError(f"{sec}: unknown section")
    env_kw = {}
    for key, raw in sections.get("env", {}).items():
        path = f"env.{key}"
        if key in _ENV_KEYS:
            try:
                env_kw[key] = _ENV_KEYS[key](raw)
            except ValueError:
                raise ConfigError(f"{path}: cannot parse {raw!r}") from None
        elif key == "mu_star":
            env_kw[key] = np.array(_parse_list(raw, float, path))
        elif key == "per_action_noise":
            env_kw[key] = _parse_bool(raw, path)
        else:
            raise ConfigError(f"{path}: unknown key")
    att_kw = {}
    for key, raw in sections.get("attack", {}).items():
        path = f"attack.{key}"
        if key == "k":
            try:
                att_kw["k"] = int(raw)
            except ValueError:
                raise ConfigError(f"{path}: cannot parse {raw!r}") from None
        elif key == "strategy":
            if raw.strip() not in {s.value for s in Strategy}:
                raise ConfigError(f"{path}: expected flip or none, got {raw!r}")
            att_kw["strategy"] = raw.strip()
        else:
            raise ConfigError(f"{path}: unknown key")
    exp_kw = {}
    for key, raw in sections.get("experiment", {}).items():
        path = f"experiment.{key}"
        if key not in _EXP_KEYS:
            raise ConfigError(f"{path}: unknown key")
        try:
            if key == "agents":
                exp_kw[key] = _parse_list(raw, str, path)
            elif key == "corruption_grid":
                exp_kw[key] = _parse_list(raw, int, path)
            elif key in ("trials", "base_seed"):
                exp_kw[key] = int(raw)
            elif key == "delta":
                exp_kw[key] = float(raw)
            elif key == "independent_streams":
                exp_kw[key] = _parse_bool(raw, path)
            else:
                exp_kw[key] = raw.strip()
        except ValueError:
            raise ConfigError(f"{path}: cannot parse {raw!r}") from None
    try:
        env = EnvConfig(**env_kw)
    except ValueError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith("env.") else f"env: {msg}") from None
    try:
        attack = AttackConfig(**att_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(env=env, attack=attack, **exp_kw)


def load_config(path) -> ExperimentConfig:
    """Read an INI-style config (sections env / attack / experiment) or a run manifest."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        import json

        return config_from_mapping(json.loads(text)["config"])
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys like T, K are case sensitive
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_mapping({s: dict(parser[s]) for s in parser.sections()})


def config_to_mapping(cfg: ExperimentConfig) -> dict:
    e = cfg.env
    return {
        "env": {
            "d": str(e.d), "T": str(e.T), "K": str(e.K), "A": repr(e.A), "B": repr(e.B),
            "R": repr(e.R), "sigma_max": repr(e.sigma_max), "seed": str(e.seed),
            "mu_star": ",".join(repr(float(x)) for x in e.mu_star),
            "per_action_noise": str(e.per_action_noise).lower(),
        },
        "attack": {"k": str(cfg.attack.k), "strategy": cfg.attack.strategy.value},
        "experiment": {
            "agents": ",".join(cfg.agents),
            "trials": str(cfg.trials),
            "delta": repr(cfg.delta),
            "base_seed": str(cfg.base_seed),
            "output_dir": cfg.output_dir,
            "corruption_grid": ",".join(str(k) for k in cfg.corruption_grid),
            "independent_streams": str(cfg.independent_streams).lower(),
        },
    }


def stream_rng(base_seed: int, trial_index: int, *key) -> np.random.Generator:
    """Named, independent random stream for one trial."""
    words = []
    for part in key:
        words.append(zlib.crc32(part.encode()) if isinstance(part, str) else int(part))
    return np.random.default_rng(np.random.SeedSequence([base_seed, trial_index, *words]))


def pseudo_regret_round(actions, mu_star, chosen) -> float:
    """Best mean reward in the set minus the chosen action's; ``chosen`` is an index or a vector."""
    actions = np.asarray(actions, dtype=float)
    means = actions @ np.asarray(mu_star, dtype=float)
    if np.ndim(chosen) == 0:
        idx = int(chosen)
        if not 0 <= idx < actions.shape[0]:
            raise ValueError(f"chosen index {idx} outside the decision set")
        value = means[idx]
    else:
        hits = np.flatnonzero(np.all(actions == np.asarray(chosen, dtype=float), axis=1))
        if hits.size == 0:
            raise ValueError("chosen action is not in the decision set")
        value = means[hits[0]]
    return float(max(means.max() - value, 0.0))


def ell_star(C: float) -> int:
    """Robust threshold level max{2, ceil(log2 C)}."""
    if C <= 4.0:
        return 2
    return max(2, math.ceil(math.log2(C)))


@dataclass
class TrialResult:
    trial_index: int
    k: int
    T: int
    instant_regret: dict  # agent -> (T,) array
    chosen: dict  # agent -> (T,) int array
    index_value: dict  # agent -> (T,) optimistic index of the chosen action
    ledger: CorruptionLedger
    env_hash: dict  # agent -> sha256 of the environment stream it faced
    diagnostics: dict = field(default_factory=dict)

    @property
    def cum_regret(self) -> dict:
        return {name: np.cumsum(v) for name, v in self.instant_regret.items()}

    @property
    def total_C(self) -> float:
        return self.ledger.total_C


def _generate_rounds(cfg: ExperimentConfig, k: int, rng: np.random.Generator):
    env = Environment(cfg.env, k, rng)
    attack = AttackConfig(k=k, strategy=cfg.attack.strategy)
    rounds = []
    digest = hashlib.sha256()
    for t in range(1, cfg.env.T + 1):
        ctx = corrupt_round(env.round(t), attack, cfg.env.mu_star)
        digest.update(ctx.actions.tobytes())
        digest.update(ctx.noise.tobytes())
        digest.update(np.float64(ctx.sigma_t).tobytes())
        rounds.append(ctx)
    return rounds, digest.hexdigest()


def _realized_C(rounds, R: float) -> float:
    ledger = CorruptionLedger(R)
    for ctx in rounds:
        ledger_update(ledger, ctx)
    return ledger.total_C


def _play(agent, rounds, cfg: ExperimentConfig, diag: dict | None):
    T = len(rounds)
    mu_star = cfg.env.mu_star
    regret = np.zeros(T)
    chosen = np.zeros(T, dtype=int)
    index_value = np.zeros(T)
    levels = np.zeros(T, dtype=int)
    p = agent.p
    multilevel = isinstance(agent, MultiLevelWeightedOFUL)
    track_single = diag is not None and agent.name == "robust_weighted_oful"
    if track_single:
        dist = np.zeros(T)
        alpha = np.zeros(T)
    if diag is not None and multilevel:
        L = agent.l_max
        glob_dist = np.zeros(T)
        lvl_dist = np.zeros((T, L))
        beta = np.zeros((T, L))
        gamma = np.zeros((T, L))

    for i, ctx in enumerate(rounds):
        t = ctx.t
        if "adversary" not in ctx.phase:
            raise RuntimeError(f"round {t}: agent acting before the adversary")
        if track_single:
            dist[i] = agent.confidence_distance(mu_star)
            alpha[i] = radius_alpha(t, p)
        if diag is not None and multilevel:
            glob_dist[i], lvl_dist[i] = agent.confidence_distances(mu_star)
            for lv in range(1, L + 1):
                beta[i, lv - 1] = radius_beta(t, lv, p)
                gamma[i, lv - 1] = radius_gamma(t, lv, p, agent.ml.T)
        j = agent.select(ctx.actions, t)
        chosen[i] = j
        index_value[i] = agent.last.get("index_value", np.nan)
        levels[i] = agent.last.get("level", NO_LEVEL)
        means = ctx.mean_rewards
        regret[i] = max(means.max() - means[j], 0.0)
        agent.observe(ctx.actions[j], float(ctx.corrupted_rewards[j]), ctx.sigma_t)
    agent.finish()

    if track_single:
        diag["robust"] = {"dist": dist, "alpha": alpha}
    if diag is not None and multilevel:
        diag["multilevel"] = {
            "glob_dist": glob_dist, "lvl_dist": lvl_dist, "beta": beta, "gamma": gamma,
            "levels": levels, "l_max": L,
        }
    return regret, chosen, index_value, levels


def run_trial(cfg: ExperimentConfig, trial_index: int, k: int | None = None, diagnostics: bool = True) -> TrialResult:
    """One trial of every configured agent on a shared (or per-agent) environment realization."""
    cfg.validate()
    k = cfg.attack.k if k is None else k
    if not 0 <= k <= cfg.env.T:
        raise ConfigError(f"attack.k: {k} outside [0, T={cfg.env.T}]")
    seed = cfg.base_seed

    shared = None
    if not cfg.independent_streams:
        shared = _generate_rounds(cfg, k, stream_rng(seed, trial_index, ENV_STREAM))

    instant, chosen, index_value, env_hash = {}, {}, {}, {}
    diag: dict | None = {} if diagnostics else None
    levels_for_ledger = None
    C_true = None
    for name in cfg.agents:
        if shared is None:
            rounds, digest = _generate_rounds(cfg, k, stream_rng(seed, trial_index, ENV_STREAM, name))
        else:
            rounds, digest = shared
        if C_true is None or cfg.independent_streams:
            C_true = _realized_C(rounds, cfg.env.R)
        p = ConfidenceParams(
            d=cfg.env.d, delta=cfg.delta, A=cfg.env.A, B=cfg.env.B, R=cfg.env.R,
            known_C=C_true if name == "robust_weighted_oful" else None,
        )
        agent = make_agent(name, p, cfg.env.T, stream_rng(seed, trial_index, "agent", name))
        regret, ch, iv, levels = _play(agent, rounds, cfg, diag)
        instant[name], chosen[name], index_value[name] = regret, ch, iv
        env_hash[name] = digest
        if name == "multilevel_weighted_oful":
            levels_for_ledger = (levels, rounds)

    # the ledger follows the shared stream; level tags come from the multi-level agent when present
    if levels_for_ledger is not None:
        levels, ledger_rounds = levels_for_ledger
    else:
        ledger_rounds = shared[0] if shared is not None else _generate_rounds(
            cfg, k, stream_rng(seed, trial_index, ENV_STREAM))[0]
        levels = np.full(cfg.env.T, NO_LEVEL)
    ledger = CorruptionLedger(cfg.env.R)
    for ctx, lv in zip(ledger_rounds, levels):
        ledger_update(ledger, ctx, int(lv))

    result = TrialResult(trial_index, k, cfg.env.T, instant, chosen, index_value, ledger, env_hash)
    if diag is not None:
        diag["ell_star"] = ell_star(ledger.total_C)
        diag["delta"] = cfg.delta
        result.diagnostics = diag
    return result


def _run_one(args):
    cfg, trial_index, k, diagnostics = args
    return run_trial(cfg, trial_index, k, diagnostics)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {raw!r}") from None


def run_experiment(cfg: ExperimentConfig, k: int | None = None, diagnostics: bool = True) -> list[TrialResult]:
    """All trials for one corruption value, in parallel when the worker variable allows."""
    jobs = [(cfg, i, k, diagnostics) for i in range(cfg.trials)]
    n = worker_count()
    if n == 1 or cfg.trials == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_one, jobs))


@dataclass
class Summary:
    rounds: int
    mean: dict  # agent -> (T,)
    std: dict  # agent -> (T,), population standard deviation
    trials: int


def aggregate(results: list[TrialResult]) -> Summary:
    if not results:
        raise ValueError("aggregate needs at least one trial")
    T = results[0].T
    for r in results:
        if r.T != T:
            raise ValueError(f"mismatched horizons: {T} vs {r.T} (trial {r.trial_index})")
    names = list(results[0].instant_regret)
    mean, std = {}, {}
    for name in names:
        curves = np.stack([r.cum_regret[name] for r in results])
        mean[name] = curves.mean(axis=0)
        std[name] = curves.std(axis=0)
    return Summary(T, mean, std, len(results))


def coverage_diagnostic(results: list[TrialResult], radius_scale: float = 1.0) -> dict:
    """Fraction of trials whose confidence sets held the true parameter at every round.

    ``robust``: |mu_t - mu*|_{Sigma_t} <= alpha_t. ``multilevel``: both ellipsoid
    memberships for every level at or above the robust threshold level.
    ``radius_scale`` multiplies every radius (0 and inf are useful test hooks).
    """
    out = {}
    robust = [r.diagnostics["robust"] for r in results if "robust" in r.diagnostics]
    if robust:
        with np.errstate(invalid="ignore"):
            ok = [bool(np.all(d["dist"] <= radius_scale * d["alpha"])) for d in robust]
        out["robust"] = float(np.mean(ok))
        out["robust_target"] = 1.0 - results[0].diagnostics["delta"]
    ml = [(r.diagnostics["multilevel"], r.diagnostics["ell_star"]) for r in results if "multilevel" in r.diagnostics]
    if ml:
        ok = [multilevel_covered(d, ls, radius_scale).all() for d, ls in ml]
        out["multilevel"] = float(np.mean(ok))
        out["multilevel_target"] = 1.0 - 3.0 * results[0].diagnostics["delta"]
    return out


def multilevel_covered(d: dict, ls: int, radius_scale: float = 1.0) -> np.ndarray:
    """Per-round indicator of both memberships for all levels >= ls."""
    if ls > d["l_max"]:
        return np.ones(len(d["glob_dist"]), dtype=bool)
    sl = slice(ls - 1, None)
    glob_ok = (d["glob_dist"][:, None] <= radius_scale * d["beta"][:, sl]).all(axis=1)
    lvl_ok = (d["lvl_dist"][:, sl] <= radius_scale * d["gamma"][:, sl]).all(axis=1)
    return glob_ok & lvl_ok


def level_corruption_diagnostic(results: list[TrialResult], delta: float) -> dict:
    """Fraction of trials where every level at or above the threshold stayed within its allowance."""
    ok = []
    for r in results:
        if "multilevel" not in r.diagnostics:
            continue
        L = r.diagnostics["multilevel"]["l_max"]
        ls = ell_star(r.ledger.total_C)
        held = True
        for lv in range(ls, L + 1):
            if r.ledger.level_trajectory(lv).max(initial=0.0) > level_cbar(lv, delta):
                held = False
                break
        ok.append(held)
    if not ok:
        raise ValueError("level corruption diagnostic needs multi-level agent traces")
    return {"pass_rate": float(np.mean(ok)), "target": 1.0 - delta, "trials": len(ok)}
