"""Bandit agents: OFUL, weighted OFUL, robust weighted OFUL, multi-level weighted OFUL, greedy.

Every agent follows the same two-call protocol per round: ``select(actions, t)``
returns a row index into the (K, d) action array, then ``observe(action,
reward, sigma_t)`` feeds back the (possibly corrupted) reward and the revealed
noise scale. After ``select`` the agent's ``last`` dict holds the trace record
for the round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    Ellipsoid,
    WeightedRidgeState,
    batch_norm_inv,
    ellipsoids_intersect,
    ridge_init,
    ridge_update,
)

AGENT_KINDS = ("oful", "weighted_oful", "robust_weighted_oful", "multilevel_weighted_oful", "greedy")


@dataclass
class ConfidenceParams:
    d: int
    delta: float = 0.01
    lam: float | None = None
    A: float = 1.0
    B: float = 1.0
    R: float = 0.5
    known_C: float | None = None

    def __post_init__(self):
        if self.lam is None:
            self.lam = 1.0 / self.B**2
        if not 0 < self.delta < 1.0 / 3.0:
            raise ValueError(f"delta must lie in (0, 1/3), got {self.delta}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


def sigma_bar(sigma_t: float, R: float, d: int) -> float:
    return max((R + 1.0) / math.sqrt(d), sigma_t)


def _log_det_ratio(t: int, p: ConfidenceParams) -> float:
    base = (p.R + 1.0) ** 2 * p.lam
    return math.log((base + t * p.A**2) / base)


def _weighted_core(t: int, p: ConfidenceParams, log_conf: float) -> float:
    d = p.d
    return 8.0 * math.sqrt(d * _log_det_ratio(t, p) * log_conf) + 4.0 * math.sqrt(d) * log_conf


def radius_alpha(t: int, p: ConfidenceParams) -> float:
    """Enlarged radius for the known-corruption agent."""
    if p.known_C is None:
        raise RuntimeError("radius_alpha needs ConfidenceParams.known_C")
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    log_conf = math.log(4.0 * t * t / p.delta)
    return _weighted_core(t, p, log_conf) + p.known_C * math.sqrt(p.d) + math.sqrt(p.lam) * p.B


def radius_beta(t: int, level: int, p: ConfidenceParams) -> float:
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    log_conf = math.log(4.0 * t * t / p.delta)
    return _weighted_core(t, p, log_conf) + 2.0**level * math.sqrt(p.d) + math.sqrt(p.lam) * p.B


def level_cbar(level: int, delta: float) -> float:
    """Per-level corruption allowance log(2 l^2 / delta) + 3."""
    return math.log(2.0 * level * level / delta) + 3.0


def radius_gamma(t: int, level: int, p: ConfidenceParams, T: int) -> float:
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    log_conf = math.log(8.0 * t * t * T / p.delta)
    return _weighted_core(t, p, log_conf) + level_cbar(level, p.delta) * math.sqrt(p.d) + math.sqrt(p.lam) * p.B


def radius_oful(t: int, p: ConfidenceParams) -> float:
    """Unweighted self-normalized Bernstein radius with sigma = R and L = A."""
    d, lam = p.d, p.lam
    log_conf = math.log(4.0 * t * t / p.delta)
    log_det = math.log((d * lam + t * p.A**2) / (d * lam))
    return (
        8.0 * p.R * math.sqrt(d * log_det * log_conf)
        + 4.0 * p.R * log_conf
        + math.sqrt(lam) * p.B
    )


def radius_weighted_oful(t: int, p: ConfidenceParams) -> float:
    log_conf = math.log(4.0 * t * t / p.delta)
    return _weighted_core(t, p, log_conf) + math.sqrt(p.lam) * p.B


def num_levels(T: int) -> int:
    """ceil(log2(2T)), floored at 2 so that the level distribution is well defined."""
    return max(2, (2 * T - 1).bit_length())


def level_probabilities(l_max: int) -> np.ndarray:
    if l_max < 2:
        raise ValueError(f"l_max must be >= 2, got {l_max}")
    probs = 2.0 ** -np.arange(1, l_max + 1, dtype=float)
    probs[0] = 1.0 - probs[1:].sum()
    return probs


def sample_level(rng: np.random.Generator, l_max: int, size=None):
    """Draw f(t): level l with probability 2^-l for l >= 2, level 1 otherwise."""
    cdf = np.cumsum(level_probabilities(l_max))
    cdf[-1] = 1.0
    u = rng.random(size)
    idx = np.searchsorted(cdf, u, side="right") + 1
    idx = np.minimum(idx, l_max)
    return int(idx) if size is None else idx


def _argmax(scores: np.ndarray) -> int:
    if scores.size == 0:
        raise ValueError("empty decision set")
    return int(np.argmax(scores))  # first maximizer, i.e. lowest index


def ucb_scores(state: WeightedRidgeState, actions: np.ndarray, radius: float) -> np.ndarray:
    return actions @ state.estimate + radius * batch_norm_inv(state.sigma_inv, actions)


def robust_oful_select(state: WeightedRidgeState, actions: np.ndarray, t: int, p: ConfidenceParams) -> int:
    actions = np.asarray(actions, dtype=float)
    if actions.shape[0] == 0:
        raise ValueError("empty decision set")
    return _argmax(ucb_scores(state, actions, radius_alpha(t, p)))


def baseline_select(kind: str, state: WeightedRidgeState, actions: np.ndarray, t: int, p: ConfidenceParams) -> int:
    actions = np.asarray(actions, dtype=float)
    if actions.shape[0] == 0:
        raise ValueError("empty decision set")
    if kind == "greedy":
        return _argmax(actions @ state.estimate)
    if kind == "oful":
        return _argmax(ucb_scores(state, actions, radius_oful(t, p)))
    if kind == "weighted_oful":
        return _argmax(ucb_scores(state, actions, radius_weighted_oful(t, p)))
    raise ValueError(f"unknown baseline kind {kind!r}")


class Agent:
    name = "agent"

    def __init__(self, p: ConfidenceParams):
        self.p = p
        self.last: dict = {}

    def select(self, actions: np.ndarray, t: int) -> int:
        raise NotImplementedError

    def observe(self, action: np.ndarray, reward: float, sigma_t: float) -> None:
        raise NotImplementedError

    def finish(self) -> None:
        """End-of-trial hook: re-factorize every estimator."""
        for state in self.states():
            state.refactorize()

    def states(self) -> list[WeightedRidgeState]:
        return []


class _SingleEstimatorAgent(Agent):
    weighted = True

    def __init__(self, p: ConfidenceParams):
        super().__init__(p)
        self.state = ridge_init(p.d, p.lam)

    def radius(self, t: int) -> float:
        raise NotImplementedError

    def select(self, actions, t):
        actions = np.asarray(actions, dtype=float)
        radius = self.radius(t)
        scores = ucb_scores(self.state, actions, radius)
        idx = _argmax(scores)
        self.last = {"level": 0, "radius": radius, "index_value": float(scores[idx]), "scores": scores}
        return idx

    def observe(self, action, reward, sigma_t):
        sbar = sigma_bar(sigma_t, self.p.R, self.p.d) if self.weighted else 1.0
        ridge_update(self.state, action, reward, sbar)

    def states(self):
        return [self.state]

    def confidence_distance(self, mu_star) -> float:
        """|mu_t - mu*|_{Sigma_t} for the current estimator."""
        diff = self.state.estimate - mu_star
        return float(np.sqrt(max(diff @ self.state.sigma_mat @ diff, 0.0)))


class OFUL(_SingleEstimatorAgent):
    name = "oful"
    weighted = False

    def radius(self, t):
        return radius_oful(t, self.p)


class WeightedOFUL(_SingleEstimatorAgent):
    name = "weighted_oful"

    def radius(self, t):
        return radius_weighted_oful(t, self.p)


class RobustWeightedOFUL(_SingleEstimatorAgent):
    name = "robust_weighted_oful"

    def __init__(self, p: ConfidenceParams):
        if p.known_C is None:
            raise RuntimeError("robust weighted OFUL needs ConfidenceParams.known_C")
        super().__init__(p)

    def radius(self, t):
        return radius_alpha(t, self.p)


class Greedy(_SingleEstimatorAgent):
    name = "greedy"
    weighted = False

    def radius(self, t):
        return 0.0


@dataclass
class ConfidenceSet:
    """C_{t,l}: one ellipsoid or the intersection of two.

    ``source`` is the level whose candidate set was used after fallback; 0
    marks the top-level fallback to the global ellipsoid alone.
    """

    level: int
    source: int
    global_set: Ellipsoid
    level_set: Ellipsoid | None

    def scores(self, actions: np.ndarray) -> np.ndarray:
        s = self.global_set.ucb(actions)
        if self.level_set is not None:
            s = np.minimum(s, self.level_set.ucb(actions))
        return s


@dataclass
class MultiLevelState:
    l_max: int
    T: int
    glob: WeightedRidgeState
    per_level: list  # index l-1 holds level l
    cbar: list
    f_t: int = 0

    @classmethod
    def create(cls, p: ConfidenceParams, T: int) -> MultiLevelState:
        l_max = num_levels(T)
        return cls(
            l_max=l_max,
            T=T,
            glob=ridge_init(p.d, p.lam),
            per_level=[ridge_init(p.d, p.lam) for _ in range(l_max)],
            cbar=[level_cbar(l, p.delta) for l in range(1, l_max + 1)],
        )


def candidate_set(state: MultiLevelState, t: int, level: int, p: ConfidenceParams):
    """C'_{t,l} as an (ellipsoid, ellipsoid) pair and whether it is nonempty."""
    e_glob = Ellipsoid.from_state(state.glob, radius_beta(t, level, p))
    e_lvl = Ellipsoid.from_state(state.per_level[level - 1], radius_gamma(t, level, p, state.T))
    return e_glob, e_lvl, ellipsoids_intersect(e_glob, e_lvl)


def _top_fallback(state: MultiLevelState, t: int, p: ConfidenceParams) -> ConfidenceSet:
    e = Ellipsoid.from_state(state.glob, radius_beta(t, state.l_max, p))
    return ConfidenceSet(state.l_max, 0, e, None)


def build_confidence_cascade(state: MultiLevelState, t: int, p: ConfidenceParams) -> list[ConfidenceSet]:
    """All of C_{t,1..l_max}, computed from the top level down."""
    cascade: list[ConfidenceSet | None] = [None] * state.l_max
    above = None
    for level in range(state.l_max, 0, -1):
        e_glob, e_lvl, nonempty = candidate_set(state, t, level, p)
        if nonempty:
            cs = ConfidenceSet(level, level, e_glob, e_lvl)
        elif above is None:
            cs = _top_fallback(state, t, p)
        else:
            cs = ConfidenceSet(level, above.source, above.global_set, above.level_set)
        cascade[level - 1] = cs
        above = cs
    return cascade


def resolve_confidence_set(state: MultiLevelState, t: int, level: int, p: ConfidenceParams) -> ConfidenceSet:
    """C_{t,level} alone: walks upward until a nonempty candidate appears.

    Agrees with ``build_confidence_cascade(...)[level - 1]`` but only tests
    the levels it needs.
    """
    for lv in range(level, state.l_max + 1):
        e_glob, e_lvl, nonempty = candidate_set(state, t, lv, p)
        if nonempty:
            return ConfidenceSet(level, lv, e_glob, e_lvl)
    fb = _top_fallback(state, t, p)
    return ConfidenceSet(level, 0, fb.global_set, None)


def ml_select_action(state: MultiLevelState, cascade, actions: np.ndarray) -> int:
    """argmax over actions of the optimistic index of C_{t, f(t)}.

    ``cascade`` is either the full list from ``build_confidence_cascade`` or
    the single resolved ``ConfidenceSet`` for level f(t).
    """
    actions = np.asarray(actions, dtype=float)
    if actions.shape[0] == 0:
        raise ValueError("empty decision set")
    cs = cascade if isinstance(cascade, ConfidenceSet) else cascade[state.f_t - 1]
    return _argmax(cs.scores(actions))


def ml_observe(state: MultiLevelState, action, reward: float, sigma_t: float, p: ConfidenceParams) -> MultiLevelState:
    if not 1 <= state.f_t <= state.l_max:
        raise RuntimeError("ml_observe called before a level was sampled this round")
    sbar = sigma_bar(sigma_t, p.R, p.d)
    ridge_update(state.glob, action, reward, sbar)
    ridge_update(state.per_level[state.f_t - 1], action, reward, sbar)
    return state


class MultiLevelWeightedOFUL(Agent):
    name = "multilevel_weighted_oful"

    def __init__(self, p: ConfidenceParams, T: int, rng: np.random.Generator):
        super().__init__(p)
        self.rng = rng
        self.ml = MultiLevelState.create(p, T)

    @property
    def l_max(self) -> int:
        return self.ml.l_max

    def select(self, actions, t):
        actions = np.asarray(actions, dtype=float)
        self.ml.f_t = sample_level(self.rng, self.ml.l_max)
        cs = resolve_confidence_set(self.ml, t, self.ml.f_t, self.p)
        scores = cs.scores(actions)
        idx = _argmax(scores)
        self.last = {
            "level": self.ml.f_t,
            "source": cs.source,
            "radius": cs.global_set.radius,
            "index_value": float(scores[idx]),
            "scores": scores,
        }
        return idx

    def observe(self, action, reward, sigma_t):
        ml_observe(self.ml, action, reward, sigma_t, self.p)

    def states(self):
        return [self.ml.glob, *self.ml.per_level]

    def confidence_distances(self, mu_star):
        """(|mu_t - mu*|_{Sigma_t}, [|mu_{t,l} - mu*|_{Sigma_{t,l}} for each level])."""
        def dist(s):
            diff = s.estimate - mu_star
            return float(np.sqrt(max(diff @ s.sigma_mat @ diff, 0.0)))

        return dist(self.ml.glob), np.array([dist(s) for s in self.ml.per_level])


def make_agent(kind: str, p: ConfidenceParams, T: int, rng: np.random.Generator | None = None) -> Agent:
    if kind == "oful":
        return OFUL(p)
    if kind == "weighted_oful":
        return WeightedOFUL(p)
    if kind == "robust_weighted_oful":
        return RobustWeightedOFUL(p)
    if kind == "greedy":
        return Greedy(p)
    if kind == "multilevel_weighted_oful":
        if rng is None:
            raise ValueError("the multi-level agent needs its own random stream")
        return MultiLevelWeightedOFUL(p, T, rng)
    raise ValueError(f"unknown agent kind {kind!r}; expected one of {AGENT_KINDS}")
