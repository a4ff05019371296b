"""Weighted ridge regression state and confidence-ellipsoid geometry.

All matrices are small and dense (d up to a few hundred). The ridge state keeps
an explicit inverse updated by Sherman-Morrison, and re-derives it from a
Cholesky factorization every ``REFACTOR_EVERY`` updates to cap drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

REFACTOR_EVERY = 1000


def _as_vector(v, d: int, what: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != d:
        raise ValueError(f"{what} has shape {v.shape}, expected ({d},)")
    return v


@dataclass
class WeightedRidgeState:
    """Running solution of min_mu lam*|mu|^2 + sum_i (<mu, a_i> - r_i)^2 / sbar_i^2."""

    dim: int
    lam: float
    sigma_mat: np.ndarray
    sigma_inv: np.ndarray
    moment: np.ndarray
    estimate: np.ndarray
    num_updates: int = 0

    def copy(self) -> WeightedRidgeState:
        return WeightedRidgeState(
            self.dim,
            self.lam,
            self.sigma_mat.copy(),
            self.sigma_inv.copy(),
            self.moment.copy(),
            self.estimate.copy(),
            self.num_updates,
        )

    def refactorize(self) -> None:
        """Recompute the inverse and the estimate from a fresh Cholesky factor."""
        factor = sla.cho_factor(self.sigma_mat, lower=True)
        self.sigma_inv = sla.cho_solve(factor, np.eye(self.dim))
        self.sigma_inv = 0.5 * (self.sigma_inv + self.sigma_inv.T)
        self.estimate = sla.cho_solve(factor, self.moment)

    def inverse_residual(self) -> float:
        """max-abs entry of sigma_mat @ sigma_inv - I."""
        return float(np.abs(self.sigma_mat @ self.sigma_inv - np.eye(self.dim)).max())


def ridge_init(d: int, lam: float) -> WeightedRidgeState:
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    if not lam > 0:
        raise ValueError(f"regularizer must be positive, got {lam!r}")
    d = int(d)
    return WeightedRidgeState(
        dim=d,
        lam=float(lam),
        sigma_mat=lam * np.eye(d),
        sigma_inv=np.eye(d) / lam,
        moment=np.zeros(d),
        estimate=np.zeros(d),
        num_updates=0,
    )


def ridge_update(
    state: WeightedRidgeState, action, reward: float, sigma_bar: float
) -> WeightedRidgeState:
    """Absorb one observation with weight 1/sigma_bar^2, in place; returns ``state``."""
    if not sigma_bar > 0:
        raise ValueError(f"sigma_bar must be positive, got {sigma_bar!r}")
    a = _as_vector(action, state.dim, "action")
    w = 1.0 / (sigma_bar * sigma_bar)

    state.sigma_mat += w * np.outer(a, a)
    state.moment += (w * reward) * a
    state.num_updates += 1

    if state.num_updates % REFACTOR_EVERY == 0:
        state.refactorize()
        return state

    # Sherman-Morrison: (S + w a a^T)^-1 = S^-1 - w S^-1 a a^T S^-1 / (1 + w a^T S^-1 a)
    u = state.sigma_inv @ a
    denom = 1.0 + w * float(a @ u)
    state.sigma_inv -= (w / denom) * np.outer(u, u)
    state.estimate = state.sigma_inv @ state.moment
    return state


def weighted_norm_inv(state: WeightedRidgeState, v) -> float:
    """|v|_{Sigma^-1}."""
    v = _as_vector(v, state.dim)
    return float(np.sqrt(max(float(v @ state.sigma_inv @ v), 0.0)))


def batch_norm_inv(matrix_inv: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """Row-wise |a|_{M^-1} for a (K, d) action array given M^-1."""
    q = np.einsum("ij,jk,ik->i", actions, matrix_inv, actions)
    return np.sqrt(np.maximum(q, 0.0))


@dataclass
class Ellipsoid:
    """{mu : |mu - center|_shape <= radius}."""

    center: np.ndarray
    shape: np.ndarray
    shape_inv: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"radius must be nonnegative, got {self.radius!r}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @classmethod
    def from_state(cls, state: WeightedRidgeState, radius: float) -> Ellipsoid:
        return cls(state.estimate, state.sigma_mat, state.sigma_inv, float(radius))

    @classmethod
    def from_shape(cls, center, shape, radius: float) -> Ellipsoid:
        shape = np.asarray(shape, dtype=float)
        return cls(np.asarray(center, dtype=float), shape, np.linalg.inv(shape), float(radius))

    def contains(self, mu, slack: float = 0.0) -> bool:
        diff = np.asarray(mu, dtype=float) - self.center
        return float(np.sqrt(max(diff @ self.shape @ diff, 0.0))) <= self.radius + slack

    def ucb(self, actions: np.ndarray) -> np.ndarray:
        """Vectorized ellipsoid_ucb over the rows of a (K, d) array."""
        return actions @ self.center + self.radius * batch_norm_inv(self.shape_inv, actions)


def _check_same_dim(*items):
    dims = {x.shape[0] for x in items}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")


def ellipsoid_ucb(e: Ellipsoid, a) -> float:
    """max over the ellipsoid of <mu, a> = <center, a> + radius * |a|_{shape^-1}."""
    a = np.asarray(a, dtype=float)
    _check_same_dim(e.center, a)
    return float(a @ e.center + e.radius * np.sqrt(max(a @ e.shape_inv @ a, 0.0)))


def min_distance_in(e1: Ellipsoid, e2: Ellipsoid, rtol: float = 1e-9) -> float:
    """min of |mu - c2|_{M2} over mu with |mu - c1|_{M1} <= r1.

    Solved through the generalized eigenproblem M2 v = lam M1 v, which maps the
    constraint onto a Euclidean ball, followed by bisection on the Lagrange
    multiplier of the ball constraint. M2 is positive definite, so the
    multiplier is unique and the hard case of the trust-region problem
    cannot occur.
    """
    _check_same_dim(e1.center, e2.center)
    diff = e2.center - e1.center
    r1 = e1.radius
    if float(np.sqrt(max(diff @ e1.shape @ diff, 0.0))) <= r1:
        return 0.0
    if r1 == 0.0:
        return float(np.sqrt(max(diff @ e2.shape @ diff, 0.0)))

    lam, vecs = sla.eigh(e2.shape, e1.shape)
    lam = np.maximum(lam, 0.0)
    # coordinates y with mu - c1 = V y; the target c2 sits at z
    z = vecs.T @ (e1.shape @ diff)

    def step_norm(nu):
        return float(np.linalg.norm(lam * z / (lam + nu)))

    lo, hi = 0.0, float(lam.max() * np.linalg.norm(z) / r1)
    while step_norm(hi) > r1:
        hi *= 2.0
    while hi - lo > rtol * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if step_norm(mid) > r1:
            lo = mid
        else:
            hi = mid
    y = lam * z / (lam + hi)
    return float(np.sqrt(max(np.sum(lam * (y - z) ** 2), 0.0)))


def ellipsoids_intersect(e1: Ellipsoid, e2: Ellipsoid, tol: float = 1e-7) -> bool:
    _check_same_dim(e1.center, e2.center)
    # cheap certificates first: either center lying in the other set
    d12 = e1.center - e2.center
    if float(np.sqrt(max(d12 @ e2.shape @ d12, 0.0))) <= e2.radius + tol:
        return True
    if float(np.sqrt(max(d12 @ e1.shape @ d12, 0.0))) <= e1.radius + tol:
        return True
    return min_distance_in(e1, e2) <= e2.radius + tol


def intersection_ucb(e1: Ellipsoid, e2: Ellipsoid, a) -> float:
    """Optimistic surrogate for max of <mu, a> over e1 & e2: the smaller single-set maximum."""
    return min(ellipsoid_ucb(e1, a), ellipsoid_ucb(e2, a))
