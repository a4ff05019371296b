import numpy as np
import pytest

from corrupted_bandits.linalg import Ellipsoid


def random_spd(rng, d, lo=0.3, hi=3.0):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return (q * rng.uniform(lo, hi, size=d)) @ q.T


def random_ellipsoid(rng, d=2, spread=1.0, radius=(0.5, 2.0)):
    shape = random_spd(rng, d)
    return Ellipsoid.from_shape(rng.normal(scale=spread, size=d), shape, rng.uniform(*radius))


def boundary_points(e: Ellipsoid, n: int) -> np.ndarray:
    """n points on the boundary of a 2-D ellipsoid, via the unit-circle parametrization."""
    theta = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    chol = np.linalg.cholesky(e.shape)  # shape = L L^T, so mu - c = r L^{-T} u
    offsets = np.linalg.solve(chol.T, u.T).T * e.radius
    return e.center + offsets


def grid_inside(e: Ellipsoid, n: int) -> np.ndarray:
    """Dense n x n grid over the bounding box of a 2-D ellipsoid, filtered to its interior."""
    half = e.radius * np.sqrt(np.diag(np.linalg.inv(e.shape)))
    xs = np.linspace(e.center[0] - half[0], e.center[0] + half[0], n)
    ys = np.linspace(e.center[1] - half[1], e.center[1] + half[1], n)
    pts = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    return pts[members(e, pts)]


def members(e: Ellipsoid, pts: np.ndarray) -> np.ndarray:
    diff = pts - e.center
    return np.einsum("ij,jk,ik->i", diff, e.shape, diff) <= e.radius**2


def uniform_in(e: Ellipsoid, n: int, rng) -> np.ndarray:
    """Uniform samples inside a 2-D ellipsoid (uniform disk mapped by the shape factor)."""
    r = np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    u = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    chol = np.linalg.cholesky(e.shape)
    return e.center + np.linalg.solve(chol.T, u.T).T * e.radius


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
