"""Benchmark problems: manufactured solution, spinodal decomposition and
interface evolution tests."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .mesh import Mesh

PI = np.pi

UNIT_SQUARE = ((0.0, 0.0), (1.0, 1.0))


@dataclass(frozen=True)
class Problem:
    name: str
    epsilon: float
    initial: Callable  # (mesh, rng) -> nodal vector
    domain: tuple = UNIT_SQUARE
    exact: Callable | None = None  # (x, y, t)
    exact_grad: Callable | None = None
    exact_hess: Callable | None = None
    source: Callable | None = None  # (x, y, t)
    dt: float = 1e-3
    t_end: float = 1.0
    m: int = 128
    snapshots: tuple = ()
    scheme: str = "uniform-simple"
    extra: dict = field(default_factory=dict)

    @property
    def has_exact(self) -> bool:
        return self.exact is not None

    def at_time(self, t):
        """Exact solution, gradient and Hessian as functions of ``(x, y)``."""
        return (lambda x, y: self.exact(x, y, t),
                lambda x, y: self.exact_grad(x, y, t),
                lambda x, y: self.exact_hess(x, y, t))


def grid_spacing(mesh: Mesh) -> float:
    """Lattice spacing of a uniform mesh, mean boundary edge length otherwise."""
    if mesh.is_uniform_regular:
        x = mesh.vertices[:, 0]
        return float((x.max() - x.min()) / mesh.grid_m)
    return float(mesh.boundary_lengths.mean())


# --------------------------------------------------------------- Example 1

def ex1_exact(x, y, t):
    return np.exp(-2 * t) * np.cos(PI * x) * np.cos(PI * y)


def ex1_grad(x, y, t):
    a = -PI * np.exp(-2 * t)
    return np.stack([a * np.sin(PI * x) * np.cos(PI * y),
                     a * np.cos(PI * x) * np.sin(PI * y)], axis=-1)


def ex1_hess(x, y, t):
    a = PI**2 * np.exp(-2 * t)
    cc = np.cos(PI * x) * np.cos(PI * y)
    ss = np.sin(PI * x) * np.sin(PI * y)
    return np.stack([np.stack([-a * cc, a * ss], -1),
                     np.stack([a * ss, -a * cc], -1)], -2)


def ex1_source(x, y, t, epsilon=0.1):
    """Forcing that makes :func:`ex1_exact` solve the equation.

    With ``Lap u = -2 pi^2 u``, ``Lap^2 u = 4 pi^4 u`` and
    ``Lap(u^3) = 3 u^2 Lap u + 6 u |grad u|^2``.
    """
    u = ex1_exact(x, y, t)
    g = ex1_grad(x, y, t)
    grad_sq = np.sum(g**2, axis=-1)
    return (-2 * u + 4 * PI**4 * epsilon**2 * u + 6 * PI**2 * u**3
            - 6 * u * grad_sq - 2 * PI**2 * u)


def _ex1_initial(mesh, rng=None):
    x, y = mesh.vertices.T
    return ex1_exact(x, y, 0.0)


# --------------------------------------------------------------- Examples 2-7

def _cos_initial(mesh, rng=None):
    x, y = mesh.vertices.T
    return np.cos(PI * x) * np.cos(PI * y)


def _bump_initial(mesh, rng=None):
    """``1e-3 sin^3(pi x/4h) sin^3(pi y/4h)`` on ``(0, 8h)^2``, zero elsewhere."""
    h = grid_spacing(mesh)
    x, y = mesh.vertices.T
    u = 1e-3 * np.sin(PI * x / (4 * h)) ** 3 * np.sin(PI * y / (4 * h)) ** 3
    inside = (x > 0) & (x < 8 * h) & (y > 0) & (y < 8 * h)
    return np.where(inside, u, 0.0)


def _random_initial(mesh, rng):
    return rng.uniform(-1.0, 1.0, mesh.n_vertices)


def _cross_initial(mesh, rng=None):
    x, y = mesh.vertices.T
    X, Y = x - 0.5, y - 0.5
    arm1 = 5 * np.abs(Y - X) + np.abs(0.4 * X - Y) < 1
    arm2 = 5 * np.abs(X - Y) + np.abs(0.4 * Y - X) < 1
    return np.where(arm1 | arm2, 0.95, -0.95)


def _ellipse_initial(mesh, rng=None):
    x, y = mesh.vertices.T
    return np.where(81 * (x - 0.5) ** 2 + 9 * (y - 0.5) ** 2 < 1, 0.95, -0.95)


def _two_circles_initial(mesh, rng=None, epsilon=0.025):
    x, y = mesh.vertices.T
    d = np.minimum(np.hypot(x + 0.3, y) - 0.3, np.hypot(x - 0.3, y) - 0.25)
    return np.tanh(d / (np.sqrt(2) * epsilon))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so realizations depend only on the seed."""
    return np.random.Generator(np.random.Philox(seed))


EXAMPLES = {
    1: Problem("manufactured", 0.1, _ex1_initial, exact=ex1_exact, exact_grad=ex1_grad,
               exact_hess=ex1_hess, source=ex1_source, dt=1e-6, t_end=0.1, m=64,
               snapshots=(0.0, 0.1)),
    2: Problem("cosine", 0.1, _cos_initial, dt=1e-5, t_end=0.1, m=64, snapshots=(0.0, 0.1)),
    3: Problem("spinodal-bump", 0.02, _bump_initial, dt=1e-3, t_end=10.0,
               snapshots=(0.0, 0.01, 0.1, 0.5, 1.0, 10.0)),
    4: Problem("spinodal-random", 0.02, _random_initial, dt=1e-3, t_end=10.0,
               snapshots=(0.0, 0.01, 0.1, 0.5, 1.0, 10.0)),
    5: Problem("cross", 0.01, _cross_initial, dt=5e-5, t_end=1.0,
               snapshots=(0.0, 0.005, 0.01, 0.05, 0.1, 1.0)),
    6: Problem("ellipse", 0.01, _ellipse_initial, dt=5e-5, t_end=1.0,
               snapshots=(0.0, 0.003, 0.05, 0.1, 0.3, 1.0)),
    7: Problem("two-circles", 0.025, _two_circles_initial, domain=((-1.0, -1.0), (1.0, 1.0)),
               dt=5e-5, t_end=0.1, m=256,
               snapshots=(0.0, 0.001, 0.005, 0.01, 0.05, 0.1)),
}


def get_problem(example: int) -> Problem:
    try:
        return EXAMPLES[int(example)]
    except KeyError:
        raise ValueError(f"unknown example {example}; choose from {sorted(EXAMPLES)}") from None


def source_for(problem: Problem, epsilon: float | None = None):
    """Source term ``g(x, y, t)`` bound to ``epsilon``, or ``None``."""
    if problem.source is None:
        return None
    return partial(problem.source, epsilon=problem.epsilon if epsilon is None else epsilon)
