"""Recovery-based bilinear forms and the stabilized semi-implicit stepper.

Each step solves

    (M/dt + eps^2 A + kappa K) u^{n+1} = M u^n/dt + kappa K u^n - F(u^n) + M g^{n+1}

where ``A`` is one of the recovered fourth-order forms, ``K`` the P1
stiffness matrix and ``F`` the discrete ``(grad f(u), grad v)`` with
``f(u) = u^3 - u``.  The system matrix is time independent and is factored
once per run.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .diagnostics import StepRecord, record
from .fem import (boundary_trace, interpolate, mass_matrix, nonlinear_load,
                  stiffness_matrix, symmetrize)
from .linalg import LinearSolver, NotPositiveDefiniteError, SolverConfig, SolverError
from .mesh import Mesh
from .recovery import (GHOST_POINT, LS_PATCH, RecoveryOperator, build_ghost_point_laplacian,
                       build_recovery)

log = logging.getLogger(__name__)

NITSCHE_LAPLACE = "nitsche-laplace"
NITSCHE_HESSIAN = "nitsche-hessian"
UNIFORM_SIMPLE = "uniform-simple"
VARIANTS = (NITSCHE_LAPLACE, NITSCHE_HESSIAN, UNIFORM_SIMPLE)

# phase fields live near [-1, 1]; far beyond that the run has blown up
DIVERGENCE_BOUND = 1e6


class DivergenceError(SolverError):
    pass


@dataclass(frozen=True)
class SchemeConfig:
    epsilon: float
    dt: float
    t_end: float
    kappa: float = 2.0
    nitsche_c: float = 1.0
    variant: str = NITSCHE_LAPLACE
    source: Callable | None = None  # g(x, y, t)
    nonlinear: str = "nodal"
    mass_correction: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)
    snapshots: tuple = ()

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.nonlinear not in ("nodal", "quadrature"):
            raise ValueError("nonlinear must be 'nodal' or 'quadrature'")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.t_end / self.dt - 1e-9)


@dataclass
class SimState:
    u: np.ndarray
    n: int = 0
    history: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    dt: float = 0.0

    @property
    def t(self) -> float:
        return self.n * self.dt


# --------------------------------------------------------------- forms

def _gamma_weighted(trace, C):
    # per-edge penalty C/|e|; both slots of an edge share its length
    return sp.diags(C / trace.lengths) @ trace.mass


def assemble_a1h(mesh: Mesh, recovery: RecoveryOperator, nitsche_c: float = 1.0,
                 mass=None) -> sp.csr_matrix:
    """Matrix of the Nitsche form built on the recovered Laplacian.

    ``A = L^T M L - (N^T W B + B^T W N) + N^T (gamma W) N`` with ``L`` the
    recovered Laplacian, ``B`` its boundary trace, ``N`` the boundary trace
    of the recovered normal derivative and ``W`` the boundary edge mass.
    """
    if recovery.boundary_mode != LS_PATCH:
        raise ValueError("a1h needs the least-squares recovery")
    M = mass_matrix(mesh) if mass is None else mass
    L = recovery.lap
    tr = boundary_trace(mesh)
    B = (tr.select @ L).tocsr()
    N = tr.normal_component(recovery.gx, recovery.gy)
    W = tr.mass
    A = L.T @ M @ L - (N.T @ W @ B + B.T @ W @ N) + N.T @ _gamma_weighted(tr, nitsche_c) @ N
    return symmetrize(A)


def assemble_a2h(mesh: Mesh, recovery: RecoveryOperator, nitsche_c: float = 1.0,
                 mass=None) -> sp.csr_matrix:
    """Matrix of the Nitsche form built on the full recovered Hessian.

    The volume term is the Frobenius product ``H w : H v``; the boundary
    coupling uses the normal-normal component ``n^T H n``.
    """
    if recovery.boundary_mode != LS_PATCH:
        raise ValueError("a2h needs the least-squares recovery")
    M = mass_matrix(mesh) if mass is None else mass
    r = recovery
    tr = boundary_trace(mesh)
    B = tr.normal_normal(r.hxx, r.hxy, r.hyy)
    N = tr.normal_component(r.gx, r.gy)
    W = tr.mass
    A = (r.hxx.T @ M @ r.hxx + 2 * (r.hxy.T @ M @ r.hxy) + r.hyy.T @ M @ r.hyy
         - (N.T @ W @ B + B.T @ W @ N) + N.T @ _gamma_weighted(tr, nitsche_c) @ N)
    return symmetrize(A)


def assemble_a3h(mesh: Mesh, ghost: RecoveryOperator, mass=None) -> sp.csr_matrix:
    """``L^T M L`` with the ghost-point Laplacian."""
    if ghost.boundary_mode != GHOST_POINT:
        raise ValueError("a3h needs the ghost-point Laplacian")
    M = mass_matrix(mesh) if mass is None else mass
    return symmetrize(ghost.lap.T @ M @ ghost.lap)


@dataclass(eq=False)
class Discretization:
    """Everything a run needs that depends only on mesh and configuration."""

    mesh: Mesh
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    form: sp.csr_matrix
    system: sp.csr_matrix
    recovery: RecoveryOperator  # least-squares recovery, used by diagnostics
    ghost: RecoveryOperator | None
    solver: LinearSolver

    @cached_property
    def _constant_image(self) -> np.ndarray:
        return self.system @ np.ones(self.mesh.n_vertices)

    def correct_mass(self, u, b) -> np.ndarray:
        """Galerkin correction of ``u`` on the constants.

        Every form annihilates constants, so ``S 1 = M 1 / dt`` and the exact
        solution satisfies ``1^T S u = 1^T b``: the discrete mass balance.
        Adding the constant that restores this identity removes the part of
        the iterative solver's residual that would otherwise leak into the
        total mass.
        """
        s1 = self._constant_image
        c = (np.sum(b) - s1 @ u) / np.sum(s1)
        return u + c


def discretize(mesh: Mesh, cfg: SchemeConfig, recovery: RecoveryOperator | None = None
               ) -> Discretization:
    if cfg.variant == UNIFORM_SIMPLE and not mesh.is_uniform_regular:
        raise ValueError("uniform-simple needs a regular-pattern uniform mesh")
    M = mass_matrix(mesh)
    K = stiffness_matrix(mesh)
    rec = build_recovery(mesh) if recovery is None else recovery
    ghost = None
    if cfg.variant == NITSCHE_LAPLACE:
        A = assemble_a1h(mesh, rec, cfg.nitsche_c, M)
    elif cfg.variant == NITSCHE_HESSIAN:
        A = assemble_a2h(mesh, rec, cfg.nitsche_c, M)
    else:
        ghost = build_ghost_point_laplacian(mesh)
        A = assemble_a3h(mesh, ghost, M)
    S = symmetrize(M / cfg.dt + cfg.epsilon**2 * A + cfg.kappa * K)
    try:
        solver = LinearSolver(S, cfg.solver)
    except NotPositiveDefiniteError as exc:
        if cfg.variant == UNIFORM_SIMPLE:
            raise
        raise NotPositiveDefiniteError(
            f"{exc}; the Nitsche constant C={cfg.nitsche_c:g} is probably too small "
            "(the forms need C of about 4-5 on typical meshes)", exc.residual) from exc
    return Discretization(mesh, M, K, A, S, rec, ghost, solver)


def rhs(disc: Discretization, cfg: SchemeConfig, u, t_next) -> np.ndarray:
    b = disc.mass @ u / cfg.dt
    if cfg.kappa:
        b += cfg.kappa * (disc.stiffness @ u)
    b -= nonlinear_load(disc.mesh, disc.stiffness, u, cfg.nonlinear)
    if cfg.source is not None:
        b += disc.mass @ interpolate(disc.mesh, lambda x, y: cfg.source(x, y, t_next))
    return b


def _record(disc, cfg, u, t) -> StepRecord:
    return record(disc.mesh, disc.recovery, u, t, cfg.epsilon, disc.mass)


def step(state: SimState, disc: Discretization, cfg: SchemeConfig) -> SimState:
    """Advance one time step; the returned state shares the history list."""
    t_next = (state.n + 1) * cfg.dt
    b = rhs(disc, cfg, state.u, t_next)
    try:
        u = disc.solver(b, x0=state.u)
    except SolverError as exc:
        raise type(exc)(f"step {state.n + 1}: {exc}", exc.residual) from exc
    if cfg.mass_correction:
        u = disc.correct_mass(u, b)
    if not np.all(np.isfinite(u)) or np.abs(u).max() > DIVERGENCE_BOUND:
        raise DivergenceError(f"step {state.n + 1}: solution left the bounded range "
                              f"(max |u| = {np.abs(u).max():.3g})")
    new = SimState(u, state.n + 1, state.history, state.snapshots, cfg.dt)
    new.history.append(_record(disc, cfg, u, new.t))
    return new


def _snapshot_steps(cfg: SchemeConfig) -> dict[int, float]:
    return {int(round(ts / cfg.dt)): ts for ts in cfg.snapshots
            if 0 <= round(ts / cfg.dt) <= cfg.n_steps}


def run(mesh: Mesh, cfg: SchemeConfig, u0, disc: Discretization | None = None,
        callback=None) -> SimState:
    """Integrate from ``u0`` to ``cfg.t_end``.

    ``u0`` is a nodal vector or a callable ``f(x, y)``.  Scalar records are
    kept every step, fields only at the configured snapshot times.
    """
    if disc is None:
        disc = discretize(mesh, cfg)
    u = interpolate(mesh, u0) if callable(u0) else np.array(u0, dtype=float)
    state = SimState(u, 0, [], {}, cfg.dt)
    state.history.append(_record(disc, cfg, u, 0.0))
    snaps = _snapshot_steps(cfg)
    if 0 in snaps:
        state.snapshots[snaps[0]] = u.copy()
    for _ in range(cfg.n_steps):
        state = step(state, disc, cfg)
        if state.n in snaps:
            state.snapshots[snaps[state.n]] = state.u.copy()
        if callback is not None:
            callback(state)
    log.debug("run finished: %d steps, mean iterations %.1f", state.n,
              np.mean(disc.solver.iterations) if disc.solver.iterations else 0.0)
    return state


def with_variant(cfg: SchemeConfig, variant: str) -> SchemeConfig:
    return replace(cfg, variant=variant)
