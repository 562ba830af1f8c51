"""
Solving the per-step systems
============================

The system matrix ``M/dt + eps^2 A + kappa K`` is fixed for a run, so the
preconditioner (or factorization) is built once.  Incomplete Cholesky
preconditioned CG warm-started from the previous step needs only a handful
of iterations per step.
"""
import time

import numpy as np

from chrec.linalg import SolverConfig
from chrec.mesh import build_uniform_mesh
from chrec.problems import get_problem, make_rng
from chrec.schemes import SchemeConfig, discretize, run

mesh = build_uniform_mesh(64)
u0 = get_problem(4).initial(mesh, make_rng(1))
for solver in (SolverConfig(preconditioner="none"), SolverConfig(preconditioner="jacobi"),
               SolverConfig(), SolverConfig(method="sparse-direct")):
    cfg = SchemeConfig(epsilon=0.02, dt=1e-3, t_end=0.1, variant="uniform-simple", solver=solver)
    start = time.perf_counter()
    disc = discretize(mesh, cfg)
    state = run(mesh, cfg, u0, disc)
    its = np.mean(disc.solver.iterations)
    name = "direct" if solver.method == "sparse-direct" else f"CG, {solver.preconditioner}"
    print(f"{name:>24}: {its:6.1f} it/step, "
          f"{time.perf_counter() - start:5.2f} s, final energy {state.history[-1].energy:.8f}")
