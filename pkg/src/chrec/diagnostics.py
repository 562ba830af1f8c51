"""Energies, mass and error tables."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import TRIANGLE_RULE, at_quadrature, integrate, mass_matrix

ERROR_NAMES = ("e0", "e1", "e1r", "e2")


@dataclass(frozen=True)
class StepRecord:
    time: float
    E1: float
    E2: float
    mass: float
    max_norm: float

    @property
    def energy(self) -> float:
        return self.E1 + self.E2


def record(mesh, recovery, u, t, epsilon, mass=None) -> StepRecord:
    """Interfacial and bulk energy, total mass and max-norm of ``u``.

    The interfacial part integrates the recovered gradient, a piecewise
    linear field, exactly through the mass matrix; the bulk part uses the
    degree-4 rule, which is exact for the quartic of a linear function.
    """
    if mass is None:
        mass = mass_matrix(mesh)
    gx, gy = recovery.gx @ u, recovery.gy @ u
    E1 = 0.5 * epsilon**2 * float(gx @ (mass @ gx) + gy @ (mass @ gy))
    uq = at_quadrature(mesh, u, TRIANGLE_RULE)
    E2 = 0.25 * integrate(mesh, (uq**2 - 1.0) ** 2, TRIANGLE_RULE)
    total = float(np.sum(mass @ u))
    return StepRecord(float(t), E1, E2, total, float(np.max(np.abs(u))))


RECORD_COLUMNS = ("t", "E1", "E2", "E_total", "mass", "max_norm")


def write_records_csv(history, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in history:
            w.writerow([repr(r.time), repr(r.E1), repr(r.E2), repr(r.energy),
                        repr(r.mass), repr(r.max_norm)])
    return path


def convergence_rates(errors) -> np.ndarray:
    """``log2(e_h / e_{h/2})`` between consecutive rows; NaN where undefined.

    A rate is undefined when either error is zero or below roundoff
    (``1e-14`` relative to the largest error in its column).
    """
    e = np.asarray(errors, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    floor = 1e-14 * np.maximum(np.max(np.abs(e), axis=0), np.finfo(float).tiny)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log2(e[:-1] / e[1:])
    bad = (e[:-1] <= floor) | (e[1:] <= floor)
    r[bad] = np.nan
    return r


@dataclass
class RateTable:
    """Errors per ladder level with rates between consecutive levels."""

    label: str  # "h", "dt" or "dof"
    levels: list
    errors: np.ndarray
    names: tuple = ERROR_NAMES
    meta: dict = field(default_factory=dict)

    @property
    def rates(self) -> np.ndarray:
        return convergence_rates(self.errors)

    def column(self, name) -> np.ndarray:
        return np.asarray(self.errors)[:, self.names.index(name)]

    def rate(self, name, interval=-1) -> float:
        return float(self.rates[interval, self.names.index(name)])

    def rows(self):
        rates = self.rates
        for k, level in enumerate(self.levels):
            row = {self.label: level}
            for j, name in enumerate(self.names):
                row[name] = float(self.errors[k][j])
                row[f"r_{name}"] = float(rates[k - 1, j]) if k else math.nan
            yield row

    def to_csv(self, path) -> Path:
        path = Path(path)
        rows = list(self.rows())
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            for row in rows:
                w.writerow({k: ("" if isinstance(v, float) and math.isnan(v) else v)
                            for k, v in row.items()})
        return path

    def format(self) -> str:
        head = f"{self.label:>10}" + "".join(f"{n:>12}{'r':>6}" for n in self.names)
        lines = [head]
        for row in self.rows():
            level = row[self.label]
            s = f"{level:>10.4g}" if isinstance(level, float) else f"{level!s:>10}"
            for n in self.names:
                r = row[f"r_{n}"]
                s += f"{row[n]:12.3e}" + ("      " if math.isnan(r) else f"{r:6.2f}")
            lines.append(s)
        return "\n".join(lines)


# --------------------------------------------------------------- ladders

def worker_count() -> int:
    import os

    try:
        return max(1, int(os.environ.get("CHREC_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, args, workers):
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
        return list(pool.map(fn, *zip(*args)))


def _solve_level(problem, mesh, cfg, seed=0):
    from .problems import make_rng
    from .schemes import discretize, run

    disc = discretize(mesh, cfg)
    state = run(mesh, cfg, problem.initial(mesh, make_rng(seed)), disc)
    return state.u, state.t, disc.recovery


# errors below this, relative to max(1, max|u_h|), are reported as exact zeros
ROUNDOFF = 1e-10


def _exact_errors(problem, mesh, u, t, rec):
    from .fem import error_norms

    e = np.array(error_norms(mesh, u, rec, *problem.at_time(t)))
    e[e < ROUNDOFF * max(1.0, float(np.max(np.abs(u))))] = 0.0
    return e


def convergence_ladder(problem, meshes, cfg, label="h", levels=None, workers=None) -> RateTable:
    """Run ``cfg`` on each mesh and tabulate errors and rates.

    With an exact solution every level is measured against it.  Otherwise
    the meshes must be successive uniform refinements and level ``k`` is
    measured as ``u_{k+1} - P u_k`` on the finer mesh, with ``P`` the linear
    interpolation onto the refined mesh (so one fewer row results).
    """
    from .fem import discrete_error_norms, prolongation, stiffness_matrix

    meshes = list(meshes)
    results = _map(_solve_level, [(problem, m, cfg) for m in meshes], workers)
    if levels is None:
        from .problems import grid_spacing

        levels = [grid_spacing(m) if label == "h" else m.n_vertices for m in meshes]
    if problem.has_exact:
        errors = [_exact_errors(problem, m, u, t, rec) for m, (u, t, rec) in zip(meshes, results)]
        return RateTable(label, list(levels), np.array(errors), meta={"reference": "exact"})
    errors = []
    for k in range(len(meshes) - 1):
        fine = meshes[k + 1]
        P = prolongation(fine, meshes[k])
        uc, _, rc = results[k]
        uf, _, rf = results[k + 1]
        coarse = {"u": P @ uc, "grad": P @ rc.gradient(uc),
                  "hess": (P @ rc.hessian(uc).reshape(-1, 4)).reshape(-1, 2, 2)}
        errors.append(discrete_error_norms(mass_matrix(fine), stiffness_matrix(fine), rf, uf,
                                           coarse))
    return RateTable(label, list(levels[:-1]), np.array(errors), meta={"reference": "finer"})


def temporal_ladder(problem, mesh, cfg, dts, workers=None) -> RateTable:
    """Errors at ``cfg.t_end`` for a sequence of time steps on one mesh.

    Requires an exact solution; only ``e0`` is tabulated.
    """
    from dataclasses import replace

    if not problem.has_exact:
        raise ValueError("temporal ladder needs an exact solution")
    cfgs = [replace(cfg, dt=dt) for dt in dts]
    results = _map(_solve_level, [(problem, mesh, c) for c in cfgs], workers)
    errs = [_exact_errors(problem, mesh, u, t, rec)[0] for u, t, rec in results]
    return RateTable("dt", list(dts), np.array(errs)[:, None], names=("e0",))
