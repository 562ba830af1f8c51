"""Acceptance criteria.  Each test prints one PASS/FAIL line; the session
summary repeats them under "acceptance criteria".

Reference values: e0 = 9.92e-4 at h = 1/64 for the uniform spatial ladder
(at T = 0.1) and the temporal anchors 1.13e-3 / 1.41e-4.
"""
from functools import cache

import numpy as np
import pytest

from chrec.diagnostics import convergence_ladder, temporal_ladder
from chrec.linalg import SolverConfig
from chrec.mesh import build_patches, build_uniform_mesh, uniform_refine, unstructured_square_mesh
from chrec.problems import get_problem, make_rng, source_for
from chrec.recovery import build_ghost_point_laplacian, build_recovery, normal_equations_fit
from chrec.schemes import SchemeConfig, discretize, rhs, run, step

SPATIAL_BANDS = {"e0": 1.9, "e1": 0.95, "e1r": 1.9, "e2": 0.95}


def example_config(k, **kw):
    p = get_problem(k)
    base = dict(epsilon=p.epsilon, dt=p.dt, t_end=p.t_end, variant="uniform-simple",
                source=source_for(p))
    base.update(kw)
    return SchemeConfig(**base)


def rate_failures(table):
    return [f"r({n})={table.rate(n):.2f}<{lo}" for n, lo in SPATIAL_BANDS.items()
            if not table.rate(n) >= lo]


def rate_summary(table):
    return " ".join(f"r({n})={table.rate(n):.2f}" for n in SPATIAL_BANDS)


def test_c01_five_point_equivalence(criterion):
    with criterion(1, "five-point equivalence on the 32x32 uniform mesh", 1.0) as c:
        m = 32
        mesh = build_uniform_mesh(m)
        lap = build_recovery(mesh).lap
        h2 = (1 / m) ** 2
        gi = mesh.grid_index
        lookup = np.empty((m + 1, m + 1), dtype=int)
        lookup[gi[:, 0], gi[:, 1]] = np.arange(mesh.n_vertices)
        worst = 0.0
        for z in np.setdiff1d(np.arange(mesh.n_vertices), mesh.boundary_vertices):
            i, j = gi[z]
            want = {lookup[i, j]: -4.0, lookup[i + 1, j]: 1.0, lookup[i - 1, j]: 1.0,
                    lookup[i, j + 1]: 1.0, lookup[i, j - 1]: 1.0}
            row = lap.getrow(z).toarray().ravel() * h2
            ref = np.zeros_like(row)
            ref[list(want)] = list(want.values())
            worst = max(worst, np.abs(row - ref).max() / 4.0)
        c.detail = f"max relative deviation {worst:.1e} over {(m - 1) ** 2} rows"
        assert worst <= 1e-12, c.detail


def test_c02_quadratic_exactness(criterion):
    with criterion(2, "quadratic exactness of G_h and H_h", 5.0) as c:
        rng = np.random.default_rng(2024)
        meshes = [build_uniform_mesh(32), unstructured_square_mesh(2)]
        assert meshes[1].n_vertices == 1969
        worst_g = worst_h = 0.0
        for mesh in meshes:
            rec = build_recovery(mesh)
            x, y = mesh.vertices.T
            for _ in range(20):
                a = rng.standard_normal(6)
                u = a[0] + a[1] * x + a[2] * y + a[3] * x * x + a[4] * x * y + a[5] * y * y
                grad = np.column_stack([a[1] + 2 * a[3] * x + a[4] * y,
                                        a[2] + a[4] * x + 2 * a[5] * y])
                hess = np.array([[2 * a[3], a[4]], [a[4], 2 * a[5]]])
                worst_g = max(worst_g, np.abs(rec.gradient(u) - grad).max())
                worst_h = max(worst_h, np.abs(rec.hessian(u) - hess).max())
        c.detail = f"max |G_h q - grad q| {worst_g:.1e}, max |H_h q - D2 q| {worst_h:.1e}"
        assert worst_g <= 1e-9 and worst_h <= 1e-9, c.detail


def test_c03_uniform_spatial_ladder(criterion):
    with criterion(3, "uniform ladder h=1/16..1/64, dt=1e-5, T=0.01", 300.0) as c:
        problem = get_problem(1)
        cfg = example_config(1, dt=1e-5, t_end=0.01)
        table = convergence_ladder(problem, [build_uniform_mesh(m) for m in (16, 32, 64)], cfg)
        e0 = table.column("e0")[-1]
        c.detail = f"{rate_summary(table)}; e0(1/64)={e0:.3e} (reference 9.92e-4, factor 3)"
        bad = rate_failures(table)
        if not 9.92e-4 / 3 <= e0 <= 9.92e-4 * 3:
            bad.append(f"e0(1/64)={e0:.3e} outside [{9.92e-4 / 3:.3e}, {9.92e-4 * 3:.3e}]")
        if bad:
            c.detail += "; " + ", ".join(bad)
        assert not bad, "; ".join(bad)


def test_c04_unstructured_nitsche_ladder(criterion):
    with criterion(4, "unstructured ladder, Laplacian Nitsche form, C=1, kappa=2", 600.0) as c:
        problem = get_problem(1)
        cfg = example_config(1, dt=1e-5, t_end=0.01, variant="nitsche-laplace",
                             nitsche_c=1.0, kappa=2.0)
        base = unstructured_square_mesh(0)
        meshes = [uniform_refine(base)]
        for _ in range(2):
            meshes.append(uniform_refine(meshes[-1]))
        table = convergence_ladder(problem, meshes, cfg, label="dof")
        c.detail = rate_summary(table)
        bad = rate_failures(table)
        assert not bad, "; ".join(bad)


def test_c05_temporal_order(criterion):
    with criterion(5, "temporal ladder h=1/128, T=0.01, dt=1e-3/2^k", 600.0) as c:
        problem = get_problem(1)
        cfg = example_config(1, t_end=0.01)
        dts = [1e-3 * 2.0**-k for k in range(4)]
        table = temporal_ladder(problem, build_uniform_mesh(128), cfg, dts)
        e = table.column("e0")
        r = table.rates[:, 0]
        c.detail = ("e0 " + ", ".join(f"{v:.3e}" for v in e) + "; r " +
                    ", ".join(f"{v:.2f}" for v in r) + " (anchors 1.13e-3, 1.41e-4)")
        bad = [f"r={v:.2f}" for v in r if not 0.9 <= v <= 1.1]
        for got, ref in ((e[0], 1.13e-3), (e[-1], 1.41e-4)):
            if abs(got - ref) > 0.25 * ref:
                bad.append(f"{got:.3e} vs anchor {ref:.2e}")
        assert not bad, "; ".join(bad)


@cache
def example4_run():
    mesh = build_uniform_mesh(64)
    cfg = example_config(4, dt=1e-3, t_end=1.0)
    assert cfg.n_steps == 1000
    state = run(mesh, cfg, get_problem(4).initial(mesh, make_rng(42)))
    return state.history


def test_c06_mass_conservation(criterion):
    with criterion(6, "mass conservation, example 4, h=1/64, 1000 steps", 120.0) as c:
        hist = example4_run()
        mass = np.array([r.mass for r in hist])
        drift = np.abs(mass - mass[0]).max() / abs(mass[0])
        c.detail = f"relative drift {drift:.1e} (initial mass {mass[0]:.3e})"
        assert drift <= 1e-8, c.detail


@pytest.mark.parametrize("k", [3, 4, 5, 6, 7])
def test_c07_energy_dissipation(criterion, k):
    # criterion 7 is split per example; each part reports under 7.k
    with criterion(7 + k / 10, f"energy non-increasing, example {k}, 500 steps", 120.0) as c:
        p = get_problem(k)
        m = 128 if k == 7 else 64  # h = 1/64 on the side-2 domain of example 7
        mesh = build_uniform_mesh(m, p.domain)
        cfg = example_config(k, t_end=500 * p.dt)
        assert cfg.n_steps == 500
        hist = run(mesh, cfg, p.initial(mesh, make_rng(42))).history
        E = np.array([r.energy for r in hist])
        dE = np.diff(E)
        c.detail = (f"E {E[0]:.6g} -> {E[-1]:.6g}; max step change {dE.max():.2e}, "
                    f"{int(np.sum(dE > 1e-10))} increases above 1e-10")
        assert dE.max() <= 1e-10, c.detail


def test_c08_boundedness(criterion):
    with criterion(8, "max-norm of example 4 stays below 1.1", 120.0) as c:
        hist = example4_run()
        peak = max(r.max_norm for r in hist)
        c.detail = f"max |u| over all steps {peak:.4f}"
        assert peak <= 1.1, c.detail


def test_c09_oracle_equivalence(criterion):
    with criterion(9, "single step vs dense solve; patch weights vs normal equations", 30.0) as c:
        mesh = build_uniform_mesh(16)
        cfg = example_config(1, dt=1e-3, t_end=1e-3,
                             solver=SolverConfig(method="sparse-direct"))
        disc = discretize(mesh, cfg)
        state = run(mesh, example_config(1, dt=1e-3, t_end=0.0), get_problem(1).initial(mesh),
                    disc)
        new = step(state, disc, cfg)
        dense = np.linalg.solve(disc.system.toarray(), rhs(disc, cfg, state.u, cfg.dt))
        step_err = np.linalg.norm(new.u - dense) / np.linalg.norm(dense)

        pmesh = unstructured_square_mesh(1)
        rec = build_recovery(pmesh)
        patches = build_patches(pmesh)
        rng = np.random.default_rng(9)
        worst = 0.0
        for z in rng.choice(pmesh.n_vertices, 100, replace=False):
            nodes = patches[z].sample_nodes
            pts, center = pmesh.vertices[nodes], pmesh.vertices[z]
            coef = normal_equations_fit(pts, center, np.eye(len(nodes)))
            s = np.max(np.linalg.norm(pts - center, axis=1))
            oracle = {"gx": coef[1] / s, "gy": coef[2] / s, "hxx": 2 * coef[3] / s**2,
                      "hxy": coef[4] / s**2, "hyy": 2 * coef[5] / s**2}
            for name, want in oracle.items():
                row = getattr(rec, name).getrow(z).toarray().ravel()
                got = row[nodes]
                assert np.abs(row).sum() == pytest.approx(np.abs(got).sum(), rel=1e-14)
                worst = max(worst, np.abs(got - want).max() / np.abs(want).max())
        c.detail = f"step relative difference {step_err:.1e}; patch weights {worst:.1e}"
        assert step_err <= 1e-12 and worst <= 1e-10, c.detail


def test_c10_ghost_point_closure(criterion):
    with criterion(10, "ghost-point Laplacian of cos(pi x)cos(pi y) on h=1/16", 1.0) as c:
        m = 16
        mesh = build_uniform_mesh(m)
        x, y = mesh.vertices.T
        u = np.cos(np.pi * x) * np.cos(np.pi * y)
        err = np.abs(build_ghost_point_laplacian(mesh).lap @ u + 2 * np.pi**2 * u)
        interior = np.setdiff1d(np.arange(mesh.n_vertices), mesh.boundary_vertices)
        ratio = err.max() / err[interior].max()
        # leading truncation term of the five-point stencil: h^2/12 (u_xxxx + u_yyyy)
        bound = np.pi**4 / 6 / m**2
        c.detail = (f"max error {err.max():.2e} (corner {err[0]:.2e}), "
                    f"ratio to interior {ratio:.2f}, h^2 bound {bound:.2e}")
        assert ratio <= 4 and err.max() <= bound, c.detail
