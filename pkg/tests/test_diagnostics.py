import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chrec.diagnostics import (RECORD_COLUMNS, RateTable, convergence_ladder,
                               convergence_rates, record, temporal_ladder, worker_count,
                               write_records_csv)
from chrec.mesh import build_uniform_mesh, unstructured_square_mesh
from chrec.problems import Problem, get_problem
from chrec.recovery import build_recovery
from chrec.schemes import SchemeConfig


def test_record_of_pure_phase():
    mesh = unstructured_square_mesh(0)
    r = record(mesh, build_recovery(mesh), np.ones(mesh.n_vertices), 0.5, 0.1)
    assert r.E1 == pytest.approx(0, abs=1e-25)
    assert r.E2 == pytest.approx(0, abs=1e-25)
    assert r.mass == pytest.approx(1.0, rel=1e-14)
    assert r.max_norm == 1.0 and r.time == 0.5


def test_interfacial_energy_of_cosine():
    mesh = build_uniform_mesh(64)
    x, y = mesh.vertices.T
    u = np.cos(np.pi * x) * np.cos(np.pi * y)
    r = record(mesh, build_recovery(mesh), u, 0.0, 0.1)
    assert r.E1 == pytest.approx(0.01 * np.pi**2 / 4, rel=0.02)
    # bulk energy: 1/4 int (u^2 - 1)^2 = 1/4 (9/64 - 1/2 + 1)
    assert r.E2 == pytest.approx(0.25 * (9 / 64 - 0.5 + 1), rel=1e-3)


def test_energies_non_negative_random():
    mesh = unstructured_square_mesh(0)
    rec = build_recovery(mesh)
    rng = np.random.default_rng(0)
    for _ in range(10):
        r = record(mesh, rec, rng.uniform(-2, 2, mesh.n_vertices), 0.0, 0.05)
        assert r.E1 >= 0 and r.E2 >= 0
        assert r.energy == r.E1 + r.E2


@settings(max_examples=50)
@given(st.lists(st.floats(1e-8, 1e3), min_size=3, max_size=6), st.floats(1e-6, 1e6))
def test_rates_scale_invariant(errs, c):
    a = convergence_rates(errs)
    b = convergence_rates([c * e for e in errs])
    assert np.allclose(a, b, atol=1e-9)


def test_rates_values_and_undefined():
    r = convergence_rates([[1.0, 0.0], [0.25, 0.0], [0.0625, 1e-300]])
    assert np.allclose(r[:, 0], 2.0)
    assert np.all(np.isnan(r[:, 1]))


def test_rate_table_outputs(tmp_path):
    t = RateTable("h", [1 / 8, 1 / 16], np.array([[4e-2, 1, 2, 3], [1e-2, 0.5, 0.5, 1.5]]))
    assert t.rate("e0") == pytest.approx(2.0)
    assert t.rate("e1") == pytest.approx(1.0)
    assert np.array_equal(t.column("e1r"), [2, 0.5])
    rows = list(t.rows())
    assert math.isnan(rows[0]["r_e0"]) and rows[1]["r_e1r"] == pytest.approx(2.0)
    with open(t.to_csv(tmp_path / "r.csv"), newline="") as fh:
        back = list(csv.DictReader(fh))
    assert back[0]["r_e0"] == "" and float(back[1]["r_e0"]) == pytest.approx(2.0)
    text = t.format()
    assert text.splitlines()[0].split()[:3] == ["h", "e0", "r"]
    assert "2.00" in text


def test_records_csv(tmp_path):
    mesh = build_uniform_mesh(4)
    rec = build_recovery(mesh)
    x, _ = mesh.vertices.T
    hist = [record(mesh, rec, np.cos(np.pi * x) * s, 0.1 * s, 0.1) for s in (1.0, 0.5)]
    with open(write_records_csv(hist, tmp_path / "rec.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == RECORD_COLUMNS
    assert float(rows[2][3]) == hist[1].energy
    assert float(rows[1][4]) == hist[0].mass


def test_ladder_with_constant_exact_solution_reports_undefined_rates():
    c = 0.3
    const = Problem(
        "constant", 0.1, lambda mesh, rng: np.full(mesh.n_vertices, c),
        exact=lambda x, y, t: np.full(np.shape(x), c),
        exact_grad=lambda x, y, t: np.zeros(np.shape(x) + (2,)),
        exact_hess=lambda x, y, t: np.zeros(np.shape(x) + (2, 2)))
    cfg = SchemeConfig(epsilon=0.1, dt=1e-3, t_end=3e-3, variant="uniform-simple")
    table = convergence_ladder(const, [build_uniform_mesh(m) for m in (4, 8, 16)], cfg)
    assert np.all(table.errors == 0)
    assert np.all(np.isnan(table.rates))


def test_ladder_against_finer_solution():
    problem = get_problem(2)
    cfg = SchemeConfig(epsilon=0.1, dt=1e-4, t_end=1e-3, variant="uniform-simple")
    table = convergence_ladder(problem, [build_uniform_mesh(m) for m in (8, 16, 32)], cfg)
    assert len(table.levels) == 2 and table.meta["reference"] == "finer"
    assert table.rate("e0") > 1.5


def test_temporal_ladder_matches_individual_runs():
    from chrec.fem import error_norms
    from chrec.problems import source_for
    from chrec.schemes import run

    problem = get_problem(1)
    mesh = build_uniform_mesh(16)
    cfg = SchemeConfig(epsilon=0.1, dt=1e-3, t_end=4e-3, variant="uniform-simple",
                       source=source_for(problem))
    table = temporal_ladder(problem, mesh, cfg, [2e-3, 1e-3])
    assert table.names == ("e0",) and table.levels == [2e-3, 1e-3]
    state = run(mesh, cfg, problem.initial(mesh, None))
    e0 = error_norms(mesh, state.u, build_recovery(mesh), *problem.at_time(state.t))[0]
    assert table.errors[1, 0] == pytest.approx(e0, rel=1e-8)
    with pytest.raises(ValueError):
        temporal_ladder(get_problem(2), build_uniform_mesh(8), cfg, [1e-3])


def test_parallel_ladder_matches_serial():
    problem = get_problem(2)
    cfg = SchemeConfig(epsilon=0.1, dt=1e-4, t_end=5e-4, variant="uniform-simple")
    meshes = [build_uniform_mesh(m) for m in (8, 16)]
    a = convergence_ladder(problem, meshes, cfg, workers=1)
    b = convergence_ladder(problem, meshes, cfg, workers=2)
    assert np.array_equal(a.errors, b.errors)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("CHREC_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("CHREC_THREADS", "zero")
    assert worker_count() == 1
    monkeypatch.delenv("CHREC_THREADS")
    assert worker_count() == 1
