import numpy as np
import pytest

from chrec.io import read_keyvalue, read_vtk_scalars, write_keyvalue, write_vtk
from chrec.mesh import build_uniform_mesh, unstructured_square_mesh
from chrec.problems import (EXAMPLES, ex1_exact, ex1_grad, ex1_hess, ex1_source, get_problem,
                            grid_spacing, make_rng)


def test_vtk_roundtrip(tmp_path):
    mesh = unstructured_square_mesh(0)
    u = np.random.default_rng(0).standard_normal(mesh.n_vertices)
    path = write_vtk(tmp_path / "a.vtk", mesh, {"u": u, "v": -u})
    text = path.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 2.0" and text[2] == "ASCII"
    assert f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}" in text
    back = read_vtk_scalars(path)
    assert np.array_equal(back["u"], u) and np.array_equal(back["v"], -u)


def test_keyvalue_roundtrip_and_errors(tmp_path):
    p = write_keyvalue(tmp_path / "m.txt", {"a": 1, "dt": 0.1 + 0.2, "snaps": (0.0, 0.5)})
    back = read_keyvalue(p)
    assert back == {"a": "1", "dt": repr(0.1 + 0.2), "snaps": "0.0,0.5"}
    (tmp_path / "bad.txt").write_text("# comment\na = 1\nnonsense\n")
    with pytest.raises(ValueError, match="bad.txt:3"):
        read_keyvalue(tmp_path / "bad.txt")


def test_get_problem():
    assert set(EXAMPLES) == set(range(1, 8))
    with pytest.raises(ValueError, match="unknown example 9"):
        get_problem(9)


def test_example_defaults():
    assert get_problem(3).epsilon == 0.02 and get_problem(3).dt == 1e-3
    for k in (5, 6, 7):
        assert get_problem(k).dt == 5e-5
    assert get_problem(5).snapshots == (0.0, 0.005, 0.01, 0.05, 0.1, 1.0)
    p7 = get_problem(7)
    assert p7.domain == ((-1.0, -1.0), (1.0, 1.0))
    # h = 1/128 on a square of side 2
    assert 2 / p7.m == 1 / 128


def test_ex1_source_against_finite_differences():
    # g = u_t + eps^2 Lap^2 u - Lap(u^3 - u), checked by central differences
    eps, t, d = 0.1, 0.03, 1e-3
    x, y = np.array([0.2, 0.55, 0.9]), np.array([0.35, 0.1, 0.7])
    u = lambda x, y: ex1_exact(x, y, t)
    lap = lambda f: lambda x, y: (f(x + d, y) + f(x - d, y) + f(x, y + d) + f(x, y - d)
                                  - 4 * f(x, y)) / d**2
    ut = (ex1_exact(x, y, t + 1e-6) - ex1_exact(x, y, t - 1e-6)) / 2e-6
    bilap = 4 * np.pi**4 * u(x, y)  # exact for this eigenfunction
    lap_f = lap(lambda x, y: u(x, y) ** 3 - u(x, y))(x, y)
    want = ut + eps**2 * bilap - lap_f
    assert np.allclose(ex1_source(x, y, t, eps), want, rtol=1e-4, atol=1e-4)
    # the biharmonic shortcut: Lap u = -2 pi^2 u
    assert np.allclose(lap(u)(x, y), -2 * np.pi**2 * u(x, y), rtol=1e-5)


def test_ex1_derivatives_against_finite_differences():
    x, y, t, d = 0.3, 0.8, 0.05, 1e-5
    g = ex1_grad(x, y, t)
    assert g[0] == pytest.approx((ex1_exact(x + d, y, t) - ex1_exact(x - d, y, t)) / (2 * d))
    assert g[1] == pytest.approx((ex1_exact(x, y + d, t) - ex1_exact(x, y - d, t)) / (2 * d))
    H = ex1_hess(x, y, t)
    dx = (ex1_grad(x + d, y, t) - ex1_grad(x - d, y, t)) / (2 * d)
    assert np.allclose(H[0], dx, rtol=1e-6) and np.allclose(H[1, 0], H[0, 1])


def test_bump_initial_support():
    mesh = build_uniform_mesh(64)
    u = get_problem(3).initial(mesh, None)
    h = grid_spacing(mesh)
    x, y = mesh.vertices.T
    assert np.all(u[(x >= 8 * h - 1e-12) | (y >= 8 * h - 1e-12)] == 0)
    # sin(pi x / 4h) changes sign at 4h, so the bump has four lobes
    assert 0 < u.max() <= 1e-3 and -1e-3 <= u.min() < 0


def test_random_initial_is_seeded():
    mesh = build_uniform_mesh(16)
    p = get_problem(4)
    a, b = p.initial(mesh, make_rng(42)), p.initial(mesh, make_rng(42))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, p.initial(mesh, make_rng(43)))
    assert -1 <= a.min() and a.max() <= 1


@pytest.mark.parametrize("k", [5, 6])
def test_sharp_interfaces_take_two_values(k):
    mesh = build_uniform_mesh(32)
    u = get_problem(k).initial(mesh, None)
    assert set(np.unique(u)) == {-0.95, 0.95}
    assert u[np.argmin(np.hypot(*(mesh.vertices - 0.5).T))] == 0.95


def test_two_circles_profile():
    p = get_problem(7)
    mesh = build_uniform_mesh(64, p.domain)
    u = p.initial(mesh, None)
    x, y = mesh.vertices.T
    centre = np.argmin(np.hypot(x + 0.3, y))
    assert u[centre] < -0.99 and u.max() > 0.99
    assert np.all(np.abs(u) <= 1)
