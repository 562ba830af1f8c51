"""Piecewise linear finite element primitives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


@dataclass(frozen=True)
class Quadrature:
    """Quadrature on the reference simplex.

    ``points`` are barycentric coordinates and ``weights`` sum to one, so the
    integral over a cell is its measure times the weighted sum.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int


def _triangle_rule() -> Quadrature:
    # 6-point symmetric rule, exact to degree 4
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts = []
    for c, _ in ((a, wa), (b, wb)):
        pts += [(c, c, 1 - 2 * c), (c, 1 - 2 * c, c), (1 - 2 * c, c, c)]
    return Quadrature(np.array(pts), np.array([wa] * 3 + [wb] * 3), 4)


def _edge_rule() -> Quadrature:
    g = 0.5 / np.sqrt(3.0)
    return Quadrature(np.array([[0.5 + g, 0.5 - g], [0.5 - g, 0.5 + g]]),
                      np.array([0.5, 0.5]), 3)


TRIANGLE_RULE = _triangle_rule()
EDGE_RULE = _edge_rule()


def quadrature_points(mesh: Mesh, rule: Quadrature = TRIANGLE_RULE) -> np.ndarray:
    """Physical quadrature points, shape (n_triangles, n_points, 2)."""
    return np.einsum("qk,tkd->tqd", rule.points, mesh.vertices[mesh.triangles])


def at_quadrature(mesh: Mesh, nodal, rule: Quadrature = TRIANGLE_RULE) -> np.ndarray:
    """Values of the linear interpolant of ``nodal`` at the quadrature points."""
    return np.einsum("qk,tk...->tq...", rule.points, np.asarray(nodal)[mesh.triangles])


def integrate(mesh: Mesh, values_at_qp, rule: Quadrature = TRIANGLE_RULE) -> float:
    return float(np.einsum("tq,q,t->", values_at_qp, rule.weights, mesh.areas))


def barycentric_gradients(mesh: Mesh) -> np.ndarray:
    """Constant gradients of the three hat functions on each triangle, (T, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    twice = 2.0 * mesh.areas[:, None]
    nxt, prv = p[:, [1, 2, 0]], p[:, [2, 0, 1]]
    return np.stack([nxt[..., 1] - prv[..., 1], prv[..., 0] - nxt[..., 0]], axis=-1) / twice[..., None]


def _assemble(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).reshape(-1)
    cols = np.tile(t, (1, 3)).reshape(-1)
    A = sp.csr_matrix((local.reshape(-1), (rows, cols)),
                      shape=(mesh.n_vertices, mesh.n_vertices))
    A.sum_duplicates()
    return symmetrize(A)


def symmetrize(A) -> sp.csr_matrix:
    """``(A + A^T)/2`` in CSR form: bitwise symmetric."""
    A = sp.csr_matrix(A)
    S = ((A + A.T) * 0.5).tocsr()
    S.sort_indices()
    return S


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix."""
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _assemble(mesh, mesh.areas[:, None, None] * ref)


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    g = barycentric_gradients(mesh)
    local = mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", g, g)
    return _assemble(mesh, local)


def interpolate(mesh: Mesh, f) -> np.ndarray:
    """Nodal values of ``f(x, y)``; constants broadcast."""
    x, y = mesh.vertices.T
    if callable(f):
        return np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape).copy()
    return np.full(mesh.n_vertices, float(f))


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Boundary edge endpoints as "slots" (two per edge).

    ``select`` maps a nodal vector to its values at the slots, ``normals`` is
    the outward normal of each slot's edge, and ``mass`` is the block
    diagonal edge mass matrix so that ``a_s^T mass b_s`` is the exact boundary
    integral of the product of two piecewise linear edge traces.
    """

    select: sp.csr_matrix
    normals: np.ndarray
    lengths: np.ndarray
    mass: sp.csr_matrix

    def normal_component(self, gx, gy) -> sp.csr_matrix:
        """Operator sending a nodal vector to ``G v . n`` at each slot."""
        nx = sp.diags(self.normals[:, 0])
        ny = sp.diags(self.normals[:, 1])
        return (nx @ self.select @ gx + ny @ self.select @ gy).tocsr()

    def normal_normal(self, hxx, hxy, hyy) -> sp.csr_matrix:
        """Operator sending a nodal vector to ``n^T H v n`` at each slot."""
        n = self.normals
        S = self.select
        return (sp.diags(n[:, 0] ** 2) @ S @ hxx
                + sp.diags(2 * n[:, 0] * n[:, 1]) @ S @ hxy
                + sp.diags(n[:, 1] ** 2) @ S @ hyy).tocsr()


def boundary_trace(mesh: Mesh) -> BoundaryTrace:
    be = mesh.boundary_edges
    ne = len(be)
    slots = be.reshape(-1)
    select = sp.csr_matrix((np.ones(2 * ne), (np.arange(2 * ne), slots)),
                           shape=(2 * ne, mesh.n_vertices))
    length = mesh.boundary_lengths
    first = 2 * np.arange(ne)
    rows = np.concatenate([first, first, first + 1, first + 1])
    cols = np.concatenate([first, first + 1, first, first + 1])
    vals = np.concatenate([2 * length, length, length, 2 * length]) / 6.0
    mass = sp.csr_matrix((vals, (rows, cols)), shape=(2 * ne, 2 * ne))
    return BoundaryTrace(select, np.repeat(mesh.boundary_normals, 2, axis=0),
                         np.repeat(length, 2), mass)


def boundary_edge_integrals(mesh: Mesh, *fields) -> float:
    """Boundary integral of the product of piecewise linear traces.

    Each field is a nodal scalar vector of shape (n,) or a nodal vector field
    of shape (n, 2); vector fields enter through their normal component, using
    the outward normal of the edge being integrated.  The two-point Gauss rule
    is exact for products of up to three linear traces.
    """
    be = mesh.boundary_edges
    n = mesh.boundary_normals
    prod = np.ones((len(be), len(EDGE_RULE.weights)))
    for f in fields:
        f = np.asarray(f, dtype=float)
        ends = f[be]
        if f.ndim == 2:
            ends = np.einsum("ekd,ed->ek", ends, n)
        prod = prod * (ends @ EDGE_RULE.points.T)
    return float(np.sum(prod @ EDGE_RULE.weights * mesh.boundary_lengths))


def nonlinear_load(mesh: Mesh, stiffness, u, mode: str = "nodal") -> np.ndarray:
    """Vector of ``(grad f(u_h), grad phi_i)`` with ``f(u) = u^3 - u``.

    ``nodal`` interpolates ``f(u)`` into the linear space first; ``quadrature``
    integrates ``(3 u_h^2 - 1) grad u_h . grad phi_i`` exactly.
    """
    if mode == "nodal":
        return stiffness @ (u**3 - u)
    if mode != "quadrature":
        raise ValueError(f"unknown nonlinear mode {mode!r}")
    t = mesh.triangles
    ut = u[t]
    mean_sq = (np.sum(ut**2, axis=1) + ut[:, 0] * ut[:, 1] + ut[:, 1] * ut[:, 2]
               + ut[:, 0] * ut[:, 2]) / 6.0
    g = barycentric_gradients(mesh)
    grad_u = np.einsum("tk,tkd->td", ut, g)
    local = ((3.0 * mean_sq - 1.0) * mesh.areas)[:, None] * np.einsum("td,tkd->tk", grad_u, g)
    return np.bincount(t.reshape(-1), weights=local.reshape(-1), minlength=mesh.n_vertices)


def error_norms(mesh: Mesh, u_h, recovery, u, grad_u, hess_u,
                rule: Quadrature = TRIANGLE_RULE) -> tuple[float, float, float, float]:
    """``(e0, e1, e1r, e2)`` against an analytic solution.

    ``u(x, y)``, ``grad_u(x, y) -> (..., 2)`` and ``hess_u(x, y) -> (..., 2, 2)``
    are evaluated at the quadrature points.  ``e1r`` measures the recovered
    gradient and ``e2`` the Frobenius norm of the recovered Hessian error.
    """
    qp = quadrature_points(mesh, rule)
    x, y = qp[..., 0], qp[..., 1]
    e0 = integrate(mesh, (u(x, y) - at_quadrature(mesh, u_h, rule)) ** 2, rule)
    gu = np.asarray(grad_u(x, y))
    grad_h = np.einsum("tk,tkd->td", u_h[mesh.triangles], barycentric_gradients(mesh))
    e1 = integrate(mesh, np.sum((gu - grad_h[:, None, :]) ** 2, axis=-1), rule)
    gr = at_quadrature(mesh, recovery.gradient(u_h), rule)
    e1r = integrate(mesh, np.sum((gu - gr) ** 2, axis=-1), rule)
    hr = at_quadrature(mesh, recovery.hessian(u_h), rule)
    e2 = integrate(mesh, np.sum((np.asarray(hess_u(x, y)) - hr) ** 2, axis=(-2, -1)), rule)
    return tuple(float(np.sqrt(max(e, 0.0))) for e in (e0, e1, e1r, e2))


def discrete_error_norms(mass, stiffness, fine_rec, u_fine, coarse_fields):
    """``(e0, e1, e1r, e2)`` of ``u_fine`` against a transferred coarse solution.

    ``coarse_fields`` holds nodal arrays already carried to the fine mesh:
    ``u`` (n,), ``grad`` (n, 2) and ``hess`` (n, 2, 2).  All integrands are
    piecewise linear, so the mass matrix integrates them exactly.
    """
    def sq(v):
        return float(v @ (mass @ v))

    d = u_fine - coarse_fields["u"]
    e0 = sq(d)
    e1 = float(d @ (stiffness @ d))
    dg = fine_rec.gradient(u_fine) - coarse_fields["grad"]
    e1r = sq(dg[:, 0]) + sq(dg[:, 1])
    dh = fine_rec.hessian(u_fine) - coarse_fields["hess"]
    e2 = sq(dh[:, 0, 0]) + 2 * sq(dh[:, 0, 1]) + sq(dh[:, 1, 1])
    return tuple(float(np.sqrt(max(e, 0.0))) for e in (e0, e1, e1r, e2))


def prolongation(fine: Mesh, coarse: Mesh | None = None) -> sp.csr_matrix:
    """Linear interpolation from a coarse mesh onto its uniform refinement.

    Uses the refinement parents when ``fine`` came from :func:`uniform_refine`.
    Two regular-pattern uniform meshes with ``fine.grid_m == 2 * coarse.grid_m``
    are matched through their lattice indices instead: a fine vertex is the
    midpoint of the coarse vertices at ``floor(I/2)`` and ``ceil(I/2)``, which
    for odd/odd indices is the cell diagonal.
    """
    if fine.parents is not None:
        p = fine.parents
        ncoarse = int(p.max()) + 1 if coarse is None else coarse.n_vertices
    elif (coarse is not None and fine.is_uniform_regular and coarse.is_uniform_regular
          and fine.grid_m == 2 * coarse.grid_m):
        lookup = np.empty((coarse.grid_m + 1,) * 2, dtype=np.int64)
        lookup[coarse.grid_index[:, 0], coarse.grid_index[:, 1]] = np.arange(coarse.n_vertices)
        gi = fine.grid_index
        lo, hi = gi // 2, (gi + 1) // 2
        p = np.column_stack([lookup[lo[:, 0], lo[:, 1]], lookup[hi[:, 0], hi[:, 1]]])
        ncoarse = coarse.n_vertices
    else:
        raise ValueError("mesh carries no refinement parents")
    n = fine.n_vertices
    rows = np.repeat(np.arange(n), 2)
    return sp.csr_matrix((np.full(2 * n, 0.5), (rows, p.reshape(-1))), shape=(n, ncoarse))
