"""Least-squares gradient and Hessian recovery on linear finite element spaces.

Each vertex ``z`` gets a quadratic fitted to the nodal values on its patch;
derivatives of that quadratic at ``z`` define the recovered gradient and
Hessian.  Because the fit is linear in the data, every recovered quantity is
a fixed sparse matrix acting on the nodal vector, assembled once per mesh.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .mesh import RANK_TOL, Mesh, Patch, PatchError, build_patches, local_vandermonde

LS_PATCH = "ls-patch"
GHOST_POINT = "ghost-point"
# weights below this fraction of the row maximum are fitting roundoff
PRUNE_TOL = 1e-13


@dataclass(frozen=True)
class QuadraticFit:
    """``p = c0 + c1*xi + c2*eta + c3*xi^2 + c4*xi*eta + c5*eta^2`` with
    ``xi = (x - cx)/scale`` and ``eta = (y - cy)/scale``."""

    coefficients: np.ndarray
    center: np.ndarray
    scale: float

    def __call__(self, x, y):
        xi = (np.asarray(x) - self.center[0]) / self.scale
        eta = (np.asarray(y) - self.center[1]) / self.scale
        c = self.coefficients
        return c[0] + c[1] * xi + c[2] * eta + c[3] * xi**2 + c[4] * xi * eta + c[5] * eta**2

    @property
    def gradient(self) -> np.ndarray:
        c, s = self.coefficients, self.scale
        return np.array([c[1], c[2]]) / s

    @property
    def hessian(self) -> np.ndarray:
        c, s = self.coefficients, self.scale
        return np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]]) / s**2


def _pseudoinverse(points, centers, tol=RANK_TOL):
    """Batched least-squares solution operators of shape (B, 6, k).

    ``points`` is (B, k, 2) and ``centers`` (B, 2).  The SVD doubles as the
    rank test.
    """
    scale = np.max(np.linalg.norm(points - centers[:, None, :], axis=2), axis=1)
    V = local_vandermonde(points, centers, scale)
    U, S, Wt = np.linalg.svd(V, full_matrices=False)
    bad = S[:, -1] <= tol * S[:, 0]
    if np.any(bad):
        raise PatchError(f"rank-deficient patch (batch entry {int(np.argmax(bad))})")
    pinv = np.einsum("bji,bj,bkj->bik", Wt, 1.0 / S, U)
    return pinv, scale


def fit_quadratic(mesh: Mesh, patch: Patch, values) -> QuadraticFit:
    """Least-squares quadratic through ``values`` sampled at the patch nodes."""
    values = np.asarray(values, dtype=float)
    pts = mesh.vertices[patch.sample_nodes]
    center = mesh.vertices[patch.center]
    pinv, scale = _pseudoinverse(pts[None], center[None])
    coef = pinv[0] @ values[patch.sample_nodes]
    return QuadraticFit(coef, center.copy(), float(scale[0]))


def normal_equations_fit(points, center, values) -> np.ndarray:
    """Reference fit: assemble and solve the 6x6 normal equations densely.

    Returns coefficients in the same scaled basis as :class:`QuadraticFit`.
    """
    points = np.asarray(points, dtype=float)
    center = np.asarray(center, dtype=float)
    scale = np.max(np.linalg.norm(points - center, axis=1))
    V = local_vandermonde(points, center, scale)
    import scipy.linalg as sla

    return sla.cho_solve(sla.cho_factor(V.T @ V), V.T @ np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class RecoveryOperator:
    gx: sp.csr_matrix
    gy: sp.csr_matrix
    hxx: sp.csr_matrix
    hxy: sp.csr_matrix
    hyy: sp.csr_matrix
    lap: sp.csr_matrix
    boundary_mode: str

    def gradient(self, u) -> np.ndarray:
        return np.column_stack([self.gx @ u, self.gy @ u])

    def hessian(self, u) -> np.ndarray:
        """Recovered Hessian as an (n, 2, 2) array."""
        xx, xy, yy = self.hxx @ u, self.hxy @ u, self.hyy @ u
        return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2)

    def matrices(self) -> dict[str, sp.csr_matrix]:
        return {k: getattr(self, k) for k in ("gx", "gy", "hxx", "hxy", "hyy", "lap")}


def _rows_to_csr(n, rows, cols, data, center_slot):
    # exact row sums of zero: the centre weight absorbs the rounding
    data = data.copy()
    rowmax = np.zeros(n)
    np.maximum.at(rowmax, rows, np.abs(data))
    data[np.abs(data) < PRUNE_TOL * rowmax[rows]] = 0.0
    data[center_slot] = 0.0
    data[center_slot] = -np.bincount(rows, weights=data, minlength=n)[rows[center_slot]]
    mat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    mat.eliminate_zeros()
    return mat


def build_recovery(mesh: Mesh, patches: list[Patch] | None = None) -> RecoveryOperator:
    """Assemble recovered gradient, Hessian and Laplacian matrices.

    Patches are grouped by sample count so the local fits run as batched SVDs.
    """
    if patches is None:
        patches = build_patches(mesh)
    n = mesh.n_vertices
    sizes = np.array([len(p) for p in patches])
    rows, cols, center_slot = [], [], []
    weights = {k: [] for k in ("gx", "gy", "hxx", "hxy", "hyy")}
    offset = 0
    for k in np.unique(sizes):
        group = np.flatnonzero(sizes == k)
        nodes = np.array([patches[g].sample_nodes for g in group])
        centers = mesh.vertices[[patches[g].center for g in group]]
        try:
            pinv, s = _pseudoinverse(mesh.vertices[nodes], centers)
        except PatchError as exc:
            raise PatchError(f"{exc}; patch sizes {k}") from None
        s = s[:, None]
        weights["gx"].append(pinv[:, 1] / s)
        weights["gy"].append(pinv[:, 2] / s)
        weights["hxx"].append(2 * pinv[:, 3] / s**2)
        weights["hxy"].append(pinv[:, 4] / s**2)
        weights["hyy"].append(2 * pinv[:, 5] / s**2)
        rows.append(np.repeat([patches[g].center for g in group], k))
        cols.append(nodes.reshape(-1))
        # the centre is always the first sample node
        center_slot.append(offset + k * np.arange(len(group)))
        offset += k * len(group)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    center_slot = np.concatenate(center_slot)
    mats = {key: _rows_to_csr(n, rows, cols, np.concatenate([w.reshape(-1) for w in val]),
                              center_slot)
            for key, val in weights.items()}
    return RecoveryOperator(lap=(mats["hxx"] + mats["hyy"]).tocsr(),
                            boundary_mode=LS_PATCH, **mats)


def grid_lookup(mesh: Mesh) -> np.ndarray:
    """``(m+1, m+1)`` array mapping lattice coordinates to vertex ids."""
    m = mesh.grid_m
    idx = np.full((m + 1, m + 1), -1, dtype=np.int64)
    idx[mesh.grid_index[:, 0], mesh.grid_index[:, 1]] = np.arange(mesh.n_vertices)
    return idx


def build_ghost_point_laplacian(mesh: Mesh) -> RecoveryOperator:
    """Five-point Laplacian with the homogeneous Neumann condition built in.

    Off-grid neighbours are ghost points; the central-difference condition
    ``(v_ghost - v_mirror) / 2h = 0`` replaces each by its mirror image across
    the boundary, which yields the weights (1, 2, -4, 1)/h^2 on edges and
    (2, 2, -4)/h^2 at corners.
    """
    if not mesh.is_uniform_regular:
        raise ValueError("ghost-point Laplacian requires a regular-pattern uniform mesh")
    m = mesh.grid_m
    n = mesh.n_vertices
    idx = grid_lookup(mesh)
    h = (mesh.vertices[:, 0].max() - mesh.vertices[:, 0].min()) / m
    gi = mesh.grid_index
    rows, cols = [np.arange(n)], [np.arange(n)]
    data = [np.full(n, -4.0)]
    for axis in (0, 1):
        for step in (-1, 1):
            nb = gi.copy()
            nb[:, axis] += step
            # reflect ghost indices back into the grid
            nb[nb < 0] = 1
            nb[nb > m] = m - 1
            rows.append(np.arange(n))
            cols.append(idx[nb[:, 0], nb[:, 1]])
            data.append(np.ones(n))
    lap = sp.csr_matrix((np.concatenate(data) / h**2,
                         (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    empty = sp.csr_matrix((n, n))
    return RecoveryOperator(gx=empty, gy=empty, hxx=empty, hxy=empty, hyy=empty,
                            lap=lap, boundary_mode=GHOST_POINT)


def dump_operator(op: RecoveryOperator, directory) -> list[Path]:
    """Write every non-empty operator matrix as a Matrix Market file."""
    from .linalg import write_matrix_market

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, mat in op.matrices().items():
        if mat.nnz:
            out.append(write_matrix_market(directory / f"{name}.mtx", mat))
    return out
