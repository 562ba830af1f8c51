"""Sparse symmetric solvers for the per-step linear systems.

Matrices are ``scipy.sparse.csr_matrix``.  The conjugate gradient solver and
the incomplete Cholesky preconditioner are implemented here; the direct
option delegates to SuperLU.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

METHODS = ("conjugate-gradient", "sparse-direct")
PRECONDITIONERS = ("none", "jacobi", "incomplete-cholesky")


class SolverError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class ConvergenceError(SolverError):
    pass


class NotPositiveDefiniteError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    method: str = "conjugate-gradient"
    rtol: float = 1e-10
    max_iter: int | None = None  # default 10 * n
    preconditioner: str = "incomplete-cholesky"
    check_spd: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")
        if not 0.0 < self.rtol < 1.0:
            raise ValueError("rtol must lie in (0, 1)")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


# ------------------------------------------------------------ incomplete Cholesky

@numba.njit(cache=True)
def _ic0(indptr, indices, data):
    """In-place IC(0) of a lower-triangular CSR pattern (diagonal last per row).

    Returns the index of the first row with a non-positive pivot, or -1.
    """
    n = len(indptr) - 1
    for i in range(n):
        start, diag = indptr[i], indptr[i + 1] - 1
        for p in range(start, diag):
            k = indices[p]
            s = data[p]
            # dot product of the already-computed parts of rows i and k
            a, b = start, indptr[k]
            bend = indptr[k + 1] - 1
            while a < p and b < bend:
                ca, cb = indices[a], indices[b]
                if ca == cb:
                    s -= data[a] * data[b]
                    a += 1
                    b += 1
                elif ca < cb:
                    a += 1
                else:
                    b += 1
            data[p] = s / data[indptr[k + 1] - 1]
        s = data[diag]
        for p in range(start, diag):
            s -= data[p] * data[p]
        if s <= 0.0:
            return i
        data[diag] = np.sqrt(s)
    return -1


@numba.njit(cache=True)
def _ic_apply(indptr, indices, data, r):
    """Solve ``L L^T z = r``."""
    n = len(indptr) - 1
    y = r.copy()
    for i in range(n):
        s = y[i]
        diag = indptr[i + 1] - 1
        for p in range(indptr[i], diag):
            s -= data[p] * y[indices[p]]
        y[i] = s / data[diag]
    for i in range(n - 1, -1, -1):
        diag = indptr[i + 1] - 1
        y[i] /= data[diag]
        xi = y[i]
        for p in range(indptr[i], diag):
            y[indices[p]] -= data[p] * xi
    return y


class IncompleteCholesky:
    """Zero fill-in incomplete Cholesky factor ``L`` with ``A ~ L L^T``.

    A breakdown (non-positive pivot) is retried with a growing diagonal shift.
    """

    def __init__(self, A):
        A = sp.csr_matrix(A)
        lower = sp.tril(A, format="csr")
        lower.sort_indices()
        if np.any(np.diff(lower.indptr) == 0) or np.any(
                lower.indices[lower.indptr[1:] - 1] != np.arange(A.shape[0])):
            raise NotPositiveDefiniteError("matrix has a missing diagonal entry")
        diag = A.diagonal()
        if np.any(diag <= 0):
            raise NotPositiveDefiniteError("matrix has a non-positive diagonal entry")
        shift = 0.0
        while True:
            data = lower.data.astype(float).copy()
            data[lower.indptr[1:] - 1] += shift * diag
            bad = _ic0(lower.indptr, lower.indices, data)
            if bad < 0:
                break
            shift = 1e-3 if shift == 0.0 else 2 * shift
            log.debug("IC(0) breakdown at row %d, retrying with shift %g", bad, shift)
            if shift > 1.0:
                raise NotPositiveDefiniteError(f"IC(0) breakdown at row {bad}")
        self.shift = shift
        self._factor = (lower.indptr, lower.indices, data)

    def __call__(self, r):
        return _ic_apply(*self._factor, np.ascontiguousarray(r, dtype=float))


# ------------------------------------------------------------ conjugate gradients

def conjugate_gradient(A, b, x0=None, rtol=1e-10, max_iter=None, precondition=None,
                       callback=None):
    """Preconditioned CG.  Returns ``(x, iterations, relative residual)``.

    Raises :class:`NotPositiveDefiniteError` when a search direction has
    non-positive curvature and :class:`ConvergenceError` after ``max_iter``.
    """
    n = len(b)
    max_iter = 10 * n if max_iter is None else max_iter
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    rnorm = np.linalg.norm(r)
    if rnorm <= rtol * bnorm:
        return x, 0, rnorm / bnorm
    z = r if precondition is None else precondition(r)
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0.0:
            raise NotPositiveDefiniteError(
                f"non-positive curvature {curv:.3e} at iteration {it}", rnorm / bnorm)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if callback is not None:
            callback(x, r)
        if rnorm <= rtol * bnorm:
            return x, it, rnorm / bnorm
        z = r if precondition is None else precondition(r)
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations (relative residual {rnorm / bnorm:.3e})",
        rnorm / bnorm)


def check_positive_definite(A, samples=8, seed=0) -> None:
    """Stochastic test ``x^T A x > 0`` for a few random vectors."""
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = rng.standard_normal(A.shape[0])
        if x @ (A @ x) <= 0.0:
            raise NotPositiveDefiniteError("random probe found x^T A x <= 0")


class LinearSolver:
    """Solver for a fixed matrix: factorization or preconditioner built once."""

    def __init__(self, A, config: SolverConfig = SolverConfig()):
        self.A = sp.csr_matrix(A)
        self.config = config
        self.iterations = []
        if config.check_spd:
            check_positive_definite(self.A)
        if config.method == "sparse-direct":
            self._lu = spla.splu(self.A.tocsc())
            self._precondition = None
        elif config.preconditioner == "incomplete-cholesky":
            self._precondition = IncompleteCholesky(self.A)
        elif config.preconditioner == "jacobi":
            inv = 1.0 / self.A.diagonal()
            self._precondition = lambda r: inv * r
        else:
            self._precondition = None

    def __call__(self, b, x0=None):
        cfg = self.config
        if cfg.method == "sparse-direct":
            x = self._lu.solve(np.asarray(b, dtype=float))
            self.iterations.append(0)
            return x
        x, it, _ = conjugate_gradient(self.A, b, x0, rtol=cfg.rtol, max_iter=cfg.max_iter,
                                      precondition=self._precondition)
        self.iterations.append(it)
        return x


def solve(A, b, config: SolverConfig = SolverConfig()):
    """One-shot solve of ``A x = b`` for symmetric positive definite ``A``."""
    return LinearSolver(A, config)(b)


def write_matrix_market(path, A) -> Path:
    path = Path(path)
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
    return path


def read_matrix_market(path) -> sp.csr_matrix:
    return sp.csr_matrix(scipy.io.mmread(str(path)))
