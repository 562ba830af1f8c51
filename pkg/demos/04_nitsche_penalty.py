"""
How large must the Nitsche penalty be?
======================================

On general meshes the Neumann condition du/dn = 0 is imposed weakly with a
penalty ``C/|e|`` on each boundary edge.  The recovered fourth-order forms
are only positive semi-definite (constants are in the kernel) when ``C``
exceeds a mesh-dependent threshold.  Here we find that threshold by
bisection on the smallest eigenvalue, then run the Hessian form with a safe
constant.
"""
import numpy as np
import scipy.linalg as sla

from chrec.diagnostics import convergence_ladder
from chrec.fem import mass_matrix
from chrec.mesh import build_uniform_mesh, unstructured_square_mesh
from chrec.problems import get_problem, source_for
from chrec.recovery import build_recovery
from chrec.schemes import SchemeConfig, assemble_a1h, assemble_a2h


def min_eig(mesh, assemble, C):
    A = assemble(mesh, build_recovery(mesh), C).toarray()
    M = mass_matrix(mesh).toarray()
    return sla.eigh(A, M, eigvals_only=True, subset_by_index=[0, 0])[0]


def threshold(mesh, assemble, lo=0.5, hi=20.0):
    # scaled by the largest eigenvalue so that roundoff does not count
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if min_eig(mesh, assemble, mid) < -1e-10 * abs(min_eig(mesh, assemble, hi)) - 1e-8:
            lo = mid
        else:
            hi = mid
    return hi


for name, mesh in [("uniform 16x16", build_uniform_mesh(16)),
                   ("unstructured level 1", unstructured_square_mesh(1))]:
    for label, form in [("Laplacian form", assemble_a1h), ("Hessian form", assemble_a2h)]:
        print(f"{name:>22}, {label}: smallest eigenvalue at C=1 is "
              f"{min_eig(mesh, form, 1.0):.3e}, threshold C ~ {threshold(mesh, form):.2f}")

# With C = 5 the Hessian form gives a stable, convergent scheme on the
# unstructured ladder.
problem = get_problem(1)
cfg = SchemeConfig(epsilon=0.1, dt=1e-5, t_end=0.002, variant="nitsche-hessian",
                   nitsche_c=5.0, source=source_for(problem))
meshes = [unstructured_square_mesh(k) for k in (1, 2, 3)]
print(convergence_ladder(problem, meshes, cfg, label="dof").format())
