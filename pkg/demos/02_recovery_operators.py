"""
Recovered derivatives
=====================

Least-squares quadratic fits on vertex patches give linear operators
``G_h`` (gradient) and ``H_h`` (Hessian) acting on nodal values.  They are
exact for quadratics, and on the uniform mesh the trace of ``H_h`` is the
five-point Laplacian in the interior.
"""
import numpy as np

from chrec.mesh import build_uniform_mesh, unstructured_square_mesh
from chrec.recovery import build_ghost_point_laplacian, build_recovery

mesh = unstructured_square_mesh(1)
rec = build_recovery(mesh)
x, y = mesh.vertices.T

# Quadratics are reproduced to roundoff, boundary vertices included.
q = 1 - 2 * x + 3 * y + 0.5 * x * x - x * y + 2 * y * y
print("max |H_h q - D^2 q| =", np.abs(rec.hessian(q) - [[1, -1], [-1, 4]]).max())

# For smooth functions the recovered gradient converges at second order on
# uniform meshes; the raw P1 gradient only at first order.
print("\nnodal gradient error for sin(pi x) sin(pi y)")
for m in (8, 16, 32, 64):
    um = build_uniform_mesh(m)
    x, y = um.vertices.T
    u = np.sin(np.pi * x) * np.sin(np.pi * y)
    g = np.pi * np.column_stack([np.cos(np.pi * x) * np.sin(np.pi * y),
                                 np.sin(np.pi * x) * np.cos(np.pi * y)])
    err = np.abs(build_recovery(um).gradient(u) - g).max()
    print(f"  m={m:3d}  max error {err:.3e}")

# The interior rows of the recovered Laplacian are the five-point stencil.
um = build_uniform_mesh(8)
row = build_recovery(um).lap.getrow(4 * 9 + 4) / 64
print("\ninterior Laplacian row times h^2:", np.round(row.data, 12))

# At the boundary the least-squares rows are one-sided.  The ghost-point
# alternative mirrors the grid instead, which encodes du/dn = 0.
ghost = build_ghost_point_laplacian(um).lap
print("ghost-point row at edge vertex 2:", np.round(ghost.getrow(2).toarray().ravel()[[1, 2, 3, 11]] / 64, 12))
print("least-squares row at edge vertex 2 has", build_recovery(um).lap.getrow(2).nnz, "entries")
