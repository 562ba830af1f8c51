"""
Meshes and vertex patches
=========================

Two mesh families are used throughout: the regular-pattern uniform mesh of
the unit square and a nested ladder of refinements of a small unstructured
Delaunay mesh that ships with the package.  Every vertex gets a patch of
surrounding vertices large enough to fit a quadratic.
"""
import numpy as np

from chrec.mesh import build_patches, build_uniform_mesh, unstructured_square_mesh

# A uniform mesh: every cell is cut along the same diagonal, so interior
# vertices have six neighbours.
mesh = build_uniform_mesh(8)
print(f"uniform 8x8: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, "
      f"{len(mesh.boundary_edges)} boundary edges")

# Interior patches are the vertex and its one-ring (7 points, one layer).
# Corner vertices see too few points after one layer and the patch grows
# until the quadratic fit has full rank.
patches = build_patches(mesh)
layers = np.array([p.layer_count for p in patches])
sizes = np.array([len(p) for p in patches])
for name, z in [("interior", 4 * 9 + 4), ("edge", 4), ("corner", 0)]:
    print(f"{name:>8} vertex {z:3d}: {layers[z]} layer(s), {sizes[z]} sample points")

# The unstructured ladder.  Level k is k uniform refinements of the base mesh.
for k in range(4):
    m = unstructured_square_mesh(k)
    angles = []
    p = m.vertices[m.triangles]
    for i in range(3):
        a, b, c = p[:, i], p[:, (i + 1) % 3], p[:, (i + 2) % 3]
        u, v = b - a, c - a
        cos = np.sum(u * v, 1) / np.linalg.norm(u, axis=1) / np.linalg.norm(v, axis=1)
        angles.append(np.degrees(np.arccos(cos)))
    print(f"level {k}: {m.n_vertices:6d} dofs, h = {m.h:.4f}, "
          f"min angle {np.min(angles):.1f} deg")
