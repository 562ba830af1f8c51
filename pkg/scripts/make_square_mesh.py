"""Regenerate the shipped unstructured base mesh of the unit square.

40 boundary points (10 segments per side) and 99 interior points, Delaunay
triangulated after a few rounds of Lloyd-type smoothing.  Any triangulation
of this point set has 236 triangles, so uniform refinement gives the vertex
ladder 139, 513, 1969, 7713, 30529.

    python scripts/make_square_mesh.py src/chrec/data/square
"""
import sys

import numpy as np
from scipy.spatial import Delaunay

from chrec.mesh import Mesh, write_mesh


def cross2(a, b):
    return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]


def boundary_points(n=10):
    s = np.arange(n) / n
    return np.vstack([
        np.column_stack([s, np.zeros(n)]),
        np.column_stack([np.ones(n), s]),
        np.column_stack([1 - s, np.ones(n)]),
        np.column_stack([np.zeros(n), 1 - s]),
    ])


def smooth(pts, nfixed, iters=60):
    for _ in range(iters):
        tri = Delaunay(pts).simplices
        cent = pts[tri].mean(axis=1)
        area = np.abs(cross2(pts[tri[:, 1]] - pts[tri[:, 0]], pts[tri[:, 2]] - pts[tri[:, 0]]))
        acc = np.zeros_like(pts)
        w = np.zeros(len(pts))
        for k in range(3):
            np.add.at(acc, tri[:, k], cent * area[:, None])
            np.add.at(w, tri[:, k], area)
        new = acc / w[:, None]
        pts[nfixed:] = np.clip(new[nfixed:], 0.03, 0.97)
    return pts


def generate(seed=7) -> Mesh:
    rng = np.random.default_rng(seed)
    bnd = boundary_points()
    interior = rng.uniform(0.05, 0.95, size=(99, 2))
    pts = smooth(np.vstack([bnd, interior]), len(bnd))
    tri = Delaunay(pts).simplices
    p = pts[tri]
    signed = cross2(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    tri[signed < 0] = tri[signed < 0][:, [0, 2, 1]]
    mesh = Mesh(pts, tri)
    mesh.validate()
    return mesh


def main(stem, seed=7):
    mesh = generate(seed)
    print(mesh.n_vertices, mesh.n_triangles,
          "min angle",
          np.degrees(min_angle(mesh)))
    write_mesh(mesh, stem)


def min_angle(mesh):
    p = mesh.vertices[mesh.triangles]
    ang = []
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        c = np.einsum("ij,ij->i", a, b) / np.linalg.norm(a, axis=1) / np.linalg.norm(b, axis=1)
        ang.append(np.arccos(c))
    return np.min(ang)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "square",
         int(sys.argv[2]) if len(sys.argv) > 2 else 7)
