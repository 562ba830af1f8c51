"""Conforming triangulations, boundary topology and recovery patches."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

# relative singular-value cutoff of the scaled local Vandermonde matrix
RANK_TOL = 1e-8


class MeshError(ValueError):
    """Raised for malformed mesh input or degenerate geometry."""


class PatchError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of a polygonal domain with counter-clockwise triangles.

    ``grid_index`` holds the integer lattice coordinates ``(i, j)`` of every
    vertex when the mesh is the regular-pattern uniform mesh (or a uniform
    refinement of it); it is ``None`` otherwise.  ``parents`` records, for a
    mesh produced by :func:`uniform_refine`, the pair of coarse vertices each
    fine vertex interpolates (``(i, i)`` for inherited vertices).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    grid_index: np.ndarray | None = None
    grid_m: int | None = None
    parents: np.ndarray | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must have shape (n, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (n, 3)")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def is_uniform_regular(self) -> bool:
        return self.grid_index is not None

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def _edge_data(self):
        t = self.triangles
        # local edge k is opposite local vertex k, oriented counter-clockwise
        directed = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
        flat = directed.reshape(-1, 2)
        key = np.sort(flat, axis=1)
        edges, inverse, counts = np.unique(
            key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        return edges, inverse.reshape(-1, 3), counts, flat

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs."""
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """Edge ids of each triangle; column k is the edge opposite vertex k."""
        return self._edge_data[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Boundary edges as vertex pairs ordered counter-clockwise around Omega."""
        edges, tri_edges, counts, flat = self._edge_data
        on_bnd = counts[tri_edges.reshape(-1)] == 1
        return flat[on_bnd].copy()

    @cached_property
    def boundary_normals(self) -> np.ndarray:
        """Outward unit normal of each boundary edge."""
        p = self.vertices
        d = p[self.boundary_edges[:, 1]] - p[self.boundary_edges[:, 0]]
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / np.linalg.norm(n, axis=1)[:, None]

    @cached_property
    def boundary_lengths(self) -> np.ndarray:
        p = self.vertices
        be = self.boundary_edges
        return np.linalg.norm(p[be[:, 1]] - p[be[:, 0]], axis=1)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    @cached_property
    def corner_vertices(self) -> np.ndarray:
        """Boundary vertices whose two adjacent boundary edges have distinct normals."""
        be = self.boundary_edges
        n = self.boundary_normals
        first = np.full((self.n_vertices, 2), np.nan)
        second = np.full((self.n_vertices, 2), np.nan)
        first[be[:, 1]] = n  # edge ending at the vertex
        second[be[:, 0]] = n  # edge starting at the vertex
        bv = self.boundary_vertices
        dot = np.einsum("ij,ij->i", first[bv], second[bv])
        return bv[dot < 1.0 - 1e-12]

    def vertex_normals(self, z: int) -> np.ndarray:
        """Normals of the boundary edges incident to vertex ``z`` (two at corners)."""
        mask = np.any(self.boundary_edges == z, axis=1)
        normals = self.boundary_normals[mask]
        return np.unique(np.round(normals, 14), axis=0)

    @cached_property
    def vertex_triangles(self) -> list[np.ndarray]:
        """For every vertex, the ids of the triangles containing it."""
        t = self.triangles.reshape(-1)
        owner = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(t, kind="stable")
        splits = np.cumsum(np.bincount(t, minlength=self.n_vertices))[:-1]
        return np.split(owner[order], splits)

    @cached_property
    def triangle_neighbors(self) -> np.ndarray:
        """Triangle across each local edge, -1 on the boundary."""
        tri_edges = self.triangle_edges
        flat = tri_edges.reshape(-1)
        owner = np.repeat(np.arange(self.n_triangles), 3)
        first = np.full(self.n_edges, -1)
        second = np.full(self.n_edges, -1)
        # every edge has at most two owners
        first[flat[::-1]] = owner[::-1]
        second[flat] = owner
        nb = np.where(first[flat] == owner, second[flat], first[flat])
        nb[nb == owner] = -1
        return nb.reshape(-1, 3)

    @cached_property
    def h(self) -> float:
        """Maximum edge length."""
        e = self.edges
        return float(np.max(np.linalg.norm(
            self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)))

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    def validate(self) -> None:
        """Check the triangulation invariants, raising :class:`MeshError`."""
        bad = np.flatnonzero(self.areas <= 0)
        if len(bad):
            raise MeshError(f"triangle {bad[0]} has non-positive signed area")
        counts = self._edge_data[2]
        if np.any(counts > 2):
            e = self.edges[np.argmax(counts)]
            raise MeshError(f"edge {tuple(e)} shared by more than two triangles")
        _check_boundary(self)


def _check_boundary(mesh: Mesh) -> None:
    be = mesh.boundary_edges
    # a vertex lying inside a boundary edge signals a hanging node
    p = mesh.vertices
    bv = mesh.boundary_vertices
    for a, b in be:
        d = p[b] - p[a]
        rel = p[bv] - p[a]
        cross = d[0] * rel[:, 1] - d[1] * rel[:, 0]
        s = rel @ d / (d @ d)
        hit = (np.abs(cross) <= 1e-12 * (d @ d)) & (s > 1e-12) & (s < 1 - 1e-12)
        if np.any(hit):
            raise MeshError(
                f"hanging node {int(bv[hit][0])} on edge ({a}, {b})",
                int(bv[hit][0]), (int(a), int(b)))
    deg = np.bincount(be.reshape(-1), minlength=mesh.n_vertices)
    if np.any((deg != 0) & (deg != 2)):
        z = int(np.flatnonzero((deg != 0) & (deg != 2))[0])
        raise MeshError(f"boundary is not a set of closed loops at vertex {z}")


def build_uniform_mesh(m: int, corners=((0.0, 0.0), (1.0, 1.0))) -> Mesh:
    """Regular-pattern uniform mesh of a square split into ``m*m`` cells.

    Every cell is cut along its lower-left to upper-right diagonal, so each
    interior vertex has the six-neighbour stencil.
    """
    if m < 2:
        raise ValueError(f"m must be at least 2, got {m}")
    (x0, y0), (x1, y1) = corners
    if not np.isclose(x1 - x0, y1 - y0):
        raise ValueError("the domain must be a square")
    ii, jj = np.meshgrid(np.arange(m + 1), np.arange(m + 1))
    ii, jj = ii.ravel(), jj.ravel()
    h = (x1 - x0) / m
    verts = np.column_stack([x0 + ii * h, y0 + jj * h])
    ci, cj = np.meshgrid(np.arange(m), np.arange(m))
    ll = (cj * (m + 1) + ci).ravel()
    lr, ul = ll + 1, ll + m + 1
    ur = ul + 1
    tris = np.concatenate([np.column_stack([ll, lr, ur]),
                           np.column_stack([ll, ur, ul])])
    return Mesh(verts, tris, grid_index=np.column_stack([ii, jj]), grid_m=m)


def uniform_refine(mesh: Mesh) -> Mesh:
    """Split every triangle into four congruent children through edge midpoints."""
    edges = mesh.edges
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    verts = np.vstack([mesh.vertices, mid])
    t = mesh.triangles
    # triangle_edges column k is opposite vertex k
    e = mesh.triangle_edges + nv
    m0, m1, m2 = e[:, 0], e[:, 1], e[:, 2]
    tris = np.concatenate([
        np.column_stack([t[:, 0], m2, m1]),
        np.column_stack([m2, t[:, 1], m0]),
        np.column_stack([m1, m0, t[:, 2]]),
        np.column_stack([m0, m1, m2]),
    ])
    parents = np.vstack([np.repeat(np.arange(nv)[:, None], 2, axis=1), edges])
    grid_index, grid_m = None, None
    if mesh.is_uniform_regular:
        gi = mesh.grid_index
        grid_index = np.vstack([2 * gi, gi[edges[:, 0]] + gi[edges[:, 1]]])
        grid_m = 2 * mesh.grid_m
    return Mesh(verts, tris, grid_index=grid_index, grid_m=grid_m, parents=parents)


def _read_records(path: Path):
    """Yield (line number, tokens) for non-blank, non-comment lines."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def load_mesh(node_file, ele_file) -> Mesh:
    """Read a Triangle-format ``.node``/``.ele`` pair.

    Indices may start at 0 or 1; the base is taken from the first vertex
    record.  Errors name the file and line they were detected on.
    """
    node_file, ele_file = Path(node_file), Path(ele_file)
    recs = _read_records(node_file)
    try:
        lineno, head = next(recs)
    except StopIteration:
        raise MeshError(f"{node_file}: empty file") from None
    try:
        nv, dim = int(head[0]), int(head[1])
    except (ValueError, IndexError):
        raise MeshError(f"{node_file}:{lineno}: malformed header") from None
    if dim != 2:
        raise MeshError(f"{node_file}:{lineno}: expected dimension 2, got {dim}")
    ids, coords = [], []
    for lineno, tok in recs:
        try:
            ids.append(int(tok[0]))
            coords.append((float(tok[1]), float(tok[2])))
        except (ValueError, IndexError):
            raise MeshError(f"{node_file}:{lineno}: malformed vertex record") from None
    if len(ids) != nv:
        raise MeshError(f"{node_file}: header declares {nv} vertices, found {len(ids)}")
    base = ids[0]
    if base not in (0, 1) or ids != list(range(base, base + nv)):
        raise MeshError(f"{node_file}: vertex ids must be consecutive from 0 or 1")

    recs = _read_records(ele_file)
    try:
        lineno, head = next(recs)
        nt = int(head[0])
    except (StopIteration, ValueError, IndexError):
        raise MeshError(f"{ele_file}: malformed header") from None
    tris, lines = [], []
    for lineno, tok in recs:
        try:
            tri = [int(tok[1]) - base, int(tok[2]) - base, int(tok[3]) - base]
        except (ValueError, IndexError):
            raise MeshError(f"{ele_file}:{lineno}: malformed element record") from None
        if min(tri) < 0 or max(tri) >= nv:
            raise MeshError(f"{ele_file}:{lineno}: vertex index out of range")
        tris.append(tri)
        lines.append(lineno)
    if len(tris) != nt:
        raise MeshError(f"{ele_file}: header declares {nt} triangles, found {len(tris)}")

    mesh = Mesh(np.array(coords), np.array(tris, dtype=np.int64))
    bad = np.flatnonzero(mesh.areas <= 0)
    if len(bad):
        raise MeshError(f"{ele_file}:{lines[bad[0]]}: inverted or degenerate triangle")
    try:
        mesh.validate()
    except MeshError as exc:
        if len(exc.args) == 3:
            a, b = exc.args[2]
            # the element whose edge carries the hanging node
            owner = np.flatnonzero(np.sum(np.isin(mesh.triangles, [a, b]), axis=1) == 2)
            where = f"{ele_file}:{lines[owner[0]]}" if len(owner) else str(ele_file)
            raise MeshError(f"{where}: non-conforming mesh, {exc.args[0]}") from None
        raise MeshError(f"{ele_file}: {exc}") from None
    return mesh


def write_mesh(mesh: Mesh, stem) -> tuple[Path, Path]:
    """Write ``stem.node`` and ``stem.ele`` (1-based indices)."""
    stem = Path(stem)
    node = stem.with_suffix(".node")
    ele = stem.with_suffix(".ele")
    marker = np.zeros(mesh.n_vertices, dtype=int)
    marker[mesh.boundary_vertices] = 1
    with open(node, "w") as fh:
        fh.write(f"{mesh.n_vertices} 2 0 1\n")
        for k, ((x, y), b) in enumerate(zip(mesh.vertices, marker), 1):
            fh.write(f"{k} {float(x)!r} {float(y)!r} {b}\n")
    with open(ele, "w") as fh:
        fh.write(f"{mesh.n_triangles} 3 0\n")
        for k, (a, b, c) in enumerate(mesh.triangles + 1, 1):
            fh.write(f"{k} {a} {b} {c}\n")
    return node, ele


def unstructured_square_mesh(levels: int = 0) -> Mesh:
    """Shipped Delaunay mesh of the unit square, refined ``levels`` times.

    The base mesh has 139 vertices and 236 triangles, so successive
    refinements carry 513, 1969, 7713 and 30529 vertices.
    """
    data = Path(__file__).parent / "data"
    mesh = load_mesh(data / "square.node", data / "square.ele")
    for _ in range(levels):
        mesh = uniform_refine(mesh)
    return mesh


# ---------------------------------------------------------------- patches

@dataclass(frozen=True)
class Patch:
    center: int
    layer_count: int
    sample_nodes: np.ndarray

    def __len__(self):
        return len(self.sample_nodes)


def local_vandermonde(points: np.ndarray, center: np.ndarray, scale: float):
    """Quadratic Vandermonde in shifted, scaled coordinates (1, xi, eta, xi^2, xi*eta, eta^2)."""
    xi = (points[..., 0] - center[..., 0, None]) / np.asarray(scale)[..., None]
    eta = (points[..., 1] - center[..., 1, None]) / np.asarray(scale)[..., None]
    return np.stack([np.ones_like(xi), xi, eta, xi * xi, xi * eta, eta * eta], axis=-1)


def patch_scale(points: np.ndarray, center: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(points - center, axis=1)))


def has_full_rank(points: np.ndarray, center: np.ndarray, tol: float = RANK_TOL) -> bool:
    if len(points) < 6:
        return False
    V = local_vandermonde(points, center, patch_scale(points, center))
    s = np.linalg.svd(V, compute_uv=False)
    return bool(s[-1] > tol * s[0])


def _grow(mesh: Mesh, tris: np.ndarray) -> np.ndarray:
    nb = mesh.triangle_neighbors[tris].reshape(-1)
    return np.union1d(tris, nb[nb >= 0])


def build_patch(mesh: Mesh, z: int, rank_check=has_full_rank) -> Patch:
    """Smallest layered element patch around ``z`` satisfying the rank condition.

    Layer one is the set of triangles containing ``z``; every further layer
    adds the triangles sharing an edge with the current patch.
    """
    if not 0 <= z < mesh.n_vertices:
        raise IndexError(f"vertex {z} out of range")
    tris = np.asarray(mesh.vertex_triangles[z])
    n = 1
    center = mesh.vertices[z]
    while True:
        nodes = np.unique(mesh.triangles[tris])
        nodes = np.concatenate([[z], nodes[nodes != z]])
        if rank_check(mesh.vertices[nodes], center):
            return Patch(int(z), n, nodes)
        grown = _grow(mesh, tris)
        if len(grown) == len(tris):
            raise PatchError(
                f"vertex {z}: patch exhausted the mesh without satisfying the rank condition")
        tris = grown
        n += 1


def build_patches(mesh: Mesh) -> list[Patch]:
    """Patches of all vertices; layer-one rank checks are batched by size."""
    layer1 = []
    for z, tris in enumerate(mesh.vertex_triangles):
        nodes = np.unique(mesh.triangles[tris])
        layer1.append(np.concatenate([[z], nodes[nodes != z]]))
    sizes = np.array([len(s) for s in layer1])
    ok = np.zeros(mesh.n_vertices, dtype=bool)
    for k in np.unique(sizes[sizes >= 6]):
        group = np.flatnonzero(sizes == k)
        pts = mesh.vertices[np.array([layer1[g] for g in group])]
        centers = mesh.vertices[group]
        scale = np.max(np.linalg.norm(pts - centers[:, None], axis=2), axis=1)
        s = np.linalg.svd(local_vandermonde(pts, centers, scale), compute_uv=False)
        ok[group] = s[:, -1] > RANK_TOL * s[:, 0]
    return [Patch(z, 1, layer1[z]) if ok[z] else build_patch(mesh, z)
            for z in range(mesh.n_vertices)]
