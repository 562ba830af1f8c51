"""VTK legacy snapshots and key-value run configuration files."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def write_vtk(path, mesh, fields: dict, title="chrec snapshot") -> Path:
    """Write an ASCII legacy VTK 2.0 unstructured grid with point scalars."""
    path = Path(path)
    nv, nt = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 2.0", title[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt  # VTK_TRIANGLE
    lines.append(f"POINT_DATA {nv}")
    for name, values in fields.items():
        values = np.asarray(values, dtype=float)
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [repr(v) for v in values.tolist()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_scalars(path) -> dict[str, np.ndarray]:
    """Point scalars of a file written by :func:`write_vtk`."""
    out = {}
    tokens = Path(path).read_text().split("\n")
    i = 0
    npts = None
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINT_DATA"):
            npts = int(line.split()[1])
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            out[name] = np.array([float(v) for v in tokens[i + 2:i + 2 + npts]])
            i += 1 + npts
        i += 1
    return out


def write_keyvalue(path, items: dict) -> Path:
    """``key = value`` lines; lists become comma-separated values."""
    path = Path(path)
    lines = []
    for k, v in items.items():
        if isinstance(v, (list, tuple)):
            v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_keyvalue(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out
