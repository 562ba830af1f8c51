"""``chrec`` command line: convergence ladders and long simulations.

    chrec converge --example 1 --scheme uniform-simple --levels 16,32,64
    chrec converge --example 1 --scheme nitsche-laplace --unstructured
    chrec converge --example 1 --temporal
    chrec simulate --example 4 --seed 42 --out runs/ex4
    chrec simulate --config runs/ex4/manifest.txt --out runs/ex4-replay
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .diagnostics import RateTable, convergence_ladder, temporal_ladder, write_records_csv
from .io import read_keyvalue, read_vtk_scalars, write_keyvalue, write_vtk
from .linalg import SolverConfig, SolverError
from .mesh import (Mesh, MeshError, build_uniform_mesh, load_mesh, uniform_refine,
                   unstructured_square_mesh)
from .problems import get_problem, make_rng, source_for
from .schemes import VARIANTS, SchemeConfig, discretize, run

log = logging.getLogger("chrec")

# lower (and optional upper) bounds on last-interval rates
SPATIAL_BANDS = {"e0": (1.9, None), "e1": (0.95, None), "e1r": (1.9, None), "e2": (0.95, None)}
TEMPORAL_BANDS = {"e0": (0.9, 1.1)}


class UsageError(Exception):
    pass


# --------------------------------------------------------------- parsing helpers

def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def parse_band(text: str):
    """``name=lo`` or ``name=lo:hi``; an empty bound is open."""
    name, _, rng = text.partition("=")
    lo, _, hi = rng.partition(":")
    try:
        return name.strip(), (float(lo) if lo else None, float(hi) if hi else None)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad band {text!r}; use name=lo[:hi]")


def mesh_from_spec(spec: str, domain=((0.0, 0.0), (1.0, 1.0))) -> Mesh:
    """``uniform:m``, ``unstructured:k`` or the path of a ``.node``/``.ele`` pair."""
    kind, _, arg = spec.partition(":")
    if kind == "uniform" and arg:
        return build_uniform_mesh(int(arg), domain)
    if kind == "unstructured" and arg:
        return unstructured_square_mesh(int(arg))
    stem = Path(spec)
    if stem.suffix in (".node", ".ele"):
        stem = stem.with_suffix("")
    node, ele = stem.with_suffix(".node"), stem.with_suffix(".ele")
    if not node.exists() or not ele.exists():
        raise UsageError(f"mesh {spec!r}: expected uniform:m, unstructured:k or a "
                         f".node/.ele pair")
    return load_mesh(node, ele)


def check_bands(table: RateTable, bands: dict) -> list[str]:
    """Messages for every last-interval rate outside its band."""
    bad = []
    for name, (lo, hi) in bands.items():
        if name not in table.names:
            continue
        r = table.rate(name)
        if math.isnan(r) or (lo is not None and r < lo) or (hi is not None and r > hi):
            row = list(table.rows())[-1]
            bad.append(f"rate r_{name}={r:.3f} outside [{lo}, {hi}] at "
                       f"{table.label}={row[table.label]}")
    return bad


# --------------------------------------------------------------- converge

def _scheme_config(args, problem, variant) -> SchemeConfig:
    eps = problem.epsilon if args.eps is None else args.eps
    return SchemeConfig(
        epsilon=eps, dt=problem.dt if args.dt is None else args.dt,
        t_end=problem.t_end if args.t_end is None else args.t_end,
        kappa=args.kappa, nitsche_c=args.nitsche_c, variant=variant,
        source=source_for(problem, eps), nonlinear=args.nonlinear,
        solver=SolverConfig(method=args.solver, rtol=args.rtol))


def cmd_converge(args) -> int:
    problem = get_problem(args.example)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.temporal:
        if not problem.has_exact:
            raise UsageError("--temporal needs an exact solution (example 1)")
        variant = args.scheme or "uniform-simple"
        cfg = _scheme_config(args, problem, variant)
        if args.t_end is None:
            cfg = replace(cfg, t_end=0.01)
        mesh = mesh_from_spec(args.mesh or "uniform:128")
        dts = args.dts or tuple(1e-3 * 2.0**-k for k in range(4))
        table = temporal_ladder(problem, mesh, cfg, dts)
        bands = dict(TEMPORAL_BANDS)
    else:
        if args.unstructured or (args.mesh and not args.mesh.startswith("uniform")):
            variant = args.scheme or "nitsche-laplace"
            base = (unstructured_square_mesh(0) if args.mesh is None
                    else mesh_from_spec(args.mesh))
            levels = args.levels or (1, 2, 3)
            meshes, mesh = [], base
            for k in range(max(levels) + 1):
                if k in levels:
                    meshes.append(mesh)
                if k < max(levels):
                    mesh = uniform_refine(mesh)
            label = "dof"
        else:
            variant = args.scheme or "uniform-simple"
            levels = args.levels or (16, 32, 64)
            meshes = [build_uniform_mesh(m, problem.domain) for m in levels]
            label = "h"
        cfg = _scheme_config(args, problem, variant)
        table = convergence_ladder(problem, meshes, cfg, label=label)
        bands = dict(SPATIAL_BANDS)
        if not problem.has_exact:
            bands.pop("e2")  # measured but not asserted without an exact solution
    bands.update(dict(args.band or ()))
    table.meta.update(example=args.example, scheme=cfg.variant, dt=cfg.dt, t_end=cfg.t_end)

    stem = "temporal" if args.temporal else "spatial"
    table.to_csv(out / f"rates_{stem}.csv")
    summary = table.format()
    bad = [] if args.no_check else check_bands(table, bands)
    summary += "\n" + ("\n".join(f"FAIL {b}" for b in bad) if bad else "rates within bands")
    (out / f"summary_{stem}.txt").write_text(summary + "\n")
    print(summary)
    return 1 if bad else 0


# --------------------------------------------------------------- simulate

@dataclass
class RunManifest:
    """Everything needed to replay a simulation bit for bit."""

    example: int
    scheme: str
    mesh: str
    epsilon: float
    kappa: float
    nitsche_c: float
    dt: float
    t_end: float
    seed: int
    snapshots: tuple
    nonlinear: str
    solver: str
    rtol: float
    initial: str = ""  # VTK file with a "u" field, empty for the example's u0
    out: str = ""
    version: str = __version__

    def write(self, path) -> Path:
        return write_keyvalue(path, self.__dict__)

    @classmethod
    def read(cls, path, **overrides) -> "RunManifest":
        raw = read_keyvalue(path)
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return manifest_from_items(raw, source=str(path))

    def scheme_config(self) -> SchemeConfig:
        problem = get_problem(self.example)
        return SchemeConfig(epsilon=self.epsilon, dt=self.dt, t_end=self.t_end,
                            kappa=self.kappa, nitsche_c=self.nitsche_c, variant=self.scheme,
                            source=source_for(problem, self.epsilon),
                            nonlinear=self.nonlinear,
                            solver=SolverConfig(method=self.solver, rtol=self.rtol),
                            snapshots=tuple(self.snapshots))


_FIELD_TYPES = {"example": int, "seed": int, "epsilon": float, "kappa": float,
                "nitsche_c": float, "dt": float, "t_end": float, "rtol": float}


def manifest_from_items(raw: dict, source="config") -> RunManifest:
    """Build and validate a manifest from string-valued items, naming bad fields."""
    if "example" not in raw:
        raise UsageError(f"{source}: field 'example' is required")
    try:
        problem = get_problem(int(raw["example"]))
    except ValueError as exc:
        raise UsageError(f"{source}: field 'example': {exc}") from None
    mesh_default = f"uniform:{problem.m}"
    items = {"scheme": problem.scheme, "mesh": mesh_default, "epsilon": problem.epsilon,
             "kappa": 2.0, "nitsche_c": 1.0, "dt": problem.dt, "t_end": problem.t_end,
             "seed": 0, "snapshots": problem.snapshots, "nonlinear": "nodal",
             "solver": "conjugate-gradient", "rtol": 1e-10, "initial": "", "out": ""}
    items.update({k: v for k, v in raw.items() if k != "version"})
    unknown = set(items) - set(RunManifest.__dataclass_fields__)
    if unknown:
        raise UsageError(f"{source}: unknown field(s) {', '.join(sorted(unknown))}")
    for key, typ in _FIELD_TYPES.items():
        try:
            items[key] = typ(items[key])
        except (TypeError, ValueError):
            raise UsageError(f"{source}: field {key!r}: cannot read {items[key]!r} "
                             f"as {typ.__name__}") from None
    if isinstance(items["snapshots"], str):
        try:
            items["snapshots"] = _floats(items["snapshots"])
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{source}: field 'snapshots': {exc}") from None
    items["snapshots"] = tuple(float(t) for t in items["snapshots"])
    man = RunManifest(**items)
    try:
        man.scheme_config()
    except ValueError as exc:
        field = next((f for f in ("epsilon", "kappa", "dt", "t_end", "variant", "nonlinear",
                                  "method", "rtol") if f in str(exc)), "config")
        field = {"variant": "scheme", "method": "solver"}.get(field, field)
        raise UsageError(f"{source}: field {field!r}: {exc}") from None
    return man


def simulate(man: RunManifest, out: Path, progress=None):
    """Run ``man`` writing records, snapshots and the manifest into ``out``."""
    problem = get_problem(man.example)
    out.mkdir(parents=True, exist_ok=True)
    mesh = mesh_from_spec(man.mesh, problem.domain)
    cfg = man.scheme_config()
    if man.initial:
        u0 = read_vtk_scalars(man.initial)["u"]
        if len(u0) != mesh.n_vertices:
            raise UsageError(f"initial field has {len(u0)} values, mesh has "
                             f"{mesh.n_vertices} vertices")
    else:
        u0 = problem.initial(mesh, make_rng(man.seed))
    man.write(out / "manifest.txt")
    state = run(mesh, cfg, u0, discretize(mesh, cfg), callback=progress)
    for t, u in sorted(state.snapshots.items()):
        write_vtk(out / snapshot_name(t), mesh, {"u": u}, title=f"u at t={t!r}")
    write_records_csv(state.history, out / "records.csv")
    return state


def snapshot_name(t: float) -> str:
    return f"u_t{t:.6f}.vtk"


def cmd_simulate(args) -> int:
    overrides = {"scheme": args.scheme, "mesh": args.mesh, "epsilon": args.eps,
                 "kappa": args.kappa, "nitsche_c": args.nitsche_c, "dt": args.dt,
                 "t_end": args.t_end, "seed": args.seed, "snapshots": args.snapshots,
                 "nonlinear": args.nonlinear, "solver": args.solver, "rtol": args.rtol}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        man = RunManifest.read(args.config, **overrides)
    elif args.example is not None:
        man = manifest_from_items({"example": args.example, **overrides}, source="arguments")
    else:
        raise UsageError("simulate needs --example or --config")
    if args.example is not None and args.config and args.example != man.example:
        raise UsageError("--example disagrees with the configuration file")
    out = Path(args.out)
    man = replace(man, out=str(out))
    every = max(1, math.ceil(man.t_end / man.dt) // 20)

    def progress(state):
        if state.n % every == 0:
            r = state.history[-1]
            log.info("t=%.5g energy=%.8g mass=%.8g max=%.4f", r.time, r.energy, r.mass,
                     r.max_norm)

    state = simulate(man, out, progress)
    first, last = state.history[0], state.history[-1]
    drift = abs(last.mass - first.mass) / max(abs(first.mass), 1.0)
    print(f"example {man.example}: {state.n} steps to t={state.t:.6g}; "
          f"energy {first.energy:.6g} -> {last.energy:.6g}; mass drift {drift:.2e}; "
          f"outputs in {out}")
    return 0


# --------------------------------------------------------------- entry point

def _common(p):
    p.add_argument("--scheme", choices=VARIANTS)
    p.add_argument("--mesh", help="uniform:m, unstructured:k or a .node/.ele path")
    p.add_argument("--eps", type=float, help="interface width epsilon")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--nonlinear", choices=("nodal", "quadrature"))
    p.add_argument("--solver", choices=("conjugate-gradient", "sparse-direct"))
    p.add_argument("--rtol", type=float)
    p.add_argument("--out", default=".")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chrec", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"chrec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("converge", help="spatial or temporal convergence ladder")
    c.add_argument("--example", type=int, choices=(1, 2), default=1)
    _common(c)
    c.add_argument("--kappa", type=float, default=2.0)
    c.add_argument("--nitsche-c", type=float, default=1.0)
    c.add_argument("--levels", type=_ints,
                   help="uniform: grid sizes m; unstructured: refinement counts")
    c.add_argument("--unstructured", action="store_true",
                   help="refine the bundled unstructured square mesh")
    c.add_argument("--temporal", action="store_true", help="ladder in dt on one mesh")
    c.add_argument("--dts", type=_floats, help="time steps of the temporal ladder")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--band", type=parse_band, action="append",
                   help="override an assertion band, e.g. e2=0.9 or e0=0.9:1.1")
    c.add_argument("--no-check", action="store_true", help="report rates without asserting")
    c.set_defaults(func=cmd_converge)

    s = sub.add_parser("simulate", help="run an example and write CSV/VTK output")
    s.add_argument("--example", type=int, choices=(3, 4, 5, 6, 7))
    s.add_argument("--config", help="key = value file, e.g. a previous manifest.txt")
    _common(s)
    s.add_argument("--kappa", type=float)
    s.add_argument("--nitsche-c", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--snapshots", type=_floats, help="comma-separated snapshot times")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "converge":
        for name in ("nonlinear", "solver", "rtol"):
            if getattr(args, name) is None:
                setattr(args, name, {"nonlinear": "nodal", "solver": "conjugate-gradient",
                                     "rtol": 1e-10}[name])
    try:
        return args.func(args)
    except (UsageError, MeshError, SolverError, ValueError) as exc:
        print(f"chrec {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
