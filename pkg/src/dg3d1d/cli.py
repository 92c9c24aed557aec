"""Command line entry point.

Exit codes: 0 success, 2 invalid configuration or input file, 3 geometry
error (a vessel cylinder leaves the box), 4 solver failure.
"""

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .assembly1d import Ipdg1Params
from .assembly3d import IpdgParams
from .errors import (ConvergenceError, GeometryError, InvalidArgumentError, NetworkFormatError,
                     NotSPDError, OutOfDomainError)
from .io_cli import (RunConfig, coerce, make_output_dir, read_config, read_network,
                     write_matrix_market, write_rates_csv, write_report, write_vtk_1d,
                     write_vtk_3d)
from .mesh3d import build_box_mesh
from .network1d import build_edge_meshes
from .problem import CoupledProblem
from .verify import run_convergence

log = logging.getLogger("dg3d1d")

EXIT_CONFIG, EXIT_GEOMETRY, EXIT_SOLVER = 2, 3, 4

DEFAULT_LEVELS = {
    "mms3d": "4,8,16",
    "mms-network": ",".join(f"{0.5 / 2**k:g}" for k in range(7)),
    "heat": "",  # derived from tau
}


def _parent():
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="key = value file; flags given on the command line win")
    p.add_argument("--output", "-o", help="output directory (default: out)")
    p.add_argument("--levels", help="comma-separated refinement levels")
    p.add_argument("--mesh-n", dest="n", help="3D subdivisions per axis")
    p.add_argument("--h-lambda", help="target edge mesh size")
    p.add_argument("--circle-points", help="quadrature points on each vessel circle")
    p.add_argument("--gauss-points", help="Gauss points per edge interval for the exchange")
    p.add_argument("--eps1", help="3D variant: -1 symmetric, 0 incomplete, 1 non-symmetric")
    p.add_argument("--eps2", help="1D variant")
    p.add_argument("--sigma-omega", help="3D penalty")
    p.add_argument("--sigma-lambda", help="single-vessel 1D penalty")
    p.add_argument("--sigma-e", help="network edge penalty")
    p.add_argument("--sigma-v", help="junction and boundary-vertex penalty")
    p.add_argument("--xi", help="permeability override for every edge")
    p.add_argument("--k2", help="1D polynomial degree (1 or 2)")
    p.add_argument("--tau", help="coarsest time step of the heat study")
    p.add_argument("--final-time", help="final time of the heat study")
    p.add_argument("--decay", help="decay rate of the manufactured transient")
    p.add_argument("--tol", help="relative residual tolerance of CG")
    p.add_argument("--seed", help="recorded for reproducibility")
    p.add_argument("--snapshot-every", help="write VTK snapshots every k steps (heat)")
    p.add_argument("--export-matrix", action="store_const", const="true",
                   help="also write the system matrix in Matrix Market format")
    p.add_argument("-v", "--verbose", action="store_true", dest="verbose")
    return p


def build_parser():
    parent = _parent()
    parser = argparse.ArgumentParser(prog="dg3d1d", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mms3d", parents=[parent], help="single vessel in a box: error/rate table")
    sub.add_parser("mms-network", parents=[parent], help="tree network alone: error/rate table")
    sub.add_parser("heat", parents=[parent], help="backward Euler temporal rate study")
    sp = sub.add_parser("solve", parents=[parent], argument_default=argparse.SUPPRESS,
                        help="network file embedded in its bounding box")
    sp.add_argument("--network", help="network JSON file")
    sp.add_argument("--f-hat", help="constant 1D source")
    sp.add_argument("--padding", help="box margin as a fraction of the network extent")
    sp.add_argument("--box", help="explicit box x0,y0,z0,x1,y1,z1")
    return parser


def resolve_config(args):
    """Defaults, then the config file, then explicit flags."""
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    values = {"command": args.command}
    if getattr(args, "config", None):
        values.update(read_config(args.config))
        values["command"] = args.command
    for k, v in given.items():
        values[k] = coerce(k, v)
    cfg = RunConfig(**values)
    if not cfg.levels:
        cfg.levels = DEFAULT_LEVELS.get(cfg.command, "")
    if cfg.command == "heat" and cfg.tau is None:
        cfg.tau = 0.1
    if cfg.tol is None:
        # the junction balance is checked in absolute terms on the network study
        cfg.tol = 1e-12 if cfg.command == "mms-network" else 1e-10
    return cfg.validate()


def parse_levels(cfg):
    kind = int if cfg.command in ("mms3d", "heat") else float
    try:
        levels = [kind(s) for s in cfg.levels.split(",") if s.strip()]
    except ValueError as exc:
        raise InvalidArgumentError(f"bad levels {cfg.levels!r}") from exc
    if len(levels) < 3:
        raise InvalidArgumentError("need at least 3 levels")
    if kind is int and min(levels) < 1 or kind is float and min(levels) <= 0:
        raise InvalidArgumentError("levels must be positive")
    return levels


def heat_levels(cfg):
    if cfg.levels:
        return parse_levels(cfg)
    base = cfg.final_time / cfg.tau
    steps = round(base)
    if steps < 1 or abs(base - steps) > 1e-9 * base:
        raise InvalidArgumentError(f"final_time / tau must be an integer, got {base}")
    return [steps, 2 * steps, 4 * steps]


def problem_options(cfg, network=False):
    return {
        "k2": cfg.k2,
        "ipdg3": IpdgParams(epsilon=cfg.eps1, sigma=cfg.sigma_omega),
        "ipdg1": Ipdg1Params(epsilon=cfg.eps2,
                             sigma=cfg.sigma_e if network else cfg.sigma_lambda,
                             sigma_v=cfg.sigma_v),
        "circle_points": cfg.circle_points,
        "gauss_points": cfg.gauss_points,
    }


def _table_options(cfg, command):
    opts = problem_options(cfg, network=command == "mms-network")
    if command == "mms-network":
        # no 3D block: only the edge options apply
        opts = {"k2": opts["k2"], "ipdg1": opts["ipdg1"]}
    return opts


def run_study(cfg, out, report):
    study = {"mms3d": "mms3d1d", "mms-network": "mms_network", "heat": "heat"}[cfg.command]
    levels = heat_levels(cfg) if cfg.command == "heat" else parse_levels(cfg)
    last = {}
    solver_log = []

    def on_level(level, pb, sol):
        last.update(problem=pb, solution=sol, level=level)
        reps = getattr(sol, "reports", None) or [sol.report]
        solver_log.append({"level": level, "iterations": sum(r.iterations for r in reps),
                           "residual": max(r.residual for r in reps),
                           "converged": all(r.converged for r in reps),
                           "conservation": getattr(sol, "conservation", None),
                           "dofs": pb.sizes})

    extra = {}
    if cfg.command == "heat":
        extra = {"n": cfg.n, "final_time": cfg.final_time, "rate": cfg.decay}
        if cfg.snapshot_every:
            snap_dir = os.path.join(out, "snapshots")
            os.makedirs(snap_dir, exist_ok=True)

            def snapshot(steps, pb, state):
                # only the finest run is kept
                if steps == levels[-1] and state.n % cfg.snapshot_every == 0:
                    write_vtk_3d(os.path.join(snap_dir, f"u3d_{state.n:05d}.vtk"), pb.mesh, state.u3d)
                    write_vtk_1d(os.path.join(snap_dir, f"u1d_{state.n:05d}.vtk"), pb.space1,
                                 state.u1d)
            extra["callback"] = snapshot
    try:
        table = run_convergence(study, levels, tol=cfg.tol,
                                problem_options=_table_options(cfg, cfg.command),
                                on_level=on_level, **extra)
    except (ConvergenceError, NotSPDError) as exc:
        partial = getattr(exc, "partial_table", None)
        if partial is not None:
            write_rates_csv(partial, os.path.join(out, "rates.csv"))
        report["solver"] = solver_log
        raise
    write_rates_csv(table, os.path.join(out, "rates.csv"))
    report["solver"] = solver_log
    report["errors"] = {k: list(v) for k, v in table.errors.items()}
    report["rates"] = {k: table.rates(k) for k in table.errors}
    report["levels"] = table.levels
    print(table.format())

    pb, sol = last["problem"], last["solution"]
    if pb.space3 is not None:
        write_vtk_3d(os.path.join(out, "u3d.vtk"), pb.mesh, sol.u3d)
    write_vtk_1d(os.path.join(out, "u1d.vtk"), pb.space1, sol.u1d)
    if cfg.export_matrix:
        write_matrix_market(os.path.join(out, "system.mtx"), pb.matrix())


def network_box(graph, padding):
    lo = (graph.vertices - graph.radius.max()).min(axis=0)
    hi = (graph.vertices + graph.radius.max()).max(axis=0)
    extent = float((hi - lo).max())
    margin = padding * extent
    return lo - margin, hi + margin


def run_solve(cfg, out, report, graph):
    if cfg.xi is not None:
        graph.xi[:] = cfg.xi
    lo, hi = cfg.box_bounds() if cfg.box else network_box(graph, cfg.padding)
    mesh = build_box_mesh(cfg.n, lo, hi)
    if cfg.h_lambda is not None:
        meshes = build_edge_meshes(graph, h=cfg.h_lambda)
    elif graph.cells is not None:
        meshes = build_edge_meshes(graph, cells_per_edge=graph.cells)
    else:
        meshes = build_edge_meshes(graph, h=mesh.h)
    pb = CoupledProblem(mesh=mesh, graph=graph, edge_meshes=meshes,
                        **problem_options(cfg, network=True))
    # homogeneous Dirichlet for u, natural (Neumann) ends for u_hat
    rhs = pb.rhs(f_hat=lambda e, s, x: np.full(len(s), cfg.f_hat))
    sol = pb.solve(rhs, tol=cfg.tol)
    report["solver"] = [{**sol.report.as_dict(), "conservation": sol.conservation}]
    report["dimensions"] = {"3d": pb.sizes[0], "1d": pb.sizes[1], "junctions": pb.sizes[2]}
    report["box"] = {"lo": lo, "hi": hi}
    report["fields"] = {"u3d_min": float(sol.u3d.min()), "u3d_max": float(sol.u3d.max()),
                        "u1d_min": float(sol.u1d.min()), "u1d_max": float(sol.u1d.max())}
    write_vtk_3d(os.path.join(out, "u3d.vtk"), mesh, sol.u3d)
    write_vtk_1d(os.path.join(out, "u1d.vtk"), pb.space1, sol.u1d)
    if cfg.export_matrix:
        write_matrix_market(os.path.join(out, "system.mtx"), pb.matrix())
    print(f"solved {pb.ndofs} unknowns in {sol.report.iterations} CG iterations; "
          f"u in [{sol.u3d.min():.4g}, {sol.u3d.max():.4g}], "
          f"u_hat in [{sol.u1d.min():.4g}, {sol.u1d.max():.4g}]")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    # everything that can be rejected up front is checked before any file is written
    try:
        cfg = resolve_config(args)
        graph = None
        if cfg.command == "solve":
            if not cfg.network:
                raise InvalidArgumentError("solve needs --network FILE")
            graph = read_network(cfg.network)
        elif cfg.command == "heat":
            heat_levels(cfg)
        else:
            parse_levels(cfg)
    except (InvalidArgumentError, NetworkFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = make_output_dir(cfg.output)
    report = {"version": __version__, "config": cfg.as_dict()}
    t0 = time.perf_counter()
    code = 0
    try:
        if cfg.command == "solve":
            run_solve(cfg, out, report, graph)
        else:
            run_study(cfg, out, report)
    except (GeometryError, OutOfDomainError) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        code = EXIT_GEOMETRY
    except (ConvergenceError, NotSPDError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        code = EXIT_SOLVER
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        code = EXIT_CONFIG
    report["exit_code"] = code
    report["runtime_s"] = round(time.perf_counter() - t0, 3)
    write_report(os.path.join(out, "report.json"), report)
    return code


if __name__ == "__main__":
    sys.exit(main())
