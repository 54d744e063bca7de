"""
Command-line harness: standalone adaptation, the solve/recover/adapt fixed-point
loop, convergence studies and mesh statistics.

Exit status is 0 on success, 1 on a usage error and 2 when the run itself fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fem import (
    ConvergenceError,
    PoissonProblem,
    l2_error,
    manufactured_interface,
    manufactured_quadratic,
    solve_poisson,
)
from .meshkit import (
    STATS_HEADER,
    MeditParseError,
    MeshError,
    MeshStatistics,
    SimplicialMesh,
    read_medit,
    read_sol,
    statistics,
    statistics_csv,
    structured_mesh,
    write_medit,
    write_sol,
    write_vtk,
)
from .metric import AdaptOptions
from .parallel import parallel_adapt_with_metric
from .recovery import hessian_metric

log = logging.getLogger(__name__)

__all__ = [
    "ConvergenceRecord",
    "ConvergenceStudy",
    "convergence_study",
    "fit_slope",
    "main",
    "make_problem",
    "run_fixed_point",
    "uniform_baseline",
]

INITIAL_CELLS_PER_SIDE = 10
PROBLEMS = ("quadratic", "interface")


def make_problem(name: str, dim: int = 2) -> PoissonProblem:
    if name == "quadratic":
        return manufactured_quadratic(dim)
    if name == "interface":
        return manufactured_interface(dim)
    raise ValueError(f"unknown problem {name!r}, expected one of {', '.join(PROBLEMS)}")


@dataclass
class ConvergenceRecord:
    target: float
    vertices: int
    elements: int
    l2_error: float
    stats: MeshStatistics
    wall_time: float
    kind: str = "adaptive"

    def row(self) -> list:
        # the statistics row already carries the element and vertex counts
        return [self.kind, self.target, self.l2_error, *self.stats.as_row(), self.wall_time]


RECORD_HEADER = ("kind", "target", "l2_error", *STATS_HEADER, "wall_time")


def _record(kind, target, mesh, u, problem, started):
    return ConvergenceRecord(
        target=float(target),
        vertices=mesh.num_vertices,
        elements=mesh.num_cells,
        l2_error=l2_error(mesh, u, problem.exact),
        stats=statistics(mesh),
        wall_time=time.perf_counter() - started,
        kind=kind,
    )


def run_fixed_point(problem: PoissonProblem, opts: AdaptOptions, mesh: SimplicialMesh | None = None, seed: int = 0):
    """
    Alternate solve, metric construction and adaptation ``opts.fixed_point_iters``
    times, re-solving from scratch on every new mesh.

    :returns: ``(mesh, solution, records)`` with one record per adapted mesh
    """
    if problem.dim != 2:
        raise ValueError("adaptation is available for 2D problems only")
    mesh = structured_mesh(problem.dim, INITIAL_CELLS_PER_SIDE) if mesh is None else mesh
    records = []
    started = time.perf_counter()
    u = None
    for it in range(opts.fixed_point_iters):
        u = _solve(mesh, problem, it)
        if it > 0:
            records.append(_record("adaptive", opts.target_complexity, mesh, u, problem, started))
        metric = hessian_metric(mesh, u, opts)
        mesh, _ = parallel_adapt_with_metric(mesh, metric, opts, seed=seed)
        log.info("fixed point %d: %d vertices", it, mesh.num_vertices)
    u = _solve(mesh, problem, opts.fixed_point_iters)
    records.append(_record("adaptive", opts.target_complexity, mesh, u, problem, started))
    return mesh, u, records


def _solve(mesh, problem, it):
    try:
        return solve_poisson(mesh, problem)
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"fixed-point iteration {it}: {exc}", exc.iterations, exc.residual
        ) from exc


def uniform_mesh_for(dim: int, vertices: int) -> SimplicialMesh:
    """Structured mesh whose vertex count is closest to ``vertices``."""
    n = max(1, int(round(vertices ** (1.0 / dim))) - 1)
    return structured_mesh(dim, n)


def uniform_baseline(problem: PoissonProblem, vertex_counts) -> list[ConvergenceRecord]:
    out = []
    for count in vertex_counts:
        started = time.perf_counter()
        mesh = uniform_mesh_for(problem.dim, count)
        u = solve_poisson(mesh, problem)
        out.append(_record("uniform", count, mesh, u, problem, started))
    return out


def fit_slope(vertices, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(vertices)``."""
    x = np.log(np.asarray(vertices, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if len(x) < 2:
        raise ValueError("need at least two points to fit a slope")
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ConvergenceStudy:
    records: list
    slope: float
    baseline: list
    baseline_slope: float

    def error_ratios(self) -> np.ndarray:
        """Adaptive over uniform error at (approximately) matched vertex counts."""
        return np.array([a.l2_error / b.l2_error for a, b in zip(self.records, self.baseline)])


def convergence_study(problem: PoissonProblem, targets, opts: AdaptOptions, seed: int = 0) -> ConvergenceStudy:
    targets = [float(t) for t in targets]
    if len(targets) < 3:
        raise ValueError("a convergence study needs at least three targets")
    if any(b <= a for a, b in zip(targets, targets[1:])):
        raise ValueError("targets must be strictly increasing")
    records = []
    for target in targets:
        _, _, recs = run_fixed_point(problem, opts.replace(target_complexity=target), seed=seed)
        records.append(recs[-1])
    slope = fit_slope([r.vertices for r in records], [r.l2_error for r in records])
    baseline = uniform_baseline(problem, [r.vertices for r in records])
    baseline_slope = fit_slope([r.vertices for r in baseline], [r.l2_error for r in baseline])
    return ConvergenceStudy(records, slope, baseline, baseline_slope)


def _options_comment(opts: AdaptOptions, **extra) -> str:
    return f"options: {json.dumps({**opts.as_dict(), **extra}, sort_keys=True)}"


def records_csv(records, opts: AdaptOptions, footer=(), **extra) -> str:
    buf = io.StringIO()
    buf.write(f"# {_options_comment(opts, **extra)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_HEADER)
    for r in records:
        writer.writerow(r.row())
    for row in footer:
        writer.writerow(row)
    return buf.getvalue()


def study_csv(study: ConvergenceStudy, opts: AdaptOptions, **extra) -> str:
    footer = [("slope", "adaptive", study.slope), ("slope", "uniform", study.baseline_slope)]
    return records_csv(study.records + study.baseline, opts, footer, **extra)


# -------------------------------------------------------------------- commands


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _p_norm(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    value = float(text)
    if not value.is_integer() or value < 1:
        raise argparse.ArgumentTypeError(f"p must be a positive integer or 'inf', got {text}")
    return value


def _targets(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"targets must be comma-separated numbers, got {text!r}") from None


def _add_adapt_options(p, target=True):
    if target:
        p.add_argument("--target", type=float, default=1000.0, help="target metric complexity N")
    p.add_argument("--p-norm", type=_p_norm, default=1.0, help="normalization order p or 'inf'")
    p.add_argument("--h-min", type=float, default=1e-8)
    p.add_argument("--h-max", type=float, default=0.5)
    p.add_argument("--gradation", type=float, default=1.3, help="gradation factor beta")
    p.add_argument("--iters", type=int, default=3, help="fixed-point iterations")
    p.add_argument("--parallel-iters", type=int, default=3)
    p.add_argument("--parts", type=int, default=1, help="number of parts adapted concurrently")
    p.add_argument("--seed", type=int, default=0, help="offsets the partition seeds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anisomesh", description="Anisotropic metric-based mesh adaptation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.commands = sub.choices

    p = sub.add_parser("adapt", help="adapt a Medit mesh to a metric given in a .sol file")
    p.add_argument("--mesh", required=True)
    p.add_argument("--sol", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-sol", help="also write the metric carried to the new vertices")
    p.add_argument("--vtk")
    p.add_argument("--csv", help="statistics of the adapted mesh")
    _add_adapt_options(p)

    p = sub.add_parser("solve", help="run the fixed-point adaptation loop for a test problem")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--out")
    p.add_argument("--vtk")
    p.add_argument("--csv")
    _add_adapt_options(p)

    p = sub.add_parser("converge", help="convergence study over several targets")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--targets", type=_targets, required=True)
    p.add_argument("--csv")
    _add_adapt_options(p, target=False)

    p = sub.add_parser("stats", help="mesh statistics as CSV")
    p.add_argument("--mesh", required=True)
    p.add_argument("--csv")
    return parser


def _options(args, target=None) -> AdaptOptions:
    return AdaptOptions(
        target_complexity=args.target if target is None else target,
        p=args.p_norm,
        h_min=args.h_min,
        h_max=args.h_max,
        gradation_beta=args.gradation,
        fixed_point_iters=args.iters,
        parallel_iters=args.parallel_iters,
        num_parts=args.parts,
    )


def _emit(text, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_adapt(args):
    opts = _options(args)
    mesh = read_medit(args.mesh)
    metric = read_sol(args.sol, mesh)
    out, values = parallel_adapt_with_metric(mesh, metric, opts, seed=args.seed)
    write_medit(out, args.out)
    if args.out_sol:
        write_sol(values, args.out_sol)
    if args.vtk:
        write_vtk(out, args.vtk, point_data={"metric": values})
    if args.csv:
        Path(args.csv).write_text(statistics_csv([statistics(out)], _options_comment(opts, seed=args.seed)))
    return 0


def cmd_solve(args):
    opts = _options(args)
    problem = make_problem(args.problem)
    mesh, u, records = run_fixed_point(problem, opts, seed=args.seed)
    _emit(records_csv(records, opts, problem=args.problem, seed=args.seed), args.csv)
    if args.out:
        write_medit(mesh, args.out)
    if args.vtk:
        exact = problem.exact(mesh.points)
        write_vtk(mesh, args.vtk, point_data={"u": u, "u_exact": exact, "error": u - exact})
    return 0


def cmd_converge(args):
    opts = _options(args, target=args.targets[0] if args.targets else 1.0)
    problem = make_problem(args.problem)
    study = convergence_study(problem, args.targets, opts, seed=args.seed)
    _emit(study_csv(study, opts, problem=args.problem, seed=args.seed, targets=args.targets), args.csv)
    return 0


def cmd_stats(args):
    mesh = read_medit(args.mesh)
    _emit(statistics_csv([statistics(mesh)], f"mesh: {args.mesh}"), args.csv)
    return 0


COMMANDS = {"adapt": cmd_adapt, "solve": cmd_solve, "converge": cmd_converge, "stats": cmd_stats}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if extra:
            # report against the subcommand so the usage line lists its flags
            parser.commands[args.command].error(f"unrecognized arguments: {' '.join(extra)}")
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, MeshError, MeditParseError, ConvergenceError, OSError) as exc:
        print(f"anisomesh {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything else is still a failed run, not a usage error
        log.debug("unexpected failure", exc_info=True)
        print(f"anisomesh {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
