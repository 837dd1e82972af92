"""Command-line front-end: adaptive runs, fixed-mesh solves, spectrum sweeps,
convergence studies, and a quick self-test.

Outputs are JSON for run summaries and CSV (comma separated, '.' decimal,
17 significant digits, header row) for traces and sweeps, so two identical
invocations produce byte-identical CSV files.  A JSON config file can mirror
any flag; explicit flags win.  FRACCOLLOC_THREADS caps worker parallelism.
"""

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .colloc import CollocationScheme, PointFamily
from .problems import (
    convergence_study,
    default_barrier,
    default_system,
    measure_error,
    problem_ex1,
    problem_ex2,
    run_adaptive,
)
from .solver import (
    BarrierSpec,
    SolverState,
    StepControls,
    solve_interval,
)
from .wellposed import default_alpha_grid, sweep_spectrum

_FAMILIES = {fam.value: fam for fam in PointFamily if fam != PointFamily.CUSTOM}


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, (int, float, np.floating)) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _problem(args):
    maker = {"ex1": problem_ex1, "ex2": problem_ex2}[args.problem]
    return maker(args.alpha, T=args.T)


def _scheme(args) -> CollocationScheme:
    return CollocationScheme.from_family(_FAMILIES[args.points], args.m)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_config(args: argparse.Namespace, parser_defaults: dict) -> argparse.Namespace:
    """Fill unset flags from the JSON config file, flags taking precedence."""
    if not getattr(args, "config", None):
        return args
    with open(args.config, "r", encoding="utf-8") as handle:
        cfg = json.load(handle)
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            continue
        if getattr(args, dest) == parser_defaults.get(dest):
            setattr(args, dest, value)
    return args


def _controls(args) -> StepControls:
    return StepControls(
        tau_init=args.tau_init,
        growth=args.growth,
        shrink=args.shrink,
        max_rejections=args.max_rejections,
        samples=args.samples,
        max_intervals=args.max_intervals,
        l0_first_interval=getattr(args, "l0_first", False),
        quad_order=args.quad_order,
    )


def _barrier(problem, system, args) -> BarrierSpec:
    return default_barrier(
        problem,
        args.tol,
        system=system,
        kind=args.barrier,
        norm_p=args.norm,
        lam=args.lam,
        omega=args.omega,
    )


def _slug(*parts) -> str:
    return "_".join(str(p) for p in parts)


def _cmd_adapt(args) -> int:
    problem = _problem(args)
    scheme = _scheme(args)
    system = default_system(problem, cells=args.cells, degree=args.degree)
    barrier = _barrier(problem, system, args)
    record, state, log = run_adaptive(
        problem, scheme, args.tol, barrier=barrier, controls=_controls(args), system=system
    )
    out = _out_dir(args)
    slug = _slug("adapt", problem.name, f"a{args.alpha:g}", f"m{args.m}", args.points, f"tol{args.tol:g}", args.barrier)
    _write_json(out / f"{slug}.json", record.to_dict())
    rows = []
    breaks = state.mesh.breakpoints
    for k, entry in enumerate(log.intervals, start=1):
        rows.append((k, breaks[k - 1], breaks[k], entry.tau, entry.rejections, entry.max_ratio))
    _write_csv(
        out / f"{slug}_mesh.csv",
        ["k", "t_start", "t_end", "tau", "rejections", "max_ratio"],
        rows,
    )
    print(
        f"{problem.name} alpha={args.alpha:g} m={args.m} {args.points} tol={args.tol:g}: "
        f"M={record.num_intervals} error={record.error:.3e} (<= tol: {record.error <= args.tol})"
    )
    return 0


def _cmd_solve(args) -> int:
    problem = _problem(args)
    scheme = _scheme(args)
    system = default_system(problem, cells=args.cells, degree=args.degree)
    state = SolverState(scheme, system, problem.alpha, problem.u0, problem.f, quad_order=args.quad_order)
    frac = (np.arange(1, args.intervals + 1) / args.intervals) ** args.grading
    breaks = problem.T * frac
    prev = 0.0
    for t_k in breaks:
        block = solve_interval(state, t_k - prev)
        state.push_interval(t_k - prev, block, t_end=t_k)
        prev = t_k
    error = measure_error(state, problem)
    out = _out_dir(args)
    slug = _slug("solve", problem.name, f"a{args.alpha:g}", f"m{args.m}", args.points, f"M{args.intervals}", f"r{args.grading:g}")
    _write_json(
        out / f"{slug}.json",
        {
            "problem": problem.name,
            "scheme": scheme.describe(),
            "alpha": problem.alpha,
            "intervals": args.intervals,
            "grading": args.grading,
            "error": error,
        },
    )
    print(f"fixed mesh M={args.intervals} grading={args.grading:g}: error={error:.3e}")
    return 0


def _cmd_spectrum(args) -> int:
    scheme = _scheme(args)
    grid = default_alpha_grid(args.alpha_grid)
    report = sweep_spectrum(scheme, grid, with_coeffs=args.with_coeffs)
    out = _out_dir(args)
    slug = _slug("spectrum", f"m{args.m}", args.points, f"g{args.alpha_grid}")
    header = ["alpha", "index", "re", "im", "neg_axis_distance"]
    n_coeff = 0
    if report.coeffs is not None:
        n_coeff = report.coeffs.shape[1]
        header += [f"a_{j}" for j in range(n_coeff)]
    rows = []
    for i, alpha in enumerate(report.alpha_grid):
        for idx, val in enumerate(report.eigenvalues[i]):
            row = [alpha, idx, val.real, val.imag, report.min_neg_axis_distance[i]]
            if n_coeff:
                row += list(report.coeffs[i])
            rows.append(row)
    _write_csv(out / f"{slug}.csv", header, rows)
    print(
        f"spectrum m={args.m} {args.points}: min distance to the negative axis "
        f"{np.nanmin(report.min_neg_axis_distance):.6g}; "
        f"all real parts positive: {report.all_real_parts_positive}"
    )
    return 0 if report.well_posed_everywhere else 1


def _cmd_convergence(args) -> int:
    problem = _problem(args)
    scheme = _scheme(args)
    tols = [float(t) for t in args.tols.split(",")]
    workers = args.workers or _env_threads()
    study = convergence_study(problem, scheme, tols, workers=workers)
    out = _out_dir(args)
    slug = _slug("convergence", problem.name, f"a{args.alpha:g}", f"m{args.m}", args.points)
    rows = [
        (r.tol, r.num_intervals, r.error, r.rate if r.rate is not None else math.nan)
        for r in study.rows
    ]
    _write_csv(out / f"{slug}.csv", ["tol", "M", "error", "rate"], rows)
    _write_json(
        out / f"{slug}.json",
        {
            "problem": problem.name,
            "scheme": scheme.describe(),
            "alpha": problem.alpha,
            "fitted_rate": study.fitted_rate,
            "monotone": study.monotone,
        },
    )
    print(f"fitted rate (log error vs log M): {study.fitted_rate:.3f}")
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest(verbose=True)


def _env_threads() -> int:
    raw = os.environ.get("FRACCOLLOC_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return max(1, min(4, os.cpu_count() or 1))


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out-dir", default="./out", help="output directory")
    sub.add_argument("--config", default=None, help="JSON config mirroring the flags")


def _add_problem_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--problem", choices=["ex1", "ex2"], default="ex1")
    sub.add_argument("--alpha", type=float, default=0.4)
    sub.add_argument("--T", type=float, default=1.0)
    sub.add_argument("--cells", type=int, default=10)
    sub.add_argument("--degree", type=int, choices=[1, 2], default=2)


def _add_scheme_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--m", type=int, default=4, help="polynomial degree in time")
    sub.add_argument(
        "--points", choices=sorted(_FAMILIES), default="gauss-legendre"
    )


def _add_control_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--tau-init", type=float, default=None, help="initial step (default T/1024)")
    sub.add_argument("--growth", type=float, default=2.0)
    sub.add_argument("--shrink", type=float, default=0.5)
    sub.add_argument("--max-rejections", type=int, default=60)
    sub.add_argument("--samples", type=int, default=16)
    sub.add_argument("--max-intervals", type=int, default=50_000)
    sub.add_argument("--quad-order", type=int, default=None)
    sub.add_argument("--l0-first", action="store_true", help="constant first interval for rough data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraccolloc",
        description="Collocation-in-time subdiffusion solvers with certified adaptive stepping",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    adapt = subs.add_parser("adapt", help="adaptive run with a residual barrier")
    _add_problem_flags(adapt)
    _add_scheme_flags(adapt)
    _add_control_flags(adapt)
    adapt.add_argument("--tol", type=float, required=True)
    adapt.add_argument("--barrier", choices=["r0", "r1"], default="r0")
    adapt.add_argument("--norm", choices=["linf", "l2"], default="linf")
    adapt.add_argument("--lam", type=float, default=None)
    adapt.add_argument("--omega", type=float, default=None)
    _add_common(adapt)
    adapt.set_defaults(func=_cmd_adapt)

    solve = subs.add_parser("solve", help="fixed-mesh run (uniform or graded)")
    _add_problem_flags(solve)
    _add_scheme_flags(solve)
    solve.add_argument("--intervals", type=int, required=True)
    solve.add_argument("--grading", type=float, default=1.0, help="t_k = (k/M)**r * T")
    solve.add_argument("--quad-order", type=int, default=None)
    _add_common(solve)
    solve.set_defaults(func=_cmd_solve)

    spectrum = subs.add_parser("spectrum", help="eigenvalue sweep of the solvability matrix")
    _add_scheme_flags(spectrum)
    spectrum.add_argument("--alpha-grid", type=int, default=199, help="grid size on (0, 1]")
    spectrum.add_argument("--with-coeffs", action="store_true")
    _add_common(spectrum)
    spectrum.set_defaults(func=_cmd_spectrum)

    conv = subs.add_parser("convergence", help="error-vs-size study across tolerances")
    _add_problem_flags(conv)
    _add_scheme_flags(conv)
    conv.add_argument("--tols", default="1e-2,1e-3,1e-4,1e-5,1e-6")
    conv.add_argument("--workers", type=int, default=None)
    _add_common(conv)
    conv.set_defaults(func=_cmd_convergence)

    selftest = subs.add_parser("selftest", help="run the built-in invariant checks")
    _add_common(selftest)
    selftest.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = {
        action.dest: action.default
        for action in parser._subparsers._group_actions[0].choices[args.command]._actions
    }
    args = _apply_config(args, defaults)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
