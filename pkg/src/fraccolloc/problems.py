"""Benchmark problems with manufactured forcing, error measurement, studies.

Both stock problems share the spatial profile x(1-x) on the unit interval
with the negative second derivative as operator, so ten quadratic cells
resolve them exactly in space and every measured error is temporal.  The
forcing terms come from the closed-form fractional derivative of the exact
solutions' monomial time profiles.
"""

import concurrent.futures
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .colloc import CollocationScheme
from .fem1d import SpatialSystem, assemble, barrier_pair
from .fracint import gamma_fn
from .solver import BarrierSpec, RunLog, SolverState, StepControls, adapt_run

__all__ = [
    "TestProblem",
    "RunRecord",
    "problem_ex1",
    "problem_ex2",
    "default_system",
    "default_barrier",
    "measure_error",
    "run_adaptive",
    "StudyRow",
    "ConvergenceStudy",
    "convergence_study",
]


@dataclass(frozen=True)
class TestProblem:
    """A subdiffusion benchmark with known exact solution and matching forcing."""

    name: str
    alpha: float
    T: float
    domain: tuple[float, float]
    u_exact: object
    u0: object
    f: object
    singular_exponents: tuple[float, ...] = field(default_factory=tuple)


def problem_ex1(alpha: float, T: float = 1.0) -> TestProblem:
    """Exact solution (t**alpha - t**2 + 1) x (1-x).

    The solution has the typical weak t**alpha start, but its fractional
    derivative only carries the much milder t**(2-alpha) mode, so adaptive
    meshes stay comparatively coarse near t = 0.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    g1 = gamma_fn(1.0 + alpha)
    g2 = 2.0 / gamma_fn(3.0 - alpha)

    def u_exact(x, t):
        return (t**alpha - t * t + 1.0) * x * (1.0 - x)

    def u0(x):
        return x * (1.0 - x)

    def f(x, t):
        return (g1 - g2 * t ** (2.0 - alpha)) * x * (1.0 - x) + 2.0 * (
            t**alpha - t * t + 1.0
        )

    return TestProblem(
        name="ex1",
        alpha=alpha,
        T=T,
        domain=(0.0, 1.0),
        u_exact=u_exact,
        u0=u0,
        f=f,
        singular_exponents=(2.0 - alpha,),
    )


def problem_ex2(alpha: float, T: float = 1.0) -> TestProblem:
    """Exact solution (t**alpha - t**(2 alpha) + 1) x (1-x).

    Here the fractional derivative keeps a genuine t**alpha singularity, so
    adaptive meshes must refine strongly near t = 0.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    g1 = gamma_fn(1.0 + alpha)
    g2 = gamma_fn(2.0 * alpha + 1.0) / gamma_fn(alpha + 1.0)

    def u_exact(x, t):
        return (t**alpha - t ** (2.0 * alpha) + 1.0) * x * (1.0 - x)

    def u0(x):
        return x * (1.0 - x)

    def f(x, t):
        return (g1 - g2 * t**alpha) * x * (1.0 - x) + 2.0 * (
            t**alpha - t ** (2.0 * alpha) + 1.0
        )

    return TestProblem(
        name="ex2",
        alpha=alpha,
        T=T,
        domain=(0.0, 1.0),
        u_exact=u_exact,
        u0=u0,
        f=f,
        singular_exponents=(alpha,),
    )


def default_system(problem, cells: int = 10, degree: int = 2) -> SpatialSystem:
    """Quadratic elements on a coarse uniform grid: exact for the stock problems."""
    return assemble(problem.domain, cells, degree)


def default_barrier(
    problem,
    tol: float,
    system: SpatialSystem | None = None,
    kind: str = "r0",
    norm_p: str = "linf",
    lam: float | None = None,
    omega: float | None = None,
) -> BarrierSpec:
    """Barrier with the operator's admissible (lambda, omega) pair filled in."""
    if lam is None or omega is None:
        if system is None:
            system = default_system(problem)
        lam_d, omega_d = barrier_pair(system, norm_p=norm_p)
        lam = lam_d if lam is None else lam
        omega = omega_d if omega is None else omega
    return BarrierSpec(
        tol=tol, lam=lam, alpha=problem.alpha, kind=kind, omega=omega, norm_p=norm_p
    )


def measure_error(
    state: SolverState, problem, samples_per_interval: int = 16
) -> float:
    """Max-in-time of the max-norm spatial error over a dense per-interval time set.

    The sample set per interval joins both breakpoints, the collocation
    points, and the residual-style midpoint offsets; breakpoints matter
    because the largest error of singular problems tends to sit near t = 0.
    """
    system = state.system
    xs = system.sample_points
    theta = state.scheme.theta
    mids = (np.arange(samples_per_interval) + 0.5) / samples_per_interval
    offsets = np.unique(np.concatenate([[0.0, 1.0], theta, mids]))
    worst = 0.0
    for k in range(1, state.n_intervals + 1):
        t_prev = state.mesh.t(k - 1)
        tau = state.mesh.tau(k)
        times = t_prev + offsets * tau
        u_rows = state.u_dof_rows(k, offsets)
        u_pts = system.field_values(u_rows)
        for row, t in zip(u_pts, times):
            err = float(np.max(np.abs(row - problem.u_exact(xs, t))))
            worst = max(worst, err)
    return worst


@dataclass
class RunRecord:
    """Summary of one adaptive run, JSON-friendly."""

    problem: str
    scheme: str
    alpha: float
    tol: float
    barrier_kind: str
    norm_p: str
    num_intervals: int
    error: float
    wall_time: float
    total_rejections: int
    intervals: list[dict]

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "scheme": self.scheme,
            "alpha": self.alpha,
            "tol": self.tol,
            "barrier_kind": self.barrier_kind,
            "norm_p": self.norm_p,
            "num_intervals": self.num_intervals,
            "error": self.error,
            "wall_time": self.wall_time,
            "total_rejections": self.total_rejections,
            "intervals": self.intervals,
        }


def run_adaptive(
    problem,
    scheme: CollocationScheme,
    tol: float,
    barrier: BarrierSpec | None = None,
    controls: StepControls | None = None,
    system: SpatialSystem | None = None,
) -> tuple[RunRecord, SolverState, RunLog]:
    """Adaptive run plus error measurement against the exact solution."""
    if system is None:
        system = default_system(problem)
    if barrier is None:
        barrier = default_barrier(problem, tol, system=system)
    started = time.perf_counter()
    mesh, state, log = adapt_run(problem, scheme, barrier, controls, system=system)
    error = measure_error(state, problem)
    record = RunRecord(
        problem=problem.name,
        scheme=state.scheme.describe(),
        alpha=problem.alpha,
        tol=tol,
        barrier_kind=barrier.kind,
        norm_p=barrier.norm_p,
        num_intervals=mesh.num_intervals,
        error=error,
        wall_time=time.perf_counter() - started,
        total_rejections=log.total_rejections,
        intervals=[
            {
                "tau": entry.tau,
                "rejections": entry.rejections,
                "max_ratio": entry.max_ratio,
            }
            for entry in log.intervals
        ],
    )
    return record, state, log


@dataclass
class StudyRow:
    tol: float
    num_intervals: int
    error: float
    rate: float | None


@dataclass
class ConvergenceStudy:
    rows: list[StudyRow]
    fitted_rate: float
    monotone: bool


def convergence_study(
    problem,
    scheme: CollocationScheme,
    tol_list,
    controls_factory=None,
    workers: int = 1,
) -> ConvergenceStudy:
    """Adaptive runs across tolerances with a least-squares error-vs-size rate.

    Needs at least three tolerances spanning two decades.  The default
    controls start at a quarter of the horizon with moderate growth: coarse
    tolerances then neither collapse onto a single interval nor sit on the
    floor a tiny initial step imposes, so the interval count responds to the
    tolerance and the fitted slope reflects the scheme.  Non-monotone interval
    counts are flagged with a warning, not an error.
    """
    tols = sorted(float(t) for t in tol_list)[::-1]
    if len(tols) < 3:
        raise ValueError("need at least three tolerances")
    if tols[-1] <= 0 or tols[0] / tols[-1] < 99.0:
        raise ValueError("tolerances must span at least two decades")
    if controls_factory is None:
        controls_factory = lambda tol: StepControls(
            tau_init=problem.T / 4.0, growth=1.5
        )

    def one(tol: float) -> RunRecord:
        record, _, _ = run_adaptive(problem, scheme, tol, controls=controls_factory(tol))
        return record

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, tols))
    else:
        records = [one(t) for t in tols]

    rows: list[StudyRow] = []
    for i, rec in enumerate(records):
        rate = None
        if i > 0 and rec.num_intervals != records[i - 1].num_intervals:
            prev = records[i - 1]
            rate = math.log(rec.error / prev.error) / math.log(
                rec.num_intervals / prev.num_intervals
            )
        rows.append(StudyRow(rec.tol, rec.num_intervals, rec.error, rate))

    sizes = np.array([r.num_intervals for r in rows], dtype=float)
    errors = np.array([r.error for r in rows])
    fitted = float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])
    monotone = bool(np.all(np.diff(sizes) >= 0.0))
    if not monotone:
        warnings.warn("interval counts are not monotone across tolerances")
    return ConvergenceStudy(rows=rows, fitted_rate=fitted, monotone=monotone)
