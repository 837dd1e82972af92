"""Acceptance gate: every release-blocking behaviour, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
summary lines.
"""

import math
import time

import mpmath as mp
import numpy as np
import pytest

from fraccolloc import (
    CollocationScheme,
    PointFamily,
    SolverState,
    StepControls,
    characteristic_coeffs,
    convergence_study,
    default_alpha_grid,
    default_system,
    frac_int_eval,
    frac_int_monomial,
    measure_error,
    problem_ex1,
    problem_ex2,
    run_adaptive,
    solve_interval,
    stable_pow_diff,
    sweep_spectrum,
)
from fraccolloc.wellposed import _pencil

from conftest import global_monomial_field, make_polynomial_problem, three_interval_mesh

GUARANTEE_TOLS = (1e-2, 1e-3, 1e-4)
GUARANTEE_ALPHAS = (0.2, 0.4, 0.8)
GUARANTEE_DEGREES = (0, 2, 4)


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")


@pytest.fixture(scope="module")
def guarantee_runs():
    """The full tolerance-guarantee grid, shared by criteria 1 and 7."""
    runs = []
    started = time.perf_counter()
    for maker in (problem_ex1, problem_ex2):
        for alpha in GUARANTEE_ALPHAS:
            problem = maker(alpha)
            system = default_system(problem)
            for m in GUARANTEE_DEGREES:
                scheme = CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, m)
                for tol in GUARANTEE_TOLS:
                    record, state, log = run_adaptive(
                        problem, scheme, tol, system=system
                    )
                    runs.append((problem, scheme, tol, record, state))
    return runs, time.perf_counter() - started


def test_criterion_1_tolerance_guarantee(guarantee_runs):
    runs, elapsed = guarantee_runs
    assert len(runs) == 54
    failures = [
        (p.name, p.alpha, s.m, tol, rec.error)
        for p, s, tol, rec, _ in runs
        if rec.error > tol
    ]
    worst = max(rec.error / tol for _, _, tol, rec, _ in runs)
    ok = not failures and elapsed < 600.0
    report(
        "criterion 1 (tolerance guarantee)",
        ok,
        f"54 runs, worst error/tol {worst:.3f}, {elapsed:.1f} s",
    )
    assert not failures, failures
    assert elapsed < 600.0


def test_criterion_2_high_order_efficiency():
    problem = problem_ex1(0.4)
    scheme = CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, 8)
    record, _, _ = run_adaptive(
        problem, scheme, 1e-8, controls=StepControls(tau_init=problem.T)
    )
    ok = record.num_intervals <= 8 and record.error <= 1e-8
    report(
        "criterion 2 (high-order efficiency)",
        ok,
        f"m=8 tol=1e-8: M={record.num_intervals}, error={record.error:.3e}",
    )
    assert record.num_intervals <= 8
    assert record.error <= 1e-8


def test_criterion_3_convergence_rate():
    problem = problem_ex1(0.4)
    scheme = CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, 4)
    study = convergence_study(problem, scheme, [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    ok = -5.3 <= study.fitted_rate <= -3.9
    report(
        "criterion 3 (convergence rate)",
        ok,
        f"fitted slope {study.fitted_rate:.3f} in [-5.3, -3.9]",
    )
    assert -5.3 <= study.fitted_rate <= -3.9


def test_criterion_4_spectrum_sweeps():
    started = time.perf_counter()
    grid = default_alpha_grid(199)
    all_clear = True
    positive_real_families = (PointFamily.GAUSS_LEGENDRE, PointFamily.GAUSS_LOBATTO)
    for family in (
        PointFamily.EQUIDISTANT_INTERIOR,
        PointFamily.GAUSS_LEGENDRE,
        PointFamily.GAUSS_LOBATTO,
    ):
        for m in (2, 3, 5, 8):
            scheme = CollocationScheme.from_family(family, m)
            dim = m if scheme.reduced else m + 1
            report_ = sweep_spectrum(scheme, grid)
            assert all(vals.size == dim for vals in report_.eigenvalues)
            all_clear &= report_.well_posed_everywhere
            assert report_.well_posed_everywhere, (family, m)
            if family in positive_real_families:
                all_clear &= report_.all_real_parts_positive
                assert report_.all_real_parts_positive, (family, m)
    elapsed = time.perf_counter() - started
    ok = all_clear and elapsed < 10.0
    report(
        "criterion 4 (spectrum sweeps)",
        ok,
        f"12 sweeps x 199 orders, spectra clear of the negative axis, {elapsed:.1f} s",
    )
    assert elapsed < 10.0


def test_criterion_5_characteristic_positivity():
    alphas = np.arange(1, 21) * 0.05
    checked = 0
    worst_gap = math.inf
    for family in (
        PointFamily.EQUIDISTANT_INTERIOR,
        PointFamily.GAUSS_LEGENDRE,
        PointFamily.RIGHT_ENDPOINT,
    ):
        degrees = (0,) if family == PointFamily.RIGHT_ENDPOINT else range(0, 9)
        for m in degrees:
            scheme = CollocationScheme.from_family(family, m)
            for alpha in alphas:
                coeffs = characteristic_coeffs(scheme, float(alpha))
                assert np.all(coeffs > 0.0), (family, m, alpha)
                m1, m2 = _pencil(scheme, float(alpha))
                want = np.linalg.det(m1 + m2)
                assert coeffs.sum() == pytest.approx(want, rel=1e-8)
                worst_gap = min(worst_gap, float(coeffs.min()))
                checked += 1
    report(
        "criterion 5 (characteristic positivity)",
        True,
        f"{checked} coefficient vectors positive, smallest entry {worst_gap:.3e}",
    )


def test_criterion_6_quadrature_oracle_equivalence(rng):
    worst = 0.0
    for j in range(0, 9):
        for alpha in (0.2, 0.5, 0.9):
            for _ in range(3):
                mesh = three_interval_mesh(rng)
                field = global_monomial_field(mesh, j)
                for t in (0.2, float(rng.uniform(0.3, 1.0)), 1.0):
                    got = frac_int_eval(field, mesh, alpha, t)[0]
                    want = frac_int_monomial(j, alpha, 1.0) * t ** (j + alpha)
                    rel = abs(got - want) / abs(want)
                    worst = max(worst, rel)
                    assert rel <= 1e-11
    spd_worst = 0.0
    with mp.workdps(50):
        for theta in (1.0 + 1e-9, 2.0, 1e6, 1e12):
            for alpha in (0.2, 0.5, 0.9):
                want = float(mp.mpf(theta) ** alpha - (mp.mpf(theta) - 1.0) ** alpha)
                rel = abs(stable_pow_diff(theta, alpha) - want) / want
                spd_worst = max(spd_worst, rel)
                assert rel <= 1e-12
    report(
        "criterion 6 (quadrature oracles)",
        True,
        f"monomial integrals worst rel {worst:.2e}, power differences worst rel {spd_worst:.2e}",
    )


def test_criterion_7_structural_residual_zero(guarantee_runs):
    runs, _ = guarantee_runs
    worst = 0.0
    for problem, scheme, tol, record, state in runs:
        xs = state.system.sample_points
        scale = max(
            1.0,
            max(
                float(np.max(np.abs(problem.f(xs, t))))
                for t in np.linspace(0.0, problem.T, 17)
            ),
        )
        for k in range(1, state.n_intervals + 1):
            norms = state.residual_norms(k, scheme.theta)
            worst = max(worst, float(norms.max()) / scale)
    ok = worst <= 1e-9
    report(
        "criterion 7 (residual zero at collocation points)",
        ok,
        f"worst scaled residual {worst:.3e} <= 1e-9",
    )
    assert worst <= 1e-9


def test_criterion_8_exactness(rng):
    worst = 0.0
    for m in (0, 1, 2, 4):
        families = [PointFamily.GAUSS_LEGENDRE]
        if m >= 1:
            families.append(PointFamily.GAUSS_LOBATTO)
        for family in families:
            alpha = float(rng.uniform(0.2, 0.9))
            u0, f, u_exact, _ = make_polynomial_problem(
                rng.standard_normal(m + 1), alpha
            )
            scheme = CollocationScheme.from_family(family, m)
            system = default_system(problem_ex1(0.4))
            state = SolverState(scheme, system, alpha, u0, f)
            for tau in (0.3, 0.45, 0.25):
                block = solve_interval(state, tau)
                state.push_interval(tau, block, t_end=None if tau != 0.25 else 1.0)
            xs = system.sample_points
            theta = scheme.theta
            for k in (1, 2, 3):
                offs = np.unique(np.concatenate([theta, np.linspace(0.01, 1.0, 9)]))
                times = state.mesh.t(k - 1) + offs * state.mesh.tau(k)
                rows = state.system.field_values(state.u_dof_rows(k, offs))
                for row, t in zip(rows, times):
                    err = float(np.max(np.abs(row - u_exact(xs, t))))
                    worst = max(worst, err)
                    assert err <= 1e-9
    report(
        "criterion 8 (polynomial exactness)",
        True,
        f"worst pointwise error {worst:.3e} <= 1e-9",
    )


def test_criterion_9_extreme_orders():
    details = []
    for alpha in (0.1, 0.999):
        problem = problem_ex1(alpha)
        scheme = CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, 4)
        record, state, _ = run_adaptive(problem, scheme, 1e-3)
        assert record.error <= 1e-3
        assert state.mesh.t_end == problem.T
        details.append(f"alpha={alpha}: M={record.num_intervals}, error={record.error:.2e}")
    report("criterion 9 (extreme orders)", True, "; ".join(details))
