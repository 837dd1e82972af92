"""Built-in invariant checks, runnable without a test harness."""

import math

import numpy as np

from .colloc import CollocationScheme, PointFamily, build_matrices, make_points
from .fem1d import assemble, barrier_pair, eval_Lu, interpolate
from .fracint import frac_int_monomial, gamma_fn, stable_pow_diff
from .problems import default_barrier, measure_error, problem_ex1, run_adaptive
from .solver import StepControls, barrier_value
from .wellposed import characteristic_coeffs, eigenvalues, wellposedness_matrix


def _check_points() -> None:
    assert np.allclose(
        make_points(PointFamily.EQUIDISTANT_INTERIOR, 1), [1 / 3, 2 / 3]
    )
    for m in range(0, 9):
        for fam in (PointFamily.EQUIDISTANT_INTERIOR, PointFamily.GAUSS_LEGENDRE):
            theta = make_points(fam, m)
            assert np.all(np.diff(theta) > 0) and 0 <= theta[0] and theta[-1] <= 1
    gl = make_points(PointFamily.GAUSS_LEGENDRE, 4)
    assert np.max(np.abs(gl + gl[::-1] - 1.0)) < 1e-13


def _check_gamma() -> None:
    assert abs(gamma_fn(1.0) - 1.0) < 1e-14
    assert abs(gamma_fn(0.5) - math.sqrt(math.pi)) < 1e-13
    assert abs(frac_int_monomial(0, 0.5, 1.0) - 2.0 / math.sqrt(math.pi)) < 1e-12
    assert abs(stable_pow_diff(2.0, 0.5) - (math.sqrt(2.0) - 1.0)) < 1e-14


def _check_determinants() -> None:
    for m in (1, 2, 3, 4):
        theta = make_points(PointFamily.GAUSS_LEGENDRE, m)
        w = build_matrices(CollocationScheme.from_points(theta), 0.5).W
        prod = np.prod([theta[i] - theta[j] for i in range(m + 1) for j in range(i)])
        assert abs(np.linalg.det(w) - prod) <= 1e-10 * abs(prod)


def _check_spectrum() -> None:
    for m in (0, 1, 2, 3):
        scheme = CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, m)
        vals = eigenvalues(wellposedness_matrix(scheme, 0.5))
        assert np.all((vals.real >= 0) | (np.abs(vals.imag) > 0))
        coeffs = characteristic_coeffs(scheme, 0.5)
        assert np.all(coeffs > 0)


def _check_barrier() -> None:
    spec = default_barrier(problem_ex1(0.4), tol=1.0)
    got = barrier_value(spec, 1.0)
    want = (1.0 / math.gamma(0.6) + math.pi**2) / (1.0 + math.pi**2 / 8.0)
    assert abs(got - want) < 1e-12


def _check_fem() -> None:
    system = assemble((0.0, 1.0), 10, 2)
    assert system.n_dofs == 19
    dofs = interpolate(system, lambda x: x * (1.0 - x))
    assert abs(eval_Lu(system, dofs, 0.37) - 2.0) < 1e-11
    lam, omega = barrier_pair(system)
    assert abs(lam - math.pi**2) < 1e-14 and abs(omega - lam / 8.0) < 1e-14


def _check_adaptive() -> None:
    problem = problem_ex1(0.4)
    scheme = CollocationScheme.from_family(PointFamily.GAUSS_LEGENDRE, 2)
    record, state, _ = run_adaptive(
        problem, scheme, 1e-3, controls=StepControls(tau_init=problem.T)
    )
    assert record.error <= 1e-3
    assert measure_error(state, problem) == record.error


_CHECKS = [
    ("collocation point families", _check_points),
    ("gamma and stable kernels", _check_gamma),
    ("Vandermonde determinants", _check_determinants),
    ("solvability spectra", _check_spectrum),
    ("barrier profile", _check_barrier),
    ("finite elements", _check_fem),
    ("adaptive tolerance guarantee", _check_adaptive),
]


def run_selftest(verbose: bool = True) -> int:
    failures = 0
    for name, check in _CHECKS:
        try:
            check()
        except Exception as exc:  # report every failing check, then exit nonzero
            failures += 1
            if verbose:
                print(f"FAIL {name}: {exc}")
            continue
        if verbose:
            print(f"PASS {name}")
    return 1 if failures else 0
