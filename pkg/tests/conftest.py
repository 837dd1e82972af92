"""Shared helpers: manufactured problems and globally-polynomial fields."""

from math import comb

import numpy as np
import pytest

from fraccolloc import PiecewisePolyField, TemporalMesh, frac_coeffs


def make_polynomial_problem(pcoef, alpha):
    """Problem whose field w = p(t) x(1-x) is a polynomial of degree len(pcoef)-1.

    The solution is u = (1 + J^alpha p) x(1-x) with u0 = x(1-x); the forcing
    follows from the closed-form fractional integral of the monomials, and it
    does not vanish on the boundary (which exercises the load assembly).
    """
    pcoef = np.asarray(pcoef, dtype=float)
    cj = frac_coeffs(pcoef.size, alpha)

    def p(t):
        return sum(pcoef[j] * t**j for j in range(pcoef.size))

    def jp(t):
        return sum(pcoef[j] * cj[j] * t ** (j + alpha) for j in range(pcoef.size))

    def u0(x):
        return x * (1.0 - x)

    def u_exact(x, t):
        return (1.0 + jp(t)) * x * (1.0 - x)

    def f(x, t):
        return p(t) * x * (1.0 - x) + 2.0 * (1.0 + jp(t))

    def w_exact(t):
        return p(t)

    return u0, f, u_exact, w_exact


def global_monomial_field(mesh: TemporalMesh, j: int) -> PiecewisePolyField:
    """Field equal to t**j globally, expanded per interval in the local basis."""
    field = PiecewisePolyField(mesh, j, 1)
    for k in range(1, mesh.num_intervals + 1):
        t0, tau = mesh.t(k - 1), mesh.tau(k)
        coef = np.array([comb(j, i) * t0 ** (j - i) * tau**i for i in range(j + 1)])
        field.append_block(coef[:, None])
    return field


def three_interval_mesh(rng, T=1.0) -> TemporalMesh:
    cuts = np.sort(rng.uniform(0.05 * T, 0.95 * T, size=2))
    mesh = TemporalMesh()
    mesh.append(cuts[0])
    mesh.append(cuts[1] - cuts[0])
    mesh.append(T - cuts[1], t_end=T)
    return mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
