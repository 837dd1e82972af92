"""Spectral well-posedness analyzer for the per-interval collocation systems.

Unique solvability of each interval solve reduces to a small matrix having no
eigenvalue on the closed negative real axis.  This module forms that matrix,
sweeps its spectrum over a grid of fractional orders, and brute-forces the
characteristic-polynomial coefficients through subset determinants, whose
positivity certifies the spectrum statement independently of any eigensolver.
"""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .colloc import CollocationScheme, build_matrices

__all__ = [
    "MAX_EIG_DIM",
    "wellposedness_matrix",
    "eigenvalues",
    "characteristic_coeffs",
    "generalized_vandermonde_det",
    "SpectrumReport",
    "sweep_spectrum",
    "default_alpha_grid",
]

MAX_EIG_DIM = 13
_EIG_RESIDUAL_TOL = 1e-10


def wellposedness_matrix(scheme: CollocationScheme, alpha: float) -> np.ndarray:
    """The solvability matrix W^-1 D1^-1 W D2^-1 (reduced variant when theta_0 = 0).

    Formed by a direct solve against the Vandermonde matrix; its conditioning
    is reported for degrees where the monomial basis starts to degrade.
    """
    mats = build_matrices(scheme, alpha)
    if mats.reduced:
        if scheme.m == 0:
            raise ValueError("theta_0 = 0 with m = 0 leaves an empty reduced system")
        w = mats.W_hat
        d1 = np.diag(mats.D1_hat)
        d2 = np.diag(mats.D2_hat)
    else:
        w = mats.W
        d1 = np.diag(mats.D1)
        d2 = np.diag(mats.D2)
    if scheme.m >= 9:
        warnings.warn(
            f"Vandermonde conditioning at m={scheme.m}: cond(W)={np.linalg.cond(w):.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    solved = np.linalg.solve(w, w / d1[:, None])
    return solved / d2[None, :]


def eigenvalues(mat: np.ndarray) -> np.ndarray:
    """All eigenvalues of a small real matrix, residual-checked and sorted.

    Every pair must satisfy ||M v - lambda v|| <= 1e-10 ||M|| for its unit
    eigenvector; the check guards against silently inaccurate spectra on badly
    conditioned inputs.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    if mat.shape[0] > MAX_EIG_DIM:
        raise ValueError(f"dimension {mat.shape[0]} exceeds the cap {MAX_EIG_DIM}")
    vals, vecs = np.linalg.eig(mat)
    scale = np.linalg.norm(mat, 2)
    if scale == 0.0:
        return vals
    resid = np.linalg.norm(mat @ vecs - vecs * vals[None, :], axis=0)
    resid /= scale * np.linalg.norm(vecs, axis=0)
    worst = float(resid.max())
    if worst > _EIG_RESIDUAL_TOL:
        raise ArithmeticError(f"eigenpair residual {worst:.3e} above tolerance")
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def _pencil(scheme: CollocationScheme, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Matrices (M1, M2) whose pencil det(M1 - lambda M2) carries the spectrum."""
    mats = build_matrices(scheme, alpha)
    cj = np.diag(mats.D2)
    m1 = mats.W / cj[None, :]
    m2 = scheme.theta[:, None] ** alpha * mats.W
    return m1, m2


def characteristic_coeffs(scheme: CollocationScheme, alpha: float) -> np.ndarray:
    """Coefficients (a_0, ..., a_{m+1}) of det(M1 - lambda M2) = sum (-lambda)^j a_j.

    a_j sums the determinants of all column-mixed matrices that take j columns
    from M2 and the rest from M1; the exhaustive subset enumeration is the
    point, serving as an eigensolver-independent certificate.
    """
    if scheme.theta[0] == 0.0:
        raise ValueError(
            "theta_0 = 0 schemes are analysed through their reduced matrix"
        )
    if scheme.m > 10:
        raise ValueError(f"subset enumeration capped at m=10, got m={scheme.m}")
    m1, m2 = _pencil(scheme, alpha)
    n = scheme.m + 1
    coeffs = np.zeros(n + 1)
    for j in range(n + 1):
        total = 0.0
        for subset in itertools.combinations(range(n), j):
            mixed = m1.copy()
            if subset:
                cols = list(subset)
                mixed[:, cols] = m2[:, cols]
            total += np.linalg.det(mixed)
        coeffs[j] = total
    return coeffs


def generalized_vandermonde_det(theta_sub, beta_exponents) -> float:
    """Determinant of [theta_i ** beta_k] for real nondecreasing exponents.

    When both sequences are strictly increasing (with theta in (0, 1]) the
    determinant is provably positive; that is asserted on the computed value
    rather than assumed.
    """
    theta = np.asarray(theta_sub, dtype=float)
    beta = np.asarray(beta_exponents, dtype=float)
    if theta.ndim != 1 or beta.ndim != 1 or theta.size != beta.size:
        raise ValueError("need equally sized 1-D point and exponent vectors")
    if np.any(theta <= 0.0) or np.any(theta > 1.0):
        raise ValueError(f"points must lie in (0, 1], got {theta!r}")
    if np.any(np.diff(theta) <= 0.0):
        raise ValueError("points must be strictly increasing")
    if np.any(beta < 0.0) or np.any(np.diff(beta) < 0.0):
        raise ValueError("exponents must be nonnegative and nondecreasing")
    det = float(np.linalg.det(theta[:, None] ** beta[None, :]))
    if np.all(np.diff(beta) > 0.0) and det <= 0.0:
        raise ArithmeticError(
            f"positivity violated for strictly increasing data: det={det!r}"
        )
    return det


def neg_axis_distance(vals: np.ndarray) -> float:
    """Distance of a spectrum to the closed negative real axis (origin included)."""
    vals = np.atleast_1d(vals)
    dist = np.where(vals.real < 0.0, np.abs(vals.imag), np.abs(vals))
    return float(dist.min())


@dataclass
class SpectrumReport:
    """Spectrum of the solvability matrix over a grid of fractional orders."""

    scheme: str
    alpha_grid: np.ndarray
    eigenvalues: list[np.ndarray]
    min_neg_axis_distance: np.ndarray
    coeffs: np.ndarray | None = None
    failures: list[tuple[float, str]] = field(default_factory=list)

    @property
    def well_posed_everywhere(self) -> bool:
        return not self.failures and bool(np.all(self.min_neg_axis_distance > 0.0))

    @property
    def all_real_parts_positive(self) -> bool:
        return all(np.all(vals.real > 0.0) for vals in self.eigenvalues)


def default_alpha_grid(n: int = 199) -> np.ndarray:
    return np.linspace(0.005, 1.0, n)


def sweep_spectrum(
    scheme: CollocationScheme,
    alpha_grid,
    with_coeffs: bool = False,
) -> SpectrumReport:
    """Eigenvalues of the solvability matrix for every order in the grid.

    A spectrum touching the closed negative real axis is recorded as a
    well-posedness failure; eigensolver breakdowns are recorded against the
    offending order instead of aborting the sweep.
    """
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    if np.any(alpha_grid <= 0.0) or np.any(alpha_grid > 1.0):
        raise ValueError("every grid order must lie in (0, 1]")
    eigs: list[np.ndarray] = []
    dists = np.empty(alpha_grid.size)
    coeff_rows = [] if (with_coeffs and scheme.theta[0] > 0.0) else None
    failures: list[tuple[float, str]] = []
    for i, alpha in enumerate(alpha_grid):
        try:
            vals = eigenvalues(wellposedness_matrix(scheme, float(alpha)))
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            failures.append((float(alpha), str(exc)))
            eigs.append(np.array([]))
            dists[i] = np.nan
            continue
        eigs.append(vals)
        dists[i] = neg_axis_distance(vals)
        if dists[i] == 0.0:
            failures.append((float(alpha), "spectrum touches the negative real axis"))
        if coeff_rows is not None:
            coeff_rows.append(characteristic_coeffs(scheme, float(alpha)))
    return SpectrumReport(
        scheme=scheme.describe(),
        alpha_grid=alpha_grid,
        eigenvalues=eigs,
        min_neg_axis_distance=dists,
        coeffs=np.array(coeff_rows) if coeff_rows else None,
        failures=failures,
    )
