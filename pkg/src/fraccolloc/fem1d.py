"""One-dimensional P1/P2 Lagrange finite elements with Dirichlet elimination.

Discretises -(a u')' + b u' + c u on an interval with homogeneous Dirichlet
conditions.  Quadratic exact data (the benchmark problems are quadratic in
space) is reproduced exactly by P2 interpolation, so the assembled system
introduces no spatial error there and everything measured is temporal.
"""

import math

import numpy as np
import scipy.linalg

__all__ = [
    "SpatialSystem",
    "assemble",
    "interpolate",
    "eval_field",
    "eval_Lu",
    "barrier_pair",
    "smallest_eigenvalue",
]


def _as_coefficient(value):
    """Normalise a coefficient to (callable, constant-or-None)."""
    if callable(value):
        return value, None
    const = float(value)
    return (lambda x: np.full_like(np.asarray(x, dtype=float), const)), const


def _shape_values(degree: int, xi: np.ndarray, deriv: int) -> np.ndarray:
    """Reference shape functions on [0, 1], nodes ordered left to right."""
    xi = np.asarray(xi, dtype=float)
    if degree == 1:
        table = {
            0: (1.0 - xi, xi),
            1: (-np.ones_like(xi), np.ones_like(xi)),
            2: (np.zeros_like(xi), np.zeros_like(xi)),
        }
        return np.stack(table[deriv], axis=-1)
    if degree == 2:
        if deriv == 0:
            vals = (2 * xi * xi - 3 * xi + 1, 4 * xi * (1 - xi), 2 * xi * xi - xi)
        elif deriv == 1:
            vals = (4 * xi - 3, 4 - 8 * xi, 4 * xi - 1)
        else:
            vals = (
                np.full_like(xi, 4.0),
                np.full_like(xi, -8.0),
                np.full_like(xi, 4.0),
            )
        return np.stack(vals, axis=-1)
    raise ValueError(f"degree must be 1 or 2, got {degree!r}")


class SpatialSystem:
    """Assembled 1-D system: mass/stiffness matrices and evaluation tables.

    Attributes of interest:
        mass, stiff      interior x interior matrices
        mass_load        interior x all-nodes mass pairing, for load vectors
                         of data that need not vanish on the boundary
        dof_coords       interior DOF coordinates
        all_coords       every nodal coordinate including the boundary
        sample_points    fixed spatial set used for max-norm evaluation
    """

    def __init__(self, breaks, degree, a, b, c, da, n_samples_per_cell=4):
        breaks = np.asarray(breaks, dtype=float)
        if breaks.size < 2 or np.any(np.diff(breaks) <= 0):
            raise ValueError("cell breakpoints must be strictly increasing")
        self.breaks = breaks
        self.degree = int(degree)
        if self.degree not in (1, 2):
            raise ValueError(f"degree must be 1 or 2, got {degree!r}")
        self.a_fn, self.a_const = _as_coefficient(a)
        self.b_fn, self.b_const = _as_coefficient(b)
        self.c_fn, self.c_const = _as_coefficient(c)
        if da is None:
            if self.a_const is None:
                raise ValueError(
                    "a variable diffusion coefficient needs its derivative da"
                )
            da = 0.0
        self.da_fn, self.da_const = _as_coefficient(da)

        n_cells = breaks.size - 1
        self.n_cells = n_cells
        n_nodes = degree * n_cells + 1
        coords = np.empty(n_nodes)
        for cell in range(n_cells):
            xl, xr = breaks[cell], breaks[cell + 1]
            local = np.linspace(0.0, 1.0, degree + 1)
            coords[degree * cell : degree * cell + degree + 1] = xl + (xr - xl) * local
        self.all_coords = coords
        self.interior = np.arange(1, n_nodes - 1)
        self.n_dofs = self.interior.size
        if self.n_dofs == 0:
            raise ValueError("degenerate discretisation: no interior DOFs")
        self.dof_coords = coords[self.interior]

        self._assemble_matrices()

        # fixed sample set: every node plus equispaced interior points per cell
        pts = [coords]
        for cell in range(n_cells):
            xl, xr = breaks[cell], breaks[cell + 1]
            frac = (np.arange(n_samples_per_cell) + 1.0) / (n_samples_per_cell + 1.0)
            pts.append(xl + (xr - xl) * frac)
        self.sample_points = np.unique(np.concatenate(pts))
        self._E0s = self.basis_matrix(self.sample_points, 0)

        # cellwise Gauss data for L2 norms of pointwise-evaluated fields
        qn, qw = np.polynomial.legendre.leggauss(6)
        qn = 0.5 * (qn + 1.0)
        xq, wq = [], []
        for cell in range(n_cells):
            xl, xr = breaks[cell], breaks[cell + 1]
            xq.append(xl + (xr - xl) * qn)
            wq.append(0.5 * (xr - xl) * qw)
        self.quad_points = np.concatenate(xq)
        self.quad_weights = np.concatenate(wq)
        self._EQ0 = self.basis_matrix(self.quad_points, 0)

    def _assemble_matrices(self) -> None:
        degree = self.degree
        n_nodes = self.all_coords.size
        mass = np.zeros((n_nodes, n_nodes))
        stiff = np.zeros((n_nodes, n_nodes))
        qn, qw = np.polynomial.legendre.leggauss(degree + 2)
        qn = 0.5 * (qn + 1.0)
        qw = 0.5 * qw
        shp0 = _shape_values(degree, qn, 0)
        shp1 = _shape_values(degree, qn, 1)
        for cell in range(self.n_cells):
            xl, xr = self.breaks[cell], self.breaks[cell + 1]
            h = xr - xl
            xg = xl + h * qn
            av, bv, cv = self.a_fn(xg), self.b_fn(xg), self.c_fn(xg)
            if np.any(av <= 0.0):
                bad = xg[np.argmin(av)]
                raise ValueError(f"diffusion coefficient not positive at x={bad!r}")
            wl = qw * h
            m_loc = (shp0 * wl[:, None]).T @ shp0
            s_loc = (shp1 * (wl * av)[:, None]).T @ shp1 / (h * h)
            s_loc += (shp0 * (wl * bv)[:, None]).T @ shp1 / h
            s_loc += (shp0 * (wl * cv)[:, None]).T @ shp0
            idx = degree * cell + np.arange(degree + 1)
            mass[np.ix_(idx, idx)] += m_loc
            stiff[np.ix_(idx, idx)] += s_loc
        keep = self.interior
        self.mass = mass[np.ix_(keep, keep)]
        self.stiff = stiff[np.ix_(keep, keep)]
        self.mass_load = mass[keep, :]

    def basis_matrix(self, x, deriv: int = 0) -> np.ndarray:
        """Values of every interior basis function (column) at points x (rows)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.min() < self.breaks[0] - 1e-12 or x.max() > self.breaks[-1] + 1e-12:
            raise ValueError("evaluation point outside the domain")
        cell = np.clip(
            np.searchsorted(self.breaks, x, side="right") - 1, 0, self.n_cells - 1
        )
        h = self.breaks[cell + 1] - self.breaks[cell]
        xi = (x - self.breaks[cell]) / h
        vals = _shape_values(self.degree, xi, deriv) / h[:, None] ** deriv
        full = np.zeros((x.size, self.all_coords.size))
        for loc in range(self.degree + 1):
            full[np.arange(x.size), self.degree * cell + loc] = vals[:, loc]
        return full[:, self.interior]

    def load(self, fn, t: float | None = None) -> np.ndarray:
        """Mass pairing of nodally interpolated data, boundary nodes included."""
        vals = fn(self.all_coords) if t is None else fn(self.all_coords, t)
        return self.mass_load @ vals

    def field_values(self, dof_rows: np.ndarray, where: str = "samples") -> np.ndarray:
        """Interpolant values of interior DOF rows at a fixed point set."""
        e0 = self._E0s if where == "samples" else self._EQ0
        return dof_rows @ e0.T

    @property
    def is_unit_laplacian(self) -> bool:
        """True for -u'' on the unit interval, the setting with a closed-form barrier."""
        return (
            self.a_const == 1.0
            and self.b_const == 0.0
            and self.c_const == 0.0
            and self.breaks[0] == 0.0
            and self.breaks[-1] == 1.0
        )


def assemble(
    domain,
    cells,
    degree: int,
    a=1.0,
    b=0.0,
    c=0.0,
    da=None,
    n_samples_per_cell: int = 4,
) -> SpatialSystem:
    """Assemble the Dirichlet-eliminated system on (domain[0], domain[1]).

    ``cells`` is either a cell count (uniform mesh) or an explicit array of
    cell breakpoints; element integrals use a Gauss rule exact beyond twice
    the polynomial degree.
    """
    if np.isscalar(cells):
        n = int(cells)
        if n < 1:
            raise ValueError(f"need at least one cell, got {cells!r}")
        breaks = np.linspace(domain[0], domain[1], n + 1)
    else:
        breaks = np.asarray(cells, dtype=float)
    return SpatialSystem(breaks, degree, a, b, c, da, n_samples_per_cell)


def interpolate(system: SpatialSystem, fn, t: float | None = None) -> np.ndarray:
    """Interior DOF vector of the nodal interpolant of fn (fn(x) or fn(x, t))."""
    if t is None:
        return np.asarray(fn(system.dof_coords), dtype=float)
    return np.asarray(fn(system.dof_coords, t), dtype=float)


def eval_field(system: SpatialSystem, dof_vector: np.ndarray, x):
    """Finite element interpolant at x (scalar or array)."""
    vals = system.basis_matrix(x, 0) @ np.asarray(dof_vector, dtype=float)
    return float(vals[0]) if np.isscalar(x) else vals


def eval_Lu(system: SpatialSystem, dof_vector: np.ndarray, x):
    """Pointwise elliptic operator applied to the interpolant at x.

    Uses the elementwise polynomial: the second derivative is constant per
    cell for P2 and zero for P1.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    dofs = np.asarray(dof_vector, dtype=float)
    u0 = system.basis_matrix(x_arr, 0) @ dofs
    u1 = system.basis_matrix(x_arr, 1) @ dofs
    u2 = system.basis_matrix(x_arr, 2) @ dofs
    av = system.a_fn(x_arr)
    dav = system.da_fn(x_arr)
    bv = system.b_fn(x_arr)
    cv = system.c_fn(x_arr)
    vals = -(av * u2 + dav * u1) + bv * u1 + cv * u0
    return float(vals[0]) if np.isscalar(x) else vals


def smallest_eigenvalue(system: SpatialSystem) -> float:
    """Smallest eigenvalue of the symmetrised stiffness against the mass matrix."""
    sym = 0.5 * (system.stiff + system.stiff.T)
    vals = scipy.linalg.eigh(
        sym, system.mass, eigvals_only=True, subset_by_index=[0, 0]
    )
    return float(vals[0])


def barrier_pair(
    system: SpatialSystem,
    lam: float | None = None,
    omega: float | None = None,
    g=None,
    norm_p: str = "linf",
) -> tuple[float, float]:
    """Admissible (lambda, omega) pair for the residual barriers.

    For the max norm on -u'' over (0, 1) the closed-form comparison function
    1 + (lambda/2) x (1-x) gives (pi**2, pi**2/8).  For the L2 norm the
    coercivity constant (smallest generalized eigenvalue) with omega = 0 is
    returned.  General max-norm operators must supply (lam, omega, g)
    explicitly; the pair is then verified at the spatial sample points through
    the interpolant of g.
    """
    norm_p = norm_p.lower()
    if norm_p in ("l2", "2"):
        return smallest_eigenvalue(system), 0.0
    if norm_p not in ("linf", "inf"):
        raise ValueError(f"norm_p must be 'linf' or 'l2', got {norm_p!r}")
    if lam is None:
        if system.is_unit_laplacian:
            lam = math.pi**2
            return lam, lam / 8.0
        raise ValueError(
            "no closed-form barrier pair for this operator; supply (lam, omega, g)"
        )
    if omega is None or g is None:
        raise ValueError("a user-supplied barrier pair needs lam, omega and g")
    g_nodes = np.asarray(g(system.all_coords), dtype=float)
    x = system.sample_points
    full0 = _full_basis(system, x, 0)
    full1 = _full_basis(system, x, 1)
    full2 = _full_basis(system, x, 2)
    gv = full0 @ g_nodes
    lg = (
        -(system.a_fn(x) * (full2 @ g_nodes) + system.da_fn(x) * (full1 @ g_nodes))
        + system.b_fn(x) * (full1 @ g_nodes)
        + system.c_fn(x) * gv
    )
    tol = 1e-10 * max(1.0, abs(lam))
    bad = np.nonzero(lg < lam - tol)[0]
    if bad.size:
        raise ValueError(
            f"L g >= lambda fails at x={x[bad[0]]!r}: {lg[bad[0]]!r} < {lam!r}"
        )
    bad = np.nonzero((gv < 1.0 - 1e-12) | (gv > 1.0 + omega + 1e-12))[0]
    if bad.size:
        raise ValueError(
            f"1 <= g <= 1+omega fails at x={x[bad[0]]!r}: g={gv[bad[0]]!r}"
        )
    return float(lam), float(omega)


def _full_basis(system: SpatialSystem, x, deriv: int) -> np.ndarray:
    """Basis matrix over ALL nodes (boundary included), for non-vanishing data."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cell = np.clip(
        np.searchsorted(system.breaks, x, side="right") - 1, 0, system.n_cells - 1
    )
    h = system.breaks[cell + 1] - system.breaks[cell]
    xi = (x - system.breaks[cell]) / h
    vals = _shape_values(system.degree, xi, deriv) / h[:, None] ** deriv
    full = np.zeros((x.size, system.all_coords.size))
    for loc in range(system.degree + 1):
        full[np.arange(x.size), system.degree * cell + loc] = vals[:, loc]
    return full
