"""Collocation point families, per-interval matrices, and piecewise-polynomial fields.

A scheme of degree m collocates at relative points 0 <= theta_0 < ... < theta_m <= 1
inside each time interval.  The fractional derivative of the computed solution
is represented per interval in the local monomial basis, so its fractional
integral has a closed form and the per-interval systems are built from a
Vandermonde matrix and two diagonal scalings.  Schemes with theta_0 = 0 carry
an additional reduced (m x m) set of matrices: the left endpoint value is known
there and gets eliminated.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .fracint import frac_coeffs

__all__ = [
    "MAX_DEGREE",
    "PointFamily",
    "CollocationScheme",
    "CollocMatrices",
    "TemporalMesh",
    "PiecewisePolyField",
    "make_points",
    "build_matrices",
    "eval_poly",
    "eval_poly_deriv",
    "check_laxmilgram_loworder",
]

# Monomial Vandermonde conditioning degrades quickly beyond this degree.
MAX_DEGREE = 12


class PointFamily(enum.Enum):
    EQUIDISTANT_INTERIOR = "equidistant-interior"
    EQUIDISTANT_WITH_ZERO = "equidistant-zero"
    GAUSS_LEGENDRE = "gauss-legendre"
    GAUSS_LOBATTO = "gauss-lobatto"
    RIGHT_ENDPOINT = "right-endpoint"
    CUSTOM = "custom"


def _legendre_val_der(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Legendre polynomial P_n and its derivative at interior points |x| < 1."""
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def _newton_nodes(x: np.ndarray, func) -> np.ndarray:
    for _ in range(100):
        val, der = func(x)
        dx = val / der
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # one polishing step past the convergence check
    val, der = func(x)
    return x - val / der


def _symmetrize_01(theta: np.ndarray) -> np.ndarray:
    # enforce theta_l + theta_{m-l} = 1 exactly
    return 0.5 * (theta + (1.0 - theta[::-1]))


def _gauss_legendre_01(n: int) -> np.ndarray:
    if n == 1:
        return np.array([0.5])
    k = np.arange(n)
    guess = np.cos(np.pi * (k + 0.75) / (n + 0.5))
    x = _newton_nodes(guess, lambda v: _legendre_val_der(n, v))
    theta = 0.5 * (np.sort(x) + 1.0)
    return _symmetrize_01(theta)


def _gauss_lobatto_01(n: int) -> np.ndarray:
    if n == 2:
        return np.array([0.0, 1.0])
    deg = n - 1  # interior nodes are the roots of P'_deg

    def dp_d2p(v):
        p, dp = _legendre_val_der(deg, v)
        d2p = (2.0 * v * dp - deg * (deg + 1) * p) / (1.0 - v * v)
        return dp, d2p

    guess = np.cos(np.pi * np.arange(1, deg) / deg)
    x = _newton_nodes(guess, dp_d2p)
    theta = 0.5 * (np.concatenate(([-1.0], np.sort(x), [1.0])) + 1.0)
    theta[0], theta[-1] = 0.0, 1.0
    return _symmetrize_01(theta)


def make_points(family: PointFamily, m: int) -> np.ndarray:
    """Relative collocation points in [0, 1] for a named family."""
    if m < 0:
        raise ValueError(f"degree must be >= 0, got {m!r}")
    if m > MAX_DEGREE:
        raise ValueError(f"degree {m} exceeds the supported maximum {MAX_DEGREE}")
    if family == PointFamily.EQUIDISTANT_INTERIOR:
        return (np.arange(m + 1) + 1.0) / (m + 2)
    if family == PointFamily.EQUIDISTANT_WITH_ZERO:
        return np.arange(m + 1) / (m + 1.0)
    if family == PointFamily.GAUSS_LEGENDRE:
        return _gauss_legendre_01(m + 1)
    if family == PointFamily.GAUSS_LOBATTO:
        if m == 0:
            raise ValueError("Gauss-Lobatto needs both endpoints, so m >= 1")
        return _gauss_lobatto_01(m + 1)
    if family == PointFamily.RIGHT_ENDPOINT:
        if m != 0:
            raise ValueError("the right-endpoint family is the m = 0 scheme")
        return np.array([1.0])
    raise ValueError(f"no canonical points for family {family!r}")


@dataclass(frozen=True)
class CollocationScheme:
    """Degree, relative points and family tag of one collocation scheme.

    ``continuous`` is true exactly when theta_0 = 0 and theta_m = 1, in which
    case the fractional derivative of the computed solution is continuous
    across breakpoints.
    """

    m: int
    theta: np.ndarray
    family: PointFamily
    continuous: bool

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if self.m < 0 or self.m > MAX_DEGREE:
            raise ValueError(f"degree {self.m} outside [0, {MAX_DEGREE}]")
        if theta.shape != (self.m + 1,):
            raise ValueError(f"expected {self.m + 1} points, got shape {theta.shape}")
        if theta[0] < 0.0 or theta[-1] > 1.0:
            raise ValueError(f"points must lie in [0, 1], got {theta!r}")
        if np.any(np.diff(theta) <= 0.0):
            raise ValueError(f"points must be strictly increasing, got {theta!r}")
        if self.family == PointFamily.RIGHT_ENDPOINT and (
            self.m != 0 or theta[0] != 1.0
        ):
            raise ValueError("right-endpoint family requires m = 0, theta = (1,)")
        if self.family == PointFamily.GAUSS_LOBATTO and (
            theta[0] != 0.0 or theta[-1] != 1.0
        ):
            raise ValueError("Gauss-Lobatto points must include both endpoints")
        if self.continuous != (theta[0] == 0.0 and theta[-1] == 1.0):
            raise ValueError("continuity flag inconsistent with the endpoints")

    @classmethod
    def from_family(cls, family: PointFamily, m: int) -> "CollocationScheme":
        theta = make_points(family, m)
        return cls(m, theta, family, bool(theta[0] == 0.0 and theta[-1] == 1.0))

    @classmethod
    def from_points(cls, theta) -> "CollocationScheme":
        theta = np.asarray(theta, dtype=float)
        return cls(
            theta.size - 1,
            theta,
            PointFamily.CUSTOM,
            bool(theta[0] == 0.0 and theta[-1] == 1.0),
        )

    @property
    def reduced(self) -> bool:
        """True when the left endpoint is a collocation point and gets eliminated."""
        return bool(self.theta[0] == 0.0)

    def describe(self) -> str:
        return f"{self.family.value} m={self.m}"


@dataclass(frozen=True)
class CollocMatrices:
    """Per-interval matrices of one scheme at a fixed fractional order.

    W is the Vandermonde matrix with rows (1, theta_l, ..., theta_l**m); D1 the
    diagonal of theta_l**alpha; D2 the diagonal of the monomial integration
    factors.  For reduced schemes (theta_0 = 0) the hatted m x m counterparts
    are carried as well, with D3_hat = diag(theta_1, ..., theta_m) absorbing
    the factored-out power.
    """

    W: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    reduced: bool
    W_hat: np.ndarray | None = None
    D1_hat: np.ndarray | None = None
    D2_hat: np.ndarray | None = None
    D3_hat: np.ndarray | None = None


def build_matrices(scheme: CollocationScheme, alpha: float) -> CollocMatrices:
    """Assemble the per-interval matrices of a scheme at order alpha."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"fractional order must lie in (0, 1], got {alpha!r}")
    theta = scheme.theta
    m = scheme.m
    W = np.vander(theta, m + 1, increasing=True)
    cj = frac_coeffs(m + 1, alpha)
    D1 = np.diag(theta**alpha)
    D2 = np.diag(cj)
    if not scheme.reduced or m == 0:
        return CollocMatrices(W, D1, D2, reduced=scheme.reduced)
    interior = theta[1:]
    return CollocMatrices(
        W,
        D1,
        D2,
        reduced=True,
        W_hat=np.vander(interior, m, increasing=True),
        D1_hat=np.diag(interior**alpha),
        D2_hat=np.diag(cj[1:]),
        D3_hat=np.diag(interior),
    )


def eval_poly(block: np.ndarray, sigma: float) -> np.ndarray:
    """Evaluate the block's monomial polynomials at sigma in [0, 1], per DOF."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma!r}")
    block = np.asarray(block, dtype=float)
    out = block[-1].copy()
    for row in block[-2::-1]:
        out = out * sigma + row
    return out


def eval_poly_deriv(block: np.ndarray, sigma: float) -> np.ndarray:
    """Derivative with respect to sigma of the block's polynomials."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma!r}")
    block = np.asarray(block, dtype=float)
    n = block.shape[0]
    if n == 1:
        return np.zeros_like(block[0])
    out = (n - 1) * block[-1].copy()
    for j in range(n - 2, 0, -1):
        out = out * sigma + j * block[j]
    return out


def eval_poly_many(block: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Evaluate at several sigma values at once; shape (len(sigmas), n_dofs)."""
    block = np.asarray(block, dtype=float)
    pows = np.vander(np.asarray(sigmas, dtype=float), block.shape[0], increasing=True)
    return pows @ block


def check_laxmilgram_loworder(scheme: CollocationScheme, alpha: float) -> bool | None:
    """Low-order coercivity check of the per-interval bilinear form.

    Covers the closed-form cases: m = 0 with theta_0 > 0 (always admissible),
    m = 1 with theta_0 > 0, and the reduced m = 2 case with theta_0 = 0, where
    admissibility reads theta_0/theta_1 <= 1/(1+alpha) (respectively
    theta_1/theta_2).  Returns None for combinations the check does not cover.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"fractional order must lie in (0, 1], got {alpha!r}")
    theta = scheme.theta
    if theta[0] > 0.0:
        if scheme.m == 0:
            return True
        if scheme.m == 1:
            return bool(theta[0] / theta[1] <= 1.0 / (1.0 + alpha))
        return None
    if scheme.m == 2:
        return bool(theta[1] / theta[2] <= 1.0 / (1.0 + alpha))
    return None


class TemporalMesh:
    """Ordered breakpoints 0 = t_0 < ... < t_M, grown one interval at a time.

    Interval k (1-based) spans the half-open range (t_{k-1}, t_k].
    """

    def __init__(self, t0: float = 0.0):
        self._breaks = [float(t0)]
        self._cache: np.ndarray | None = None

    def append(self, tau: float, t_end: float | None = None) -> None:
        """Add one interval of length tau; t_end pins the breakpoint exactly."""
        if tau <= 0.0:
            raise ValueError(f"interval length must be positive, got {tau!r}")
        new_t = self._breaks[-1] + tau if t_end is None else float(t_end)
        if new_t <= self._breaks[-1]:
            raise ValueError("breakpoints must increase")
        self._breaks.append(new_t)
        self._cache = None

    def pop(self) -> None:
        if len(self._breaks) == 1:
            raise ValueError("no interval to pop")
        self._breaks.pop()
        self._cache = None

    @property
    def breakpoints(self) -> np.ndarray:
        if self._cache is None:
            self._cache = np.array(self._breaks)
        return self._cache

    @property
    def num_intervals(self) -> int:
        return len(self._breaks) - 1

    @property
    def t_end(self) -> float:
        return self._breaks[-1]

    def t(self, k: int) -> float:
        return self._breaks[k]

    def tau(self, k: int) -> float:
        """Length of interval k (1-based)."""
        return self._breaks[k] - self._breaks[k - 1]

    def locate(self, t: float, right_limit: bool = False) -> int:
        """Containing interval index for t in (0, T]; breakpoints go left by default."""
        if not 0.0 <= t <= self.t_end:
            raise ValueError(f"t={t!r} outside [0, {self.t_end!r}]")
        side = "right" if right_limit else "left"
        k = int(np.searchsorted(self.breakpoints, t, side=side))
        return min(max(k, 1), self.num_intervals)


class PiecewisePolyField:
    """Per-interval monomial coefficient blocks, one column per spatial DOF.

    Block k-1 holds the (m+1) x n_dofs coefficients of the field on interval k
    in the local variable sigma = (t - t_{k-1}) / tau_k; evaluation never
    extrapolates outside [0, 1].
    """

    def __init__(self, mesh: TemporalMesh, m: int, n_dofs: int):
        self.mesh = mesh
        self.m = m
        self.n_dofs = n_dofs
        self.blocks: list[np.ndarray] = []

    def append_block(self, block: np.ndarray) -> None:
        block = np.asarray(block, dtype=float)
        if block.shape != (self.m + 1, self.n_dofs):
            raise ValueError(
                f"expected block shape {(self.m + 1, self.n_dofs)}, got {block.shape}"
            )
        self.blocks.append(block)

    def pop_block(self) -> None:
        if not self.blocks:
            raise ValueError("no block to pop")
        self.blocks.pop()

    def block(self, k: int) -> np.ndarray:
        """Coefficient block of interval k (1-based)."""
        return self.blocks[k - 1]

    def eval(self, k: int, sigma: float) -> np.ndarray:
        return eval_poly(self.block(k), sigma)
