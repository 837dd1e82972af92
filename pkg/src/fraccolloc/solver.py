"""Per-interval collocation solves, residual barriers, and adaptive time stepping.

The unknown per interval is the coefficient block of the auxiliary field
w = (d/dt)^alpha u in the local monomial basis; the solution itself is
reconstructed as u = u0 + J^alpha w, which keeps it continuous across
breakpoints by construction.  Each interval couples every past interval
through the fractional integral; the per-interval residual of the computed
solution vanishes at the collocation points, and keeping the residual under a
barrier profile at sample points between them certifies a pointwise-in-time
error bound for the whole run.
"""

import time
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.special

from .colloc import (
    CollocationScheme,
    PiecewisePolyField,
    TemporalMesh,
    build_matrices,
)
from .fem1d import SpatialSystem, interpolate
from .fracint import HistoryEvaluator, frac_coeffs, gamma_fn, stable_pow_diff

__all__ = [
    "BarrierSpec",
    "StepControls",
    "IntervalLog",
    "RunLog",
    "SolverState",
    "CollocationSolveError",
    "AdaptiveStepError",
    "solve_interval",
    "initial_w",
    "residual_norm",
    "barrier_value",
    "adapt_run",
    "l0_first_interval",
]


class CollocationSolveError(RuntimeError):
    """A per-interval linear system could not be solved."""


class AdaptiveStepError(RuntimeError):
    """The step controller exhausted its rejection budget."""


@dataclass
class BarrierSpec:
    """Residual barrier profile certifying a pointwise-in-time error bound.

    kind "r0" bounds the error by ``tol`` uniformly in time; kind "r1" bounds
    it by ``tol * t**(alpha-1)`` and needs the free parameter ``tau_param`` in
    (0, t_1] (resolved lazily by the adaptive driver when left None).  The
    max-norm route admits omega > 0 from a comparison function; the L2 route
    always uses omega = 0.
    """

    tol: float
    lam: float
    alpha: float
    kind: str = "r0"
    omega: float = 0.0
    tau_param: float | None = None
    norm_p: str = "linf"

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tol!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"barrier profiles need alpha in (0, 1), got {self.alpha!r}")
        if self.kind not in ("r0", "r1"):
            raise ValueError(f"barrier kind must be 'r0' or 'r1', got {self.kind!r}")
        norm = self.norm_p.lower()
        if norm in ("inf", "linf"):
            norm = "linf"
        elif norm in ("2", "l2"):
            norm = "l2"
        else:
            raise ValueError(f"norm_p must be 'linf' or 'l2', got {self.norm_p!r}")
        self.norm_p = norm
        if self.omega < 0.0:
            raise ValueError(f"omega must be >= 0, got {self.omega!r}")
        if norm == "l2" and self.omega != 0.0:
            raise ValueError("the L2 route requires omega = 0")
        if self.tau_param is not None and self.tau_param <= 0.0:
            raise ValueError(f"tau_param must be positive, got {self.tau_param!r}")


def barrier_value(spec: BarrierSpec, t: float) -> float:
    """Admissible residual magnitude at time t: tol * profile(t) / (1 + omega)."""
    if t <= 0.0:
        raise ValueError(f"barrier profiles are defined for t > 0, got {t!r}")
    alpha = spec.alpha
    rg = 1.0 / gamma_fn(1.0 - alpha)
    if spec.kind == "r0":
        profile = t ** (-alpha) * rg + spec.lam
    else:
        tp = spec.tau_param
        if tp is None:
            raise ValueError("tau_param is unresolved; set it or run adaptively")
        if t <= tp:
            bracket = t ** (1.0 - alpha)
        else:
            bracket = tp ** (1.0 - alpha) * stable_pow_diff(t / tp, 1.0 - alpha)
        profile = bracket * rg / (t * tp ** (1.0 - alpha))
        profile += spec.lam * max(tp, t) ** (alpha - 1.0)
    return spec.tol * profile / (1.0 + spec.omega)


@dataclass
class StepControls:
    """Adaptive step controller constants.

    ``tau_init`` of None resolves to T/1024.  Each candidate interval is
    re-solved with the length shrunk by ``shrink`` until the residual stays
    under the barrier at all sample points; accepted lengths grow by at most
    ``growth`` from one interval to the next (clipped at the final time).
    Residuals are sampled at ``samples`` midpoint-offsets per interval plus
    the right endpoint, deliberately avoiding the collocation points where
    they vanish identically.
    """

    tau_init: float | None = None
    growth: float = 2.0
    shrink: float = 0.5
    max_rejections: int = 60
    samples: int = 16
    max_intervals: int = 50_000
    l0_first_interval: bool = False
    quad_order: int | None = None

    def __post_init__(self):
        if self.growth < 1.0:
            raise ValueError(f"growth factor must be >= 1, got {self.growth!r}")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError(f"shrink factor must be in (0, 1), got {self.shrink!r}")
        if self.samples < 1:
            raise ValueError(f"need at least one sample point, got {self.samples!r}")
        if self.max_intervals < 1:
            raise ValueError(f"need a positive interval budget, got {self.max_intervals!r}")


@dataclass
class IntervalLog:
    tau: float
    rejections: int
    max_ratio: float


@dataclass
class RunLog:
    intervals: list[IntervalLog]
    wall_time: float

    @property
    def num_intervals(self) -> int:
        return len(self.intervals)

    @property
    def total_rejections(self) -> int:
        return sum(entry.rejections for entry in self.intervals)


class SolverState:
    """Everything one run owns: scheme, spatial system, mesh, field, history.

    The mesh and coefficient field grow one interval at a time;
    ``push_interval``/``pop_interval`` keep them and the history evaluator in
    lockstep so a rejected candidate leaves no trace.
    """

    def __init__(
        self,
        scheme: CollocationScheme,
        system: SpatialSystem,
        alpha: float,
        u0,
        f,
        quad_order: int | None = None,
    ):
        if scheme.reduced and scheme.m == 0:
            raise ValueError("theta_0 = 0 with m = 0 leaves nothing to solve for")
        self.scheme = scheme
        self.system = system
        self.alpha = float(alpha)
        self.matrices = build_matrices(scheme, self.alpha)
        self.f = f
        self.u0_dofs = (
            np.asarray(u0, dtype=float) if not callable(u0) else interpolate(system, u0)
        )
        if self.u0_dofs.shape != (system.n_dofs,):
            raise ValueError(
                f"initial data has {self.u0_dofs.shape}, expected ({system.n_dofs},)"
            )
        self.mesh = TemporalMesh()
        self.w_field = PiecewisePolyField(self.mesh, scheme.m, system.n_dofs)
        self.history = HistoryEvaluator(
            self.alpha, system.n_dofs, scheme.m, quad_order=quad_order
        )
        self._cj = frac_coeffs(scheme.m + 1, self.alpha)
        self._stiff_u0 = system.stiff @ self.u0_dofs
        # discrete elliptic operator and mass factorisation, for residuals
        self._mass_chol = scipy.linalg.cho_factor(system.mass)
        self._lh = scipy.linalg.cho_solve(self._mass_chol, system.stiff)
        mats = self.matrices
        if scheme.reduced:
            self._K1 = np.kron(mats.W_hat, system.mass)
            self._K2 = np.kron(mats.D1_hat @ mats.W_hat @ mats.D2_hat, system.stiff)
        else:
            self._K1 = np.kron(mats.W, system.mass)
            self._K2 = np.kron(mats.D1 @ mats.W @ mats.D2, system.stiff)
        self._initial_w_cache: dict[int, np.ndarray] = {}
        # first-interval constant-state representation, when enabled
        self.l0_gamma0: np.ndarray | None = None
        self.l0_t1: float | None = None

    @property
    def n_intervals(self) -> int:
        return self.mesh.num_intervals

    # -- bookkeeping -------------------------------------------------------

    def push_interval(
        self, tau: float, block: np.ndarray, t_end: float | None = None
    ) -> None:
        t_start = self.mesh.t_end
        self.mesh.append(tau, t_end=t_end)
        self.w_field.append_block(block)
        self.history.push(
            t_start, self.mesh.t_end - t_start, block, t_end=self.mesh.t_end
        )

    def pop_interval(self) -> None:
        self.mesh.pop()
        self.w_field.pop_block()
        self.history.pop()
        self._initial_w_cache.pop(self.n_intervals + 1, None)

    def _l0_active(self, k: int) -> bool:
        return self.l0_gamma0 is not None and k == 1

    # -- shared evaluations -------------------------------------------------

    def load_rows(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        x = self.system.all_coords
        return np.stack([self.system.mass_load @ self.f(x, t) for t in times])

    def f_dof_rows(self, times) -> np.ndarray:
        """DOF rows of the mass projection of the forcing, matching the solve's data."""
        loads = self.load_rows(times)
        return scipy.linalg.cho_solve(self._mass_chol, loads.T).T

    def history_at(self, times, upto: int) -> np.ndarray:
        """Elapsed-interval part of J^alpha w at each time; intervals 1..upto."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        shift = 1 if self.l0_gamma0 is not None else 0
        out = self.history.contributions(times, upto=max(upto - shift, 0))
        if shift and upto >= 1:
            x = np.minimum(1.0, self.l0_t1 / times)
            frac = scipy.special.betainc(1.0 - self.alpha, self.alpha, x)
            out += (gamma_fn(1.0 - self.alpha) * frac)[:, None] * self.l0_gamma0
        return out

    def w_rows(self, k: int, sigmas) -> np.ndarray:
        """Field values on interval k at local offsets; shape (len(sigmas), n_dofs)."""
        sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
        if self._l0_active(k):
            t = self.mesh.t(0) + sigmas * self.mesh.tau(1)
            return t[:, None] ** (-self.alpha) * self.l0_gamma0
        pows = np.vander(sigmas, self.scheme.m + 1, increasing=True)
        return pows @ self.w_field.block(k)

    def u_dof_rows(self, k: int, sigmas) -> np.ndarray:
        """Solution DOF vectors at local offsets of interval k."""
        sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
        tau = self.mesh.tau(k)
        t = self.mesh.t(k - 1) + sigmas * tau
        if self._l0_active(k):
            const = self.u0_dofs + gamma_fn(1.0 - self.alpha) * self.l0_gamma0
            return np.broadcast_to(const, (sigmas.size, const.size)).copy()
        jterm = np.zeros((sigmas.size, self.system.n_dofs))
        positive = sigmas > 0.0
        if positive.any():
            sp = sigmas[positive]
            local = sp[:, None] ** (np.arange(self.scheme.m + 1) + self.alpha)
            jterm[positive] = tau**self.alpha * (
                (local * self._cj) @ self.w_field.block(k)
            )
        return self.u0_dofs + self.history_at(t, upto=k - 1) + jterm

    def u_at(self, t: float) -> np.ndarray:
        """Solution DOF vector at any represented time (left limits at breakpoints)."""
        if t == 0.0:
            return self.u0_dofs.copy()
        k = self.mesh.locate(t)
        sigma = (t - self.mesh.t(k - 1)) / self.mesh.tau(k)
        return self.u_dof_rows(k, np.array([sigma]))[0]

    def residual_dof_rows(self, k: int, sigmas) -> np.ndarray:
        """DOF rows of the discrete residual on interval k at local offsets.

        The residual is measured through the discrete elliptic operator and
        the mass projection of the forcing, i.e. against the very problem the
        per-interval solves discretise, so it vanishes at the collocation
        points to solver precision and everything it certifies is temporal.
        The spatial discretisation is assumed to resolve the data (the stock
        problems are quadratic in space, which quadratic elements reproduce
        exactly).
        """
        sigmas = np.atleast_1d(np.asarray(sigmas, dtype=float))
        tau = self.mesh.tau(k)
        t = self.mesh.t(k - 1) + sigmas * tau
        w = self.w_rows(k, sigmas)
        u = self.u_dof_rows(k, sigmas)
        return w + u @ self._lh.T - self.f_dof_rows(t)

    def residual_norms(self, k: int, sigmas, norm_p: str = "linf") -> np.ndarray:
        rows = self.residual_dof_rows(k, sigmas)
        if norm_p == "linf":
            return np.abs(self.system.field_values(rows, "samples")).max(axis=1)
        vals = self.system.field_values(rows, "quad")
        return np.sqrt((vals**2) @ self.system.quad_weights)


def initial_w(state: SolverState, k: int) -> np.ndarray:
    """Known left-endpoint value of the field on interval k for theta_0 = 0 schemes.

    Solves the mass system whose right side pairs the forcing at t_{k-1}
    against the operator applied to the current solution there; for k = 1 this
    is the compatibility value determined by the initial data alone.
    """
    if not state.scheme.reduced:
        raise ValueError("the left-endpoint value is only pinned when theta_0 = 0")
    cached = state._initial_w_cache.get(k)
    if cached is not None:
        return cached
    t_prev = state.mesh.t(k - 1)
    hist = state.history_at(np.array([t_prev]), upto=k - 1)[0]
    rhs = state.load_rows([t_prev])[0] - state.system.stiff @ (state.u0_dofs + hist)
    w0 = scipy.linalg.cho_solve(state._mass_chol, rhs)
    state._initial_w_cache[k] = w0
    return w0


def solve_interval(state: SolverState, tau: float) -> np.ndarray:
    """Coefficient block of the next interval for a candidate length tau.

    Assembles and solves the dense block system coupling all collocation
    points of the interval; nothing is committed to the state.  For reduced
    schemes the known left value is pinned and the eliminated system in the
    remaining m coefficient rows is solved instead.
    """
    if tau <= 0.0:
        raise ValueError(f"interval length must be positive, got {tau!r}")
    scheme = state.scheme
    system = state.system
    alpha = state.alpha
    k = state.n_intervals + 1
    t_prev = state.mesh.t_end
    theta = scheme.theta
    t_col = t_prev + tau * theta
    ta = tau**alpha

    if scheme.reduced:
        w0 = initial_w(state, k)
        hist = state.history_at(t_col[1:], upto=k - 1)
        rhs = state.load_rows(t_col[1:])
        rhs -= state._stiff_u0
        rhs -= hist @ system.stiff.T
        rhs -= system.mass @ w0
        c0 = state._cj[0]
        rhs -= (ta * c0) * theta[1:, None] ** alpha * (system.stiff @ w0)
        rhs /= theta[1:, None]
        matrix = state._K1 + ta * state._K2
        try:
            flat = np.linalg.solve(matrix, rhs.ravel())
        except np.linalg.LinAlgError as exc:
            raise CollocationSolveError(
                f"singular interval system (cond={np.linalg.cond(matrix):.3e})"
            ) from exc
        return np.vstack([w0, flat.reshape(scheme.m, system.n_dofs)])

    hist = state.history_at(t_col, upto=k - 1)
    rhs = state.load_rows(t_col)
    rhs -= state._stiff_u0
    rhs -= hist @ system.stiff.T
    matrix = state._K1 + ta * state._K2
    try:
        flat = np.linalg.solve(matrix, rhs.ravel())
    except np.linalg.LinAlgError as exc:
        raise CollocationSolveError(
            f"singular interval system (cond={np.linalg.cond(matrix):.3e})"
        ) from exc
    return flat.reshape(scheme.m + 1, system.n_dofs)


def l0_first_interval(state: SolverState, tau1: float) -> np.ndarray:
    """Solve the piecewise-constant first interval and commit it to the state.

    The solution is held constant on (0, t_1], so its fractional derivative is
    proportional to t**(-alpha); that non-polynomial first-interval field is
    stored specially and integrated in closed form by later intervals.
    Intended for initial data too rough for the operator to act on pointwise.
    """
    if state.n_intervals != 0:
        raise ValueError("the constant first interval must come first")
    if tau1 <= 0.0:
        raise ValueError(f"interval length must be positive, got {tau1!r}")
    alpha = state.alpha
    system = state.system
    scale = tau1 ** (-alpha) / gamma_fn(1.0 - alpha)
    matrix = scale * system.mass + system.stiff
    rhs = scale * (system.mass @ state.u0_dofs) + state.load_rows([tau1])[0]
    try:
        u1 = np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as exc:
        raise CollocationSolveError(
            f"singular first-interval system (cond={np.linalg.cond(matrix):.3e})"
        ) from exc
    state.mesh.append(tau1)
    state.w_field.append_block(np.zeros((state.scheme.m + 1, system.n_dofs)))
    state.l0_gamma0 = (u1 - state.u0_dofs) / gamma_fn(1.0 - alpha)
    state.l0_t1 = tau1
    return u1


def _pop_l0(state: SolverState) -> None:
    state.mesh.pop()
    state.w_field.pop_block()
    state.l0_gamma0 = None
    state.l0_t1 = None


def residual_norm(state: SolverState, t: float, norm_p: str = "linf") -> float:
    """Spatial norm of the pointwise residual at time t.

    At interior breakpoints the right-limit field is used; the final time
    necessarily takes the left limit.  The max norm evaluates the fixed
    spatial sample set, the L2 norm integrates cellwise.
    """
    if not 0.0 < t <= state.mesh.t_end:
        raise ValueError(f"t={t!r} outside the represented mesh")
    norm = norm_p.lower()
    norm = {"inf": "linf", "2": "l2"}.get(norm, norm)
    if norm not in ("linf", "l2"):
        raise ValueError(f"norm_p must be 'linf' or 'l2', got {norm_p!r}")
    k = state.mesh.locate(t, right_limit=True)
    sigma = (t - state.mesh.t(k - 1)) / state.mesh.tau(k)
    return float(state.residual_norms(k, np.array([sigma]), norm)[0])


def _sample_offsets(controls: StepControls) -> np.ndarray:
    mids = (np.arange(controls.samples) + 0.5) / controls.samples
    return np.append(mids, 1.0)


def adapt_run(
    problem,
    scheme: CollocationScheme,
    barrier: BarrierSpec,
    controls: StepControls | None = None,
    system: SpatialSystem | None = None,
) -> tuple[TemporalMesh, SolverState, RunLog]:
    """Adaptive run to the final time with residuals certified below the barrier.

    Each candidate interval is solved tentatively and its residual norm is
    sampled between the collocation points; the candidate shrinks until every
    sample sits below the barrier profile, then the next candidate grows by
    the controller's factor (clipped so the mesh lands on the final time
    exactly).  Exceeding the rejection or interval budget aborts with
    diagnostics.

    ``problem`` supplies alpha, T, the initial data and the forcing; a default
    spatial discretisation is assembled from it when none is given.

    Schemes with theta_0 = 0 but theta_m < 1 are accepted with a warning: the
    trailing part of each interval extrapolates beyond the last collocation
    point, and the extrapolated residual of stiff spatial modes grows without
    bound in tau**alpha times the largest operator eigenvalue, so the barrier
    caps the step size at a level set by the spatial grid and the run may
    creep into the interval budget.
    """
    from .problems import default_system  # local import to keep layering one-way

    controls = controls or StepControls()
    if scheme.reduced and not scheme.continuous:
        warnings.warn(
            "left-endpoint schemes without the right endpoint are stiffness-"
            "limited under barrier control; expect very small steps",
            RuntimeWarning,
            stacklevel=2,
        )
    if system is None:
        system = default_system(problem)
    state = SolverState(
        scheme,
        system,
        problem.alpha,
        problem.u0,
        problem.f,
        quad_order=controls.quad_order,
    )
    horizon = float(problem.T)
    if barrier.alpha != state.alpha:
        raise ValueError("barrier and problem disagree on the fractional order")

    offsets = _sample_offsets(controls)
    tau = controls.tau_init if controls.tau_init is not None else horizon / 1024.0
    tau = min(tau, horizon)
    logs: list[IntervalLog] = []
    resolved_tau_param = barrier.tau_param
    started = time.perf_counter()

    first = True
    while state.mesh.t_end < horizon:
        if state.n_intervals >= controls.max_intervals:
            raise AdaptiveStepError(
                f"interval budget {controls.max_intervals} exhausted at "
                f"t={state.mesh.t_end!r} (last tau={state.mesh.tau(state.n_intervals)!r}); "
                "the barrier may be capping the step size"
            )
        t_prev = state.mesh.t_end
        rejections = 0
        while True:
            remaining = horizon - t_prev
            if tau >= remaining * (1.0 - 1e-12):
                tau_k, t_end = remaining, horizon
            else:
                tau_k, t_end = tau, None
            use_l0 = first and controls.l0_first_interval
            if use_l0:
                l0_first_interval(state, tau_k)
                if t_end is not None:
                    state.mesh.pop()
                    state.mesh.append(tau_k, t_end=t_end)
            else:
                block = solve_interval(state, tau_k)
                state.push_interval(tau_k, block, t_end=t_end)

            times = t_prev + offsets * tau_k
            times[-1] = state.mesh.t_end
            spec = barrier
            if spec.kind == "r1":
                spec = replace(
                    barrier, tau_param=resolved_tau_param or state.mesh.t(1)
                )
            norms = state.residual_norms(
                state.n_intervals, offsets, norm_p=barrier.norm_p
            )
            bars = np.array([barrier_value(spec, t) for t in times])
            ratio = float((norms / bars).max())
            if ratio <= 1.0:
                break
            if use_l0:
                _pop_l0(state)
            else:
                state.pop_interval()
            rejections += 1
            if rejections > controls.max_rejections:
                raise AdaptiveStepError(
                    f"interval {state.n_intervals + 1} at t={t_prev!r} rejected "
                    f"{rejections} times (last tau={tau_k!r}, ratio={ratio:.3e})"
                )
            tau = tau_k * controls.shrink
        accepted_tau = state.mesh.tau(state.n_intervals)
        logs.append(IntervalLog(tau=accepted_tau, rejections=rejections, max_ratio=ratio))
        if first:
            resolved_tau_param = resolved_tau_param or state.mesh.t(1)
            first = False
        tau = controls.growth * accepted_tau
    return state.mesh, state, RunLog(logs, time.perf_counter() - started)
