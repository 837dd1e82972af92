"""Collocation-in-time solvers for subdiffusion equations.

The computed solution's fractional derivative is piecewise-polynomial in
time; per-interval block collocation solves, residual a-posteriori barriers
and an adaptive step controller certify a pointwise-in-time error below a
prescribed tolerance.  A spectral analyzer checks unique solvability of the
per-interval systems for arbitrary point sets.
"""

from .colloc import (
    MAX_DEGREE,
    CollocationScheme,
    CollocMatrices,
    PiecewisePolyField,
    PointFamily,
    TemporalMesh,
    build_matrices,
    check_laxmilgram_loworder,
    eval_poly,
    eval_poly_deriv,
    make_points,
)
from .fem1d import (
    SpatialSystem,
    assemble,
    barrier_pair,
    eval_field,
    eval_Lu,
    interpolate,
    smallest_eigenvalue,
)
from .fracint import (
    HistoryEvaluator,
    HistoryKernel,
    caputo_monomial,
    frac_coeffs,
    frac_int_eval,
    frac_int_history,
    frac_int_monomial,
    gamma_fn,
    stable_pow_diff,
)
from .problems import (
    ConvergenceStudy,
    RunRecord,
    TestProblem,
    convergence_study,
    default_barrier,
    default_system,
    measure_error,
    problem_ex1,
    problem_ex2,
    run_adaptive,
)
from .solver import (
    AdaptiveStepError,
    BarrierSpec,
    CollocationSolveError,
    IntervalLog,
    RunLog,
    SolverState,
    StepControls,
    adapt_run,
    barrier_value,
    initial_w,
    l0_first_interval,
    residual_norm,
    solve_interval,
)
from .wellposed import (
    SpectrumReport,
    characteristic_coeffs,
    default_alpha_grid,
    eigenvalues,
    generalized_vandermonde_det,
    sweep_spectrum,
    wellposedness_matrix,
)

__version__ = "0.1.0"
