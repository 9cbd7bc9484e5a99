"""Solvers and diagnostics for square nonlinear systems f(x) = 0 whose
Jacobian may be singular at the root: depth-1 Anderson-accelerated Newton
with gamma-safeguarding, comparator methods, benchmark problems, and a
benchmark harness."""

from .core import (
    IterationRecord,
    NonlinearProblem,
    SolveOutcome,
    SolverConfig,
    validate_problem,
)
from .diagnostics import (
    DiagnosticsReport,
    ErrorSplit,
    NuRatio,
    PairKind,
    PairLabel,
    classify_pair,
    compatibility_monitor,
    diagnose_run,
    estimate_rate,
    estimate_root_order,
    nu_ratio,
    split_error,
    theta_gain,
)
from .linalg import (
    DegenerateSteps,
    DenseJacobian,
    JacobianMatrix,
    OperatorJacobian,
    SingularMatrix,
    UpperTriangularPlusJacobian,
    lstsq_gamma,
    lu_solve,
    structured_solve,
)
from .problems import (
    HEquationSpec,
    MultipolySpec,
    ProblemUnavailable,
    REGISTRY_NAMES,
    fd_jacobian_check,
    h_equation,
    multipoly,
    registry,
    registry_entry,
    with_ground_truth,
)
from .solvers import (
    LineSearchExhausted,
    MethodId,
    SafeguardDecision,
    anderson_combine,
    armijo_search,
    gamma_safeguard,
    newton_anderson_solve,
    newton_solve,
    newton_step,
    projected_lm_solve,
    solve,
)
from .harness import (
    ExperimentSpec,
    RunReport,
    compare_table,
    emit_report,
    run_experiment,
    run_registry,
    write_summary,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
