"""Oscillating-square laboratory: FEM on rapidly perturbed unit squares.

The package discretizes a semilinear parabolic problem on a family of
highly oscillatory perturbations of the unit square, pulled back to the
fixed square in the adapted metric, and ships the convergence studies
that compare each perturbed problem against its homogenized limit.

Layering, bottom up: ``geometry`` (the perturbation family and its
Jacobians), ``mesh`` (structured bilinear elements and oscillation-
resolving quadrature), ``linalg`` (deterministic sparse solvers),
``assembly`` (adapted forms), ``semiflow`` (problem configuration and
time stepping), ``equilibria`` (Newton, spectra, continuation),
``experiments`` (the parameter sweeps), ``report``/``cli`` (rendering
and the console entry point).
"""

from .equilibria import (
    EquilibriumRecord,
    assemble_linearization,
    continue_in_epsilon,
    enumerate_equilibria,
    newton_equilibria,
    robin_first_eigenvalue,
)
from .errors import (
    BlowupDetected,
    ConfigInvalid,
    NewtonDiverged,
    NotConverged,
    OscSquareError,
)
from .experiments import (
    StudyReport,
    attractor_semidistance_study,
    boundary_average_study,
    default_initial_conditions,
    eigenvalue_convergence_study,
    equilibria_branch_study,
    evolution_study,
    resolvent_convergence_study,
    strictly_decreasing,
    wrong_limit_study,
)
from .geometry import DiffeoFamily, boundary_average_limit
from .linalg import SparseOperator, cg_solve, minres_solve, pencil_smallest
from .mesh import QuadratureRule, StructuredMesh, build_mesh, oscillation_resolving_rule
from .report import render_report, write_summary_json
from .semiflow import (
    CubicSaturated,
    Operators,
    ProblemSpec,
    ScaledTanh,
    Tolerances,
    Trajectory,
    Zero,
    build_operators,
    default_problem_spec,
    evolve,
    h1_norm,
    l2_norm,
    lyapunov_value,
    trivial_problem_spec,
)
from .cli import RunConfig, load_run_config, main, run

__version__ = "0.1.0"

__all__ = [
    "BlowupDetected",
    "ConfigInvalid",
    "CubicSaturated",
    "DiffeoFamily",
    "EquilibriumRecord",
    "NewtonDiverged",
    "NotConverged",
    "Operators",
    "OscSquareError",
    "ProblemSpec",
    "QuadratureRule",
    "RunConfig",
    "ScaledTanh",
    "SparseOperator",
    "StructuredMesh",
    "StudyReport",
    "Tolerances",
    "Trajectory",
    "Zero",
    "assemble_linearization",
    "attractor_semidistance_study",
    "boundary_average_limit",
    "boundary_average_study",
    "build_mesh",
    "build_operators",
    "cg_solve",
    "continue_in_epsilon",
    "default_initial_conditions",
    "default_problem_spec",
    "eigenvalue_convergence_study",
    "enumerate_equilibria",
    "equilibria_branch_study",
    "evolution_study",
    "evolve",
    "h1_norm",
    "l2_norm",
    "load_run_config",
    "lyapunov_value",
    "main",
    "minres_solve",
    "newton_equilibria",
    "oscillation_resolving_rule",
    "pencil_smallest",
    "render_report",
    "resolvent_convergence_study",
    "robin_first_eigenvalue",
    "run",
    "strictly_decreasing",
    "trivial_problem_spec",
    "wrong_limit_study",
    "write_summary_json",
]
