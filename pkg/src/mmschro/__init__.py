"""Solver library for discrete multi-marginal Schroedinger systems.

Given N finite weighted spaces, a strictly positive kernel on their product,
and one strictly positive density per space sharing a common mass, the
package finds potentials whose induced coupling has exactly those marginals.
It exposes the forward maps, the derivative with its nullspace and range
structure, Sinkhorn/Newton/hybrid solvers, entropy certificates, stability
experiments, and a JSON-document CLI.
"""

from .errors import (
    AllTrialsFailed,
    BandInfeasible,
    GaugeViolation,
    IoError,
    LengthMismatch,
    LineSearchFailed,
    MassImbalance,
    NonFinite,
    NonPositiveEntry,
    NotConverged,
    NotInRange,
    Overflow,
    ParseError,
    SchemaError,
    SchroedingerError,
    ShapeMismatch,
    SizeCapExceeded,
)
from .problem import (
    DiscreteSpace,
    GibbsSpec,
    KernelTensor,
    MarginalFamily,
    ValidatedProblem,
    build_gibbs_kernel,
    family_masses,
    family_norm,
    validate_problem,
    weighted_norm,
)
from .schroedinger import (
    Gauge,
    PotentialFamily,
    ResidualInfo,
    check_gauge,
    dual_objective,
    forward_map,
    log_forward_map,
    log_inner_integrals,
    marginal_residual,
    project_mean_zero,
    project_unit_exp,
    zero_potentials,
)
from .jacobian import (
    DENSE_SIZE_CAP,
    JacobianOperator,
    SpectrumResult,
    analytic_kernel_angle,
    analytic_kernel_basis,
    apply_conditional_expectation,
    apply_jacobian,
    apply_log_jacobian,
    assemble_dense,
    build_jacobian,
    nullspace_spectrum,
    range_defect,
    solve_restricted,
    split_vector,
    stack_family,
)
from .solvers import (
    SolveReport,
    SolverConfig,
    hybrid_solve,
    newton_solve,
    sinkhorn_solve,
    sinkhorn_step,
    solve,
)
from .entropy import (
    Coupling,
    coupling_from_potentials,
    coupling_marginals,
    duality_gap,
    product_feasible_coupling,
    relative_entropy,
)
from .stability import (
    PairRecord,
    StabilityReport,
    lipschitz_experiment,
    potential_bound_scan,
    potential_sup_over,
    restricted_inverse_norm,
    sample_marginals_in_band,
    solution_sensitivity_norm,
    trial_seeds,
)
from .documents import (
    ProblemDocument,
    SolutionDocument,
    build_solution_document,
    load_problem,
    parse_problem,
    problem_to_dict,
    read_solution,
    solution_to_json,
    write_problem,
    write_solution,
    write_stability_report,
)

__version__ = "0.1.0"

__all__ = [
    "AllTrialsFailed", "BandInfeasible", "GaugeViolation", "IoError",
    "LengthMismatch", "LineSearchFailed", "MassImbalance", "NonFinite",
    "NonPositiveEntry", "NotConverged", "NotInRange", "Overflow",
    "ParseError", "SchemaError", "SchroedingerError", "ShapeMismatch",
    "SizeCapExceeded",
    "DiscreteSpace", "GibbsSpec", "KernelTensor", "MarginalFamily",
    "ValidatedProblem", "build_gibbs_kernel", "family_masses", "family_norm",
    "validate_problem", "weighted_norm",
    "Gauge", "PotentialFamily", "ResidualInfo", "check_gauge",
    "dual_objective", "forward_map", "log_forward_map", "log_inner_integrals",
    "marginal_residual", "project_mean_zero", "project_unit_exp",
    "zero_potentials",
    "DENSE_SIZE_CAP", "JacobianOperator", "SpectrumResult",
    "analytic_kernel_angle", "analytic_kernel_basis",
    "apply_conditional_expectation", "apply_jacobian", "apply_log_jacobian",
    "assemble_dense", "build_jacobian", "nullspace_spectrum", "range_defect",
    "solve_restricted", "split_vector", "stack_family",
    "SolveReport", "SolverConfig", "hybrid_solve", "newton_solve",
    "sinkhorn_solve", "sinkhorn_step", "solve",
    "Coupling", "coupling_from_potentials", "coupling_marginals",
    "duality_gap", "product_feasible_coupling", "relative_entropy",
    "PairRecord", "StabilityReport", "lipschitz_experiment",
    "potential_bound_scan", "potential_sup_over", "restricted_inverse_norm",
    "sample_marginals_in_band", "solution_sensitivity_norm", "trial_seeds",
    "ProblemDocument", "SolutionDocument", "build_solution_document",
    "load_problem", "parse_problem", "problem_to_dict", "read_solution",
    "solution_to_json", "write_problem", "write_solution",
    "write_stability_report",
]
