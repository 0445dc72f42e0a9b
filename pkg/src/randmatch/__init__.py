"""Randomized reviewer-paper assignment.

Capped (PLRA) and perturbed (PM) fractional assignments, their quality and
randomness metrics, lotteries over deterministic assignments that realize
them, and quality-floor tuning of the hyperparameters.
"""

__version__ = "0.1.0"

from .errors import (
    CapTooSmall,
    DimensionMismatch,
    DomainError,
    FloorUnachievable,
    Infeasible,
    InvalidCap,
    InvalidParameter,
    InvalidSpec,
    IrrationalCap,
    MalformedInput,
    NegativeSimilarity,
    NonMonotoneDetected,
    NotDifferentiable,
    ParseError,
    RandMatchError,
    UnknownLevel,
    UsageError,
)
from .instance import (
    BlockwiseSpec,
    ProblemInstance,
    RandomDiscreteSpec,
    ValidationReport,
    check_feasibility,
    example1_instance,
    figure1_instance,
    generate_blockwise,
    generate_random_discrete,
    validate_instance,
)
from .metrics import FractionalAssignment, MetricsReport, compute_metrics, dominates, entropy
from .perturbation import (
    PerturbationFunction,
    PerturbationSpec,
    dominance_condition,
    exponential,
    level_condition,
    make_perturbation,
    quadratic,
    verify_perturbation,
)
from .sampling import (
    AssignmentDistribution,
    DeterministicAssignment,
    decompose,
    sample_assignment,
    sample_indices,
)
from .solvers import (
    InfeasibleMarker,
    SolverConfig,
    max_quality,
    solve_balanced_greedy,
    solve_greedy,
    solve_plra,
    solve_pm_exact,
    solve_pm_flow,
)
from .tuning import TuningConfig, TuningResult, find_q_plra, tune_pm_exponential, tune_pm_quadratic
