"""Double-phase variable-exponent energies on periodic metric grids.

Modulars and Luxemburg norms for variable exponents, the two-branch
constraint-set classification of the energy, and a projected-descent solver
for the pair of non-negative critical points.
"""

from .grid import (
    Chart,
    LogHolderReport,
    MetricField,
    ScalarField,
    VectorField,
    band_filter,
    build_torus,
    grad_norm_g,
    gradient,
    integrate,
    log_holder_check,
    pairwise_sum,
    random_band_limited,
    substream,
)
from .fieldio import FieldFormatError, read_field, read_metric, write_field, write_metric
from .spaces import (
    ConstantsEstimate,
    ExponentField,
    WeightField,
    conjugate_exponent,
    estimate_constants,
    holder_check,
    luxemburg_norm,
    modular,
    modular_norm_relations,
    sobolev_norm,
    weight_exponent_window,
    weighted_modular,
    weighted_norm,
)
from .problem import (
    EnergyBreakdown,
    F1Report,
    F3Report,
    PowerNonlinearity,
    ProblemInstance,
    TabulatedNonlinearity,
    F_eval,
    check_f1,
    check_f3,
    energy,
    f_eval,
    gateaux,
    residual_gradient,
)
from .nehari import (
    FiberingSample,
    NehariClass,
    NoRootError,
    NotOnNehariError,
    ProjectionResult,
    Thresholds,
    classify,
    fibering,
    project,
    psi,
    threshold_formulas,
    thresholds,
)
from .solver import (
    BranchError,
    Certificate,
    ExperimentResult,
    SolutionReport,
    SolverConfig,
    SweepRow,
    minimize_on_branch,
    nonnegativity_certificate,
    sweep,
    truncated_energy,
    truncated_gateaux,
    two_solution_experiment,
)

__version__ = "0.1.0"
