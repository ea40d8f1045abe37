"""semidop: semiclassical discrete orthogonal polynomials, verified.

High-precision recurrence data for discrete weights of hypergeometric Pearson
type via triangular factorization of Hankel moment matrices, the associated
structure matrices, and residual suites for the contiguous-relation, lattice,
flow, and KP identities they satisfy.
"""

from .errors import (
    DivergentSeries,
    IndexOutOfTable,
    InvalidShift,
    PreconditionError,
    RouteMismatch,
    SemidopError,
    SingularTruncation,
    TermBudgetExceeded,
    TruncationTooLarge,
    UndefinedWeight,
)
from .flows import (
    derivative_fd_crosscheck,
    fd_flow_derivative,
    log_tau_derivative,
    tau_derivative,
)
from .moments import (
    CholeskyFactorization,
    FlowMultiIndex,
    HankelTruncation,
    MomentTable,
    PrecisionContext,
    cholesky,
    gram_truncation,
    hankel_determinant,
    moment,
    moment_flow_shifted,
    moments_to_csv,
)
from .pipeline import WeightPipeline, clear_cache, get_pipeline
from .report import REGISTRY, Report, SuiteConfig, emit_report, run_suite
from .result import CheckResult
from .structure import (
    JacobiMatrix,
    jacobi_matrix,
    laguerre_freud_matrix,
    pascal_matrix,
    pascal_subdiagonal,
    polynomial_eval,
)
from .weights import (
    ConvergenceClass,
    HypergeometricWeight,
    PearsonPolynomials,
    Shift,
    classify_convergence,
    parse_weight_spec,
    pearson_polynomials,
    pearson_residual,
    pochhammer,
    shift_parameter,
    weight_value,
)

__version__ = "0.1.0"
