"""Dynamic bipartite network inference from marginals.

Balance a time-aggregated network to time-varying row/column totals
(iterative proportional fitting with an explicit oscillation detector),
repair structurally infeasible inputs with minimal edge additions, fit the
matching biproportional Poisson model by Newton's method, and score the
results against generative baselines and spectral error bounds.
"""

from .core import (
    MarginalPair,
    NetworkSeries,
    SparseNetwork,
    aggregate,
    marginals,
    read_marginal,
    read_network,
    validate_pair,
    write_marginal,
    write_network,
)
from .engine import (
    IpfConfig,
    IpfResult,
    IpfStatus,
    l1_marginal_error,
    normalize_factors,
    run_ipf,
    scaled_matrix,
)
from .errors import (
    InfeasibleError,
    IpfnetError,
    NonConvergenceError,
    StructuralInfeasibilityError,
    ValidationError,
)
from .feasibility import (
    BlockingDiagnosis,
    FlowDiagnostics,
    check_feasibility,
    find_blocking_set,
    verify_blocking,
)
from .ingest import HOUR_FMT, IngestReport, TripRecord, ingest_trips
from .repair import (
    EdgeAdditionSet,
    RepairConfig,
    RepairObjective,
    RepairReport,
    RepairRound,
    Tiebreak,
    conv_ipf,
    fill_all_zeros,
    knapsack_min_cover,
    perron_addition,
    unblock_min_edges,
)
from .stats import (
    ErrorBoundReport,
    FitDiagnostics,
    GlmFit,
    LaplacianSpectrum,
    Normalization,
    ScalingParameters,
    SpectralInfo,
    StationaritySummary,
    bipartite_laplacian,
    bipartite_laplacian_fiedler,
    error_bound,
    finite_mle_condition,
    fit_diagnostics,
    log_likelihood,
    mle_newton,
    neg_ll_gradient,
    normalize_params,
    perron_spectral,
    stationarity_check,
)
from .synth import (
    Exponential,
    GravityModel,
    Interaction,
    NegBinom,
    Poisson,
    SynthConfig,
    SynthInstance,
    baseline_col_share,
    baseline_rank1,
    baseline_row_share,
    baseline_scale,
    cosine_similarity,
    effective_distances,
    fit_gravity,
    generate_instance,
    gravity_infer,
    l2_param_error,
    negbinom_params,
    pairwise_distances,
    trial_seed,
    uniform_positions,
)

__version__ = "0.1.0"

__all__ = [
    "MarginalPair",
    "NetworkSeries",
    "SparseNetwork",
    "aggregate",
    "marginals",
    "read_marginal",
    "read_network",
    "validate_pair",
    "write_marginal",
    "write_network",
    "IpfConfig",
    "IpfResult",
    "IpfStatus",
    "l1_marginal_error",
    "normalize_factors",
    "run_ipf",
    "scaled_matrix",
    "InfeasibleError",
    "IpfnetError",
    "NonConvergenceError",
    "StructuralInfeasibilityError",
    "ValidationError",
    "BlockingDiagnosis",
    "FlowDiagnostics",
    "check_feasibility",
    "find_blocking_set",
    "verify_blocking",
    "HOUR_FMT",
    "IngestReport",
    "TripRecord",
    "ingest_trips",
    "EdgeAdditionSet",
    "RepairConfig",
    "RepairObjective",
    "RepairReport",
    "RepairRound",
    "Tiebreak",
    "conv_ipf",
    "fill_all_zeros",
    "knapsack_min_cover",
    "perron_addition",
    "unblock_min_edges",
    "ErrorBoundReport",
    "FitDiagnostics",
    "GlmFit",
    "LaplacianSpectrum",
    "Normalization",
    "ScalingParameters",
    "SpectralInfo",
    "StationaritySummary",
    "bipartite_laplacian",
    "bipartite_laplacian_fiedler",
    "error_bound",
    "finite_mle_condition",
    "fit_diagnostics",
    "log_likelihood",
    "mle_newton",
    "neg_ll_gradient",
    "normalize_params",
    "perron_spectral",
    "stationarity_check",
    "Exponential",
    "GravityModel",
    "Interaction",
    "NegBinom",
    "Poisson",
    "SynthConfig",
    "SynthInstance",
    "baseline_col_share",
    "baseline_rank1",
    "baseline_row_share",
    "baseline_scale",
    "cosine_similarity",
    "effective_distances",
    "fit_gravity",
    "generate_instance",
    "gravity_infer",
    "l2_param_error",
    "negbinom_params",
    "pairwise_distances",
    "trial_seed",
    "uniform_positions",
    "__version__",
]
