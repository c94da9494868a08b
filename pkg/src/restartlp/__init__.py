"""Matrix-free restarted primal-dual methods for linear programming.

The package provides sparse problem representation and KKT residuals
(:mod:`~restartlp.lp_core`), MPS reading / standard-form conversion and
synthetic generators (:mod:`~restartlp.ingest`), one-iteration updates for
PDHG, extragradient, ADMM and bilinear PPM (:mod:`~restartlp.steps`),
normalized-duality-gap evaluation through a linear-time trust-region solver
(:mod:`~restartlp.gap`), the restarted outer loop (:mod:`~restartlp.restarts`),
spectral analysis of the bilinear case (:mod:`~restartlp.bilinear`), and the
command-line harness (:mod:`~restartlp.cli`).
"""

from .lp_core import (
    KktSystem,
    NormSpec,
    Residuals,
    SaddlePoint,
    SparseMatrix,
    StandardFormLp,
    gradient_field,
    kkt_error,
    lagrangian,
    norm_distance,
    norm_value,
    power_method_sigma_max,
    residuals,
)
from .ingest import (
    DiagonalBilinear,
    MpsModel,
    MpsParseError,
    RandomLpKnownOptimum,
    TwoDimToy,
    VariableMap,
    generate,
    parse_mps,
    to_standard_form,
)
from .steps import (
    ADMM,
    EGM,
    PDHG,
    PPM_BILINEAR,
    AdmmPoint,
    AdmmState,
    AffineProjector,
    StepConfig,
    StepOutput,
    admm_step,
    affine_project,
    egm_step,
    initial_admm_state,
    pdhg_step,
    ppm_bilinear_step,
)
from .gap import (
    GapResult,
    TrustRegionProblem,
    normalized_gap_admm,
    normalized_gap_bisection,
    normalized_gap_lp,
    solve_linear_trust_region,
    trust_region_bisection,
)
from .restarts import (
    ADAPTIVE,
    FIXED,
    FLEXIBLE,
    NO_RESTART,
    ConvergenceTrace,
    RestartScheme,
    RestartState,
    SolveOptions,
    SolveResult,
    Status,
    fixed_frequency_tstar,
    run_restarted,
    should_restart,
    theoretical_linear_rate_check,
)
from .bilinear import (
    SpectralBlock,
    b_metric_matrix,
    b_norm_sq,
    dynamics_matrix,
    table3_scaling_experiment,
    theoretical_B_norm_decay,
    theoretical_average_bound,
    two_dim_toy_series,
)

__version__ = "0.1.0"
