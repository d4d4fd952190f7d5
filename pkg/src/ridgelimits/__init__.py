"""Asymptotic accuracy limits and Monte-Carlo verification for ridge-type
estimators in dense high-dimensional linear models."""

from .accuracy import (
    AccuracyReport,
    PanelSummary,
    accuracy_from_panel,
    accuracy_from_traces,
    moments_from_panel,
)
from .estimators import (
    EstimatorFit,
    EstimatorKind,
    SummaryPanel,
    fit_blup,
    fit_marginal,
    fit_ols,
    fit_ridge,
    fit_ridgeless,
    meta_aggregate,
    standardize_columns,
)
from .limits import (
    EfficiencyRatios,
    LimitValue,
    OptimalPenalty,
    PreResult,
    TraitModel,
    efficiency_ratios,
    limit_marginal,
    limit_meta,
    limit_ols,
    limit_ols_in,
    limit_ridge_in,
    limit_ridge_in_optimal,
    limit_ridge_in_zero,
    limit_ridge_optimal,
    limit_ridge_out,
    limit_ridgeless,
    mse_limits,
    optimal_lambda,
    pre_marginal,
    pre_ridge,
)
from .metrics import (
    MseDecomposition,
    R2Result,
    diagonal_sigma_layout,
    mse_decomposition,
    r2_in_sample,
    r2_out_of_sample,
)
from .simulate import (
    Dataset,
    EstimatorRequest,
    LimitComparison,
    MetricRow,
    RunResult,
    SimConfig,
    compare_to_limits,
    generate_dataset,
    run_replicate,
    run_replicates,
)
from .spectral import (
    SpectralModel,
    SpectralMoments,
    TransformValue,
    companion_from_primal,
    companion_zero_limit,
    esd_moments_from_eigenvalues,
    moment_map_forward,
    moment_map_inverse,
    mp_density,
    mp_point_mass,
    mp_stieltjes_closed,
    mp_support_edges,
    solve_mp_fixed_point,
    transform_pair,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "Dataset",
    "EfficiencyRatios",
    "EstimatorFit",
    "EstimatorKind",
    "EstimatorRequest",
    "LimitComparison",
    "LimitValue",
    "MetricRow",
    "MseDecomposition",
    "OptimalPenalty",
    "PanelSummary",
    "PreResult",
    "R2Result",
    "RunResult",
    "SimConfig",
    "SpectralModel",
    "SpectralMoments",
    "SummaryPanel",
    "TraitModel",
    "TransformValue",
    "accuracy_from_panel",
    "accuracy_from_traces",
    "companion_from_primal",
    "companion_zero_limit",
    "compare_to_limits",
    "diagonal_sigma_layout",
    "efficiency_ratios",
    "esd_moments_from_eigenvalues",
    "fit_blup",
    "fit_marginal",
    "fit_ols",
    "fit_ridge",
    "fit_ridgeless",
    "generate_dataset",
    "limit_marginal",
    "limit_meta",
    "limit_ols",
    "limit_ols_in",
    "limit_ridge_in",
    "limit_ridge_in_optimal",
    "limit_ridge_in_zero",
    "limit_ridge_optimal",
    "limit_ridge_out",
    "limit_ridgeless",
    "meta_aggregate",
    "moment_map_forward",
    "moment_map_inverse",
    "moments_from_panel",
    "mp_density",
    "mp_point_mass",
    "mp_stieltjes_closed",
    "mp_support_edges",
    "mse_decomposition",
    "mse_limits",
    "optimal_lambda",
    "pre_marginal",
    "pre_ridge",
    "r2_in_sample",
    "r2_out_of_sample",
    "run_replicate",
    "run_replicates",
    "solve_mp_fixed_point",
    "standardize_columns",
    "transform_pair",
]
