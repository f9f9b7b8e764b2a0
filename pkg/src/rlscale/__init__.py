"""Scaling-law fits and compute-allocation solvers for RL training runs."""

from .allocate import (
    AllocationSolution,
    ComputeModel,
    FrontierLaws,
    FrontierPoint,
    budget_frontier,
    compare_allocations,
    compute_flops,
    fit_frontier_laws,
    iso_data_contour,
    minimize_budget,
    optimal_for_compute_budget,
    optimal_for_data_budget,
)
from .bootstrap import (
    BootstrapBatchResult,
    BootstrapConfig,
    bootstrap_best_batch,
    bootstrap_efficiency_std,
    resample_seeds,
)
from .errors import (
    ContractError,
    EstimationError,
    FitError,
    InfeasibleError,
    ParseError,
    RlScaleError,
    UnusableCurveError,
    ValidationError,
)
from .estimators import BatchSizeRule, DataEfficiencySurface
from .fitkit import (
    FitProblem,
    FitResult,
    NormalizationState,
    fit_loglinear,
    fit_power_law,
    inverse_softplus,
    minimize,
    normalize_inputs,
    softplus,
)
from .ingest import (
    LearningCurve,
    RunKey,
    RunSet,
    TaskMeta,
    parse_run_log,
    validate_manifest,
    write_run_log,
)
from .laws import (
    AggregateNormalization,
    BatchRuleFit,
    DataFit,
    SharedExponentFamily,
    batch_sensitivity,
    eval_batch_rule,
    eval_batch_rule_factorized,
    eval_data_fit,
    fit_batch_rule,
    fit_data_efficiency,
    normalize_across_tasks,
    relative_error,
)
from .preprocess import (
    EfficiencyPoint,
    ProcessedCurve,
    ThresholdGrid,
    data_efficiency,
    extract_efficiency_table,
    isotonic,
    normalize_returns,
    process_curve,
    remove_reset_dips,
    threshold_grid,
)
from .synth import SynthSpec, gen_efficiency_grid, gen_learning_curves

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
