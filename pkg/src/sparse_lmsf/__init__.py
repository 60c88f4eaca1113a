"""Adaptive sparse channel estimation with LMS/F-type filters.

Four estimators share one stepping interface (plain LMS/F, zero-attracting,
reweighted zero-attracting and reweighted-l1 penalised LMS/F), together with
a sparse FIR channel model and a seeded Monte-Carlo harness for MSE curves.
"""

from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    EmptyTraceError,
    InvalidSpecError,
    UndefinedSparsenessError,
)
from .estimators import (
    EstimatorConfig,
    EstimatorKind,
    EstimatorState,
    innovation_error,
    lmsf_gain,
    penalty_curves,
    penalty_rl1,
    penalty_rza,
    penalty_za,
    step,
    zero_attractor,
)
from .montecarlo import (
    ExperimentResult,
    ExperimentSpec,
    MseTrace,
    SweepResult,
    TrialResult,
    convergence_iteration,
    run_experiment,
    run_trial,
    steady_state_mse,
    sweep,
)
from .sparse_channel import (
    NoiseSpec,
    SparseChannelSpec,
    generate_channel,
    generate_training_sequence,
    generate_training_symbol,
    observe,
    regressor_window,
    sparseness,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "EmptyTraceError",
    "EstimatorConfig",
    "EstimatorKind",
    "EstimatorState",
    "ExperimentResult",
    "ExperimentSpec",
    "InvalidSpecError",
    "MseTrace",
    "NoiseSpec",
    "SparseChannelSpec",
    "SweepResult",
    "TrialResult",
    "UndefinedSparsenessError",
    "convergence_iteration",
    "generate_channel",
    "generate_training_sequence",
    "generate_training_symbol",
    "innovation_error",
    "lmsf_gain",
    "observe",
    "penalty_curves",
    "penalty_rl1",
    "penalty_rza",
    "penalty_za",
    "regressor_window",
    "run_experiment",
    "run_trial",
    "sparseness",
    "steady_state_mse",
    "step",
    "sweep",
    "zero_attractor",
]
