"""Benchmark harness for Markov jump linear systems.

Simulation, mean-square stability certification, single-trajectory
identification, coupled-Riccati controller synthesis, epoch-based adaptive
control with regret accounting, and a CLI for seeded experiment sweeps.
"""

from .errors import (
    CapExceeded,
    ConfigError,
    DegenerateRegressors,
    InvalidDecayPair,
    MjsBenchError,
    NoConvergence,
    NotErgodic,
    NotMss,
    NotPSD,
    ShapeMismatch,
    SingularInnerSolve,
)
from .markov import (
    MarkovChain,
    StationaryDistribution,
    TransitionEstimate,
    estimate_transition,
    is_ergodic,
    mixing_time,
    sample_path,
    stationary_distribution,
)
from .mjs import (
    AugmentedMatrix,
    CovarianceSequence,
    MjsModel,
    ModeController,
    MssCertificate,
    NoiseSpec,
    Trajectory,
    augmented_matrix,
    closed_loop,
    covariance_recursion,
    covariance_recursion_general,
    fit_decay,
    initial_covariances_from_state,
    is_mss,
    second_moment_bound,
    simulate,
    spectral_radius,
)
from .lqr import (
    CdareSolution,
    CostSpec,
    cdare_residual,
    coupling,
    finite_horizon_cost,
    finite_horizon_cost_components,
    infinite_horizon_avg_cost,
    optimal_controller,
    solve_cdare,
)
from .sysid import (
    EstimationError,
    SysidConfig,
    SysidResult,
    clip_indices,
    estimation_error,
    mjs_sysid,
    mjs_sysid_known_B,
)
from .adaptive import (
    AdaptiveRunRecord,
    EpochRecord,
    EpochSchedule,
    adaptive_mjs_lqr,
    random_model,
    regret,
)
from .experiments import (
    ExperimentConfig,
    derive_seed,
    load_config,
    run_regret_sweep,
    run_single,
    run_sysid_sweep,
)

__all__ = [
    "AdaptiveRunRecord",
    "AugmentedMatrix",
    "CapExceeded",
    "CdareSolution",
    "ConfigError",
    "CostSpec",
    "CovarianceSequence",
    "DegenerateRegressors",
    "EpochRecord",
    "EpochSchedule",
    "EstimationError",
    "ExperimentConfig",
    "InvalidDecayPair",
    "MarkovChain",
    "MjsBenchError",
    "MjsModel",
    "ModeController",
    "MssCertificate",
    "NoConvergence",
    "NoiseSpec",
    "NotErgodic",
    "NotMss",
    "NotPSD",
    "ShapeMismatch",
    "SingularInnerSolve",
    "StationaryDistribution",
    "SysidConfig",
    "SysidResult",
    "Trajectory",
    "TransitionEstimate",
    "adaptive_mjs_lqr",
    "augmented_matrix",
    "cdare_residual",
    "clip_indices",
    "closed_loop",
    "coupling",
    "covariance_recursion",
    "covariance_recursion_general",
    "derive_seed",
    "estimate_transition",
    "estimation_error",
    "finite_horizon_cost",
    "finite_horizon_cost_components",
    "fit_decay",
    "infinite_horizon_avg_cost",
    "initial_covariances_from_state",
    "is_ergodic",
    "is_mss",
    "load_config",
    "mixing_time",
    "mjs_sysid",
    "mjs_sysid_known_B",
    "optimal_controller",
    "random_model",
    "regret",
    "run_regret_sweep",
    "run_single",
    "run_sysid_sweep",
    "sample_path",
    "second_moment_bound",
    "simulate",
    "solve_cdare",
    "spectral_radius",
    "stationary_distribution",
]
