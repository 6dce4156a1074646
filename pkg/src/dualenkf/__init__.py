"""Duality-derived family of ensemble Kalman filters for linear-Gaussian models."""

from .dual import (
    DualControls,
    TransitionProducts,
    augmented_estimate,
    backward_dual,
    batch_estimate,
    build_transitions,
    dual_cost,
    optimal_controls,
    second_moment_identity,
    verify_batch_recursive,
)
from .ensemble import (
    EnsembleState,
    VariantSpec,
    anomalies,
    effective_gain,
    enkf_step,
    init_ensemble_deterministic,
    init_ensemble_random,
    run_filter,
)
from .estimators import EnsembleKalmanFilter, KalmanFilter
from .kalman import GainSchedule, GaussianBelief, kalman_gain, kf_mean_step, riccati_step, run_kf
from .model import (
    NoiseStreams,
    SystemModel,
    Trajectory,
    draw_copies,
    random_stable,
    scalar_benchmark,
    simulate_truth,
    validate_model,
)
from .solvers import (
    CtSolution,
    EtkfTransform,
    GammaPair,
    etkf_transform,
    gamma_rhs,
    inverse_sqrt_from_anomalies,
    rhs_consistency,
    solve_denkf,
    solve_eakf_svd,
    solve_ensrf_scalar,
    solve_sqrt_general,
    solve_stochastic,
)

__version__ = "0.1.0"
