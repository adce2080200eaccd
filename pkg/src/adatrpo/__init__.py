"""Mirror-descent TRPO for regularized tabular MDPs."""
from .geometry import (Geometry, GeometryDomainError, Regularizer, RegularizerConstants, bregman,
                       omega, omega_grad, project_simplex)
from .kernels import BACKEND as KERNEL_BACKEND
from .mdp import (ConvergenceError, Mdp, MdpValidationError, bellman_opt, bellman_pi,
                  directional_derivative, discounted_stationary, enumerate_deterministic_values,
                  greedy_policy, optimal_value, policy_value, q_function, uniform_policy)
from .planners import (InvariantViolation, IterateRecord, PlannerConfig, PlannerResult,
                       check_fundamental_inequality, exact_trpo, uniform_trpo)
from .sample_trpo import (LearnerConfig, LearnerReport, concentrability, required_trajectories,
                          sample_based_trpo, truncation_horizon)
from .sampler import (RestartModel, TrajectoryBatch, collect_batch, sample_restart_state,
                      truncated_rollout_q)
from .updates import (ScheduleKind, StepSize, StepSizeError, netrpo_update, policy_update,
                      ppg_update, step_size)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "Geometry",
    "GeometryDomainError",
    "InvariantViolation",
    "IterateRecord",
    "KERNEL_BACKEND",
    "LearnerConfig",
    "LearnerReport",
    "Mdp",
    "MdpValidationError",
    "PlannerConfig",
    "PlannerResult",
    "Regularizer",
    "RegularizerConstants",
    "RestartModel",
    "ScheduleKind",
    "StepSize",
    "StepSizeError",
    "TrajectoryBatch",
    "__version__",
    "bellman_opt",
    "bellman_pi",
    "bregman",
    "check_fundamental_inequality",
    "collect_batch",
    "concentrability",
    "directional_derivative",
    "discounted_stationary",
    "enumerate_deterministic_values",
    "exact_trpo",
    "greedy_policy",
    "netrpo_update",
    "omega",
    "omega_grad",
    "optimal_value",
    "policy_update",
    "policy_value",
    "ppg_update",
    "project_simplex",
    "q_function",
    "required_trajectories",
    "sample_based_trpo",
    "sample_restart_state",
    "step_size",
    "truncated_rollout_q",
    "truncation_horizon",
    "uniform_policy",
    "uniform_trpo",
]
