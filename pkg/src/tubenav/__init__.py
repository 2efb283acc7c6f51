"""Deterministic planar navigation: tangent-cone planning and tube-following control."""

from .config import ScenarioConfig, emit_config, load_config, parse_config
from .controller import (
    AdaptiveState,
    ControllerParams,
    adaptive_update,
    barrier_value,
    control_law,
    input_norm_bound,
    robust_term,
    transformed_error,
    z_vector,
)
from .errors import (
    ConfigError,
    DomainError,
    NavigationError,
    PotentialSingularityError,
    TubeViolationError,
)
from .geometry import (
    DiskWorkspace,
    Obstacle,
    RectangleWorkspace,
    World,
    bearing,
    bump,
    in_free_space,
    obstacle_distance,
    validate_world,
    workspace_erosion_distance,
)
from .kinematics import (
    DisturbanceModel,
    Pose,
    RobotParams,
    bench_disturbance,
    disturbance,
    pose_derivative,
    rotation_matrix,
    rotation_matrix_inverse,
    virtual_point,
)
from .planner import (
    PfParams,
    PlannerParams,
    field,
    nominal_field,
    pf_field,
    pf_potential,
    projection_matrix,
    stationary_point,
)
from .simulation import (
    Metrics,
    RunOutcome,
    SimConfig,
    Trajectory,
    batch_run,
    compute_metrics,
    integrate_closed_loop,
    integrate_reference,
    metrics_to_json,
    pf_closed_loop,
    sample_free_points,
    trajectory_from_csv,
    trajectory_to_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveState",
    "ConfigError",
    "ControllerParams",
    "DiskWorkspace",
    "DisturbanceModel",
    "DomainError",
    "Metrics",
    "NavigationError",
    "Obstacle",
    "PfParams",
    "PlannerParams",
    "Pose",
    "PotentialSingularityError",
    "RectangleWorkspace",
    "RobotParams",
    "RunOutcome",
    "ScenarioConfig",
    "SimConfig",
    "Trajectory",
    "TubeViolationError",
    "World",
    "adaptive_update",
    "barrier_value",
    "batch_run",
    "bearing",
    "bench_disturbance",
    "bump",
    "compute_metrics",
    "control_law",
    "disturbance",
    "emit_config",
    "field",
    "in_free_space",
    "input_norm_bound",
    "integrate_closed_loop",
    "integrate_reference",
    "load_config",
    "metrics_to_json",
    "nominal_field",
    "obstacle_distance",
    "parse_config",
    "pf_closed_loop",
    "pf_field",
    "pf_potential",
    "pose_derivative",
    "projection_matrix",
    "robust_term",
    "rotation_matrix",
    "rotation_matrix_inverse",
    "sample_free_points",
    "stationary_point",
    "trajectory_from_csv",
    "trajectory_to_csv",
    "transformed_error",
    "validate_world",
    "virtual_point",
    "workspace_erosion_distance",
    "z_vector",
]
