"""Motion and scaling design for distance-based rigid formations.

The package splits into graph/rigidity primitives, offset-parameter
design, the control law with distance schedules, a fixed-step
simulator with steady-state estimators, and scenario I/O plus a CLI.
"""

from .control import (
    ControllerConfig,
    ScalingSchedule,
    control_law,
    distance_errors,
    elastic_potential,
    error_dynamics_rhs,
    scheduled_distances,
    stiffness_matrix,
    time_varying_params,
)
from .errors import (
    DegenerateAlignment,
    DegenerateShape,
    EdgeCollapse,
    FormsimError,
    InsufficientDecay,
    NonPositiveDistance,
    PositivityError,
    RigidityError,
    SchemaError,
    Unreachable,
    ZeroEdge,
    ZeroVector,
)
from .motion import (
    MotionParameters,
    MotionSpaces,
    ReferenceShape,
    distance_rate_map,
    induced_velocities,
    induced_velocity_matrix,
    membership_residuals,
    motion_spaces,
    null_space,
    parameter_matrix,
    project_out,
    rotation_field,
    rotation_params,
    rotation_space,
    scaling_params,
    scaling_space,
    translation_params,
    translation_space,
)
from .rigidity import (
    Framework,
    RigidityReport,
    SensingGraph,
    bearing_rigidity_matrix,
    bearings,
    edge_lengths,
    edge_vectors,
    incidence_matrix,
    orthogonal_projector,
    relative_positions,
    rigidity_matrix,
    rigidity_report,
    unit_edge_vectors,
)
from .scenario import (
    Scenario,
    bundled_scenario_path,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    write_trajectory_csv,
)
from .simulate import (
    BodyFrameTrajectory,
    Perturbation,
    SimConfig,
    SteadyStateReport,
    Trajectory,
    apply_perturbation,
    body_frame_transform,
    centroid,
    decay_rate_fit,
    integrate,
    perturb_to_error_norm,
    steady_state_report,
)

__version__ = "0.1.0"
