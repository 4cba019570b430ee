"""Strain-map-aware trajectory optimization and human-robot interaction sim."""

__version__ = "0.1.0"

from .activation import (  # noqa: F401
    ActivationEstimate,
    ActivationEstimator,
    EstimatorInput,
    required_torque,
    solve_activations,
)
from .baseline import GridPath, NoPathError, astar_plan, upsample_grid_path  # noqa: F401
from .kinematics import (  # noqa: F401
    EEState,
    FrameCalibration,
    ShoulderStateEstimator,
    estimate_angles,
    estimate_rates,
)
from .maps import (  # noqa: F401
    MapLibrary,
    StrainGrid,
    StrainMap,
    build_library,
    fit_rbf,
    load_library,
    sample_grid,
    save_library,
    select_map,
)
from .planner import (  # noqa: F401
    CostConfig,
    DenseTrajectory,
    OcpConfig,
    OcpSolution,
    RecedingHorizonPlanner,
    TerminalMode,
    solve,
    stage_cost,
    transcribe,
    upsample,
)
from .plant import CoupledPlant, ImpedanceConfig, gravity_offset  # noqa: F401
from .scenario import (  # noqa: F401
    GoalEvent,
    Injection,
    PlannerKind,
    ScenarioScript,
    SessionConfig,
    SessionRunner,
    SubjectMode,
    replay_metrics,
    run_scenario,
)
from .shoulder import (  # noqa: F401
    AGGREGATE,
    ArmDynamicsParams,
    JointAngles,
    JointBounds,
    KinematicState,
    MuscleTendonUnit,
    MusculoskeletalState,
    ShoulderModel,
    default_model,
)
from .sqp import SolveStatus, solve_sqp  # noqa: F401
