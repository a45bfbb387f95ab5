"""Interactive multi-UAV formation simulator for worker safety monitoring.

A leader vehicle tracks a human worker (Kalman-fused bearing plus switched
range sources), a gesture pipeline turns noisy per-frame detections into
confirmed parameter commands, and every vehicle follows receding-horizon
plans kept inside safe corridors with mutual-separation inflation. The
mission runtime drives the closed loop deterministically and exposes a
live telemetry / command service.
"""

from .estimator import (
    DistanceSources,
    HumanEstimate,
    HumanTracker,
    Measurement,
    MeasurementNoiseConfig,
    PixelBox,
    ProcessNoiseConfig,
    apparent_distance,
    build_measurement,
    direction_from_bbox,
    estimate_tick,
    kf_predict,
    kf_update,
    select_distance,
    stereo_distance,
)
from .formation import (
    HorizonConfig,
    ReferenceTrajectory,
    follower_reference,
    horizon_references,
    leader_reference,
    predict_human_trajectory,
)
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    FormationParams,
    HumanState,
    ParamLimits,
    UavState,
    boresight,
    wrap_angle,
)
from .gestures import (
    DEFAULT_GESTURE_MAP,
    DetectorEmulatorModel,
    GestureDetection,
    GestureFilter,
    GestureFilterConfig,
    ParamDelta,
    apply_operator_request,
    emulate_detection,
    map_gesture,
)
from .mapping import Box, Cylinder, OccupancyGrid
from .planner import (
    Corridor,
    DynamicLimits,
    PlannedTrajectory,
    build_corridor,
    hold_plan,
    inflate_teammates,
    optimize_trajectory,
    plan_path,
    replan,
)
from .runtime import MissionLoop, RunSummary, replay, run
from .scenario import Command, Scenario, ScenarioError, bundled_scenario_path, load_scenario
from .world import (
    GestureInterval,
    HumanMotionScript,
    SensorBundle,
    SensorModel,
    Waypoint,
    World,
    sense,
    step_human,
    step_uav,
    visibility,
)

__version__ = "0.1.0"
