"""Hand-to-robot teleoperation twin: retargeting, IK, recording, replay."""

from .errors import (
    ArmTwinError,
    DegenerateHandError,
    InvalidStreamError,
    ModelError,
    ModelMismatchError,
    ProtocolError,
    SessionError,
    TrajectoryError,
    TrajectoryVersionError,
    UnknownMessageType,
)
from .geometry import Pose
from .model import ArmInstance, ArmSetup, RobotModel, bundled_model, load_model, parse_model
from .kinematics import ee_pose, forward_kinematics, jacobian, manipulability
from .ik import IkParams, IkResult, solve_ik
from .retarget import (
    EeTarget,
    GripperState,
    Hand,
    HandFrame,
    RetargetParams,
    compute_hand_basis,
    detect_end_gesture,
    detect_start_gesture,
    hand_to_target,
)
from .constraints import (
    ConstraintStatus,
    SingularityParams,
    SpeedParams,
    WorkspaceBox,
    estimate_speed,
    singularity_proximity,
)
from .trajectory import Trajectory, TrajectoryHeader, TrajectorySample, save_trajectory
from .replay import (
    FidelityReport,
    ValidationReport,
    load_trajectory,
    replay_in_sim,
    validate_trajectory,
)
from .session import Session, SessionConfig, default_session_config, load_session_config

__version__ = "0.1.0"

__all__ = [
    "ArmInstance",
    "ArmSetup",
    "ArmTwinError",
    "ConstraintStatus",
    "DegenerateHandError",
    "EeTarget",
    "FidelityReport",
    "GripperState",
    "Hand",
    "HandFrame",
    "IkParams",
    "IkResult",
    "InvalidStreamError",
    "ModelError",
    "ModelMismatchError",
    "Pose",
    "ProtocolError",
    "RetargetParams",
    "RobotModel",
    "Session",
    "SessionConfig",
    "SessionError",
    "SingularityParams",
    "SpeedParams",
    "Trajectory",
    "TrajectoryError",
    "TrajectoryHeader",
    "TrajectorySample",
    "TrajectoryVersionError",
    "UnknownMessageType",
    "ValidationReport",
    "WorkspaceBox",
    "bundled_model",
    "compute_hand_basis",
    "default_session_config",
    "detect_end_gesture",
    "detect_start_gesture",
    "ee_pose",
    "estimate_speed",
    "forward_kinematics",
    "hand_to_target",
    "jacobian",
    "load_model",
    "load_session_config",
    "load_trajectory",
    "manipulability",
    "parse_model",
    "replay_in_sim",
    "save_trajectory",
    "singularity_proximity",
    "solve_ik",
    "validate_trajectory",
    "__version__",
]
