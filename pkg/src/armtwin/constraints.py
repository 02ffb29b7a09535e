"""Streaming safety annotations: singularity, workspace and speed checks.

These produce the feedback channel of every robot_state message.  All
three checks are pure functions of the current tick plus a short ee
position history, so annotations are reproducible offline from a
recorded trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidStreamError
from .geometry import Pose
from .kinematics import ee_pose, manipulability
from .model import RobotModel

_MANIP_FLOOR = 1e-300

WORKSPACE_FACES = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")


@dataclass(frozen=True)
class SingularityParams:
    """Log-space ramp from healthy manipulability down to singular."""

    m_start: float = 1e-4
    m_full: float = 1e-7

    def __post_init__(self):
        if not (self.m_start > self.m_full > 0.0):
            raise ValueError("need m_start > m_full > 0")


@dataclass(frozen=True)
class SpeedParams:
    v_max: float = 0.5
    window: int = 5

    def __post_init__(self):
        if self.v_max <= 0.0 or self.window < 2:
            raise ValueError("need v_max > 0 and window >= 2")


@dataclass(frozen=True)
class WorkspaceBox:
    """Axis-aligned allowed region for the ee, in the arm's base frame."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=np.float64).reshape(3))
        object.__setattr__(self, "max", np.asarray(self.max, dtype=np.float64).reshape(3))
        if not np.all(self.min < self.max):
            raise ValueError("workspace box needs min < max on every axis")


def check_workspace(box: WorkspaceBox, ee_pos_base) -> list[tuple[str, float]]:
    """(face, depth) for every box face the point sits beyond.

    The position must already be expressed in the arm's base frame.
    Faces are named +X, -X, ... -Z; depth is meters past the bound.
    Axis order is fixed so serialized output is stable.
    """
    point = np.asarray(ee_pos_base, dtype=np.float64).reshape(3)
    out = []
    for k, axis in enumerate("XYZ"):
        v = float(point[k])
        if v > box.max[k]:
            out.append((f"+{axis}", v - float(box.max[k])))
        elif v < box.min[k]:
            out.append((f"-{axis}", float(box.min[k]) - v))
    return out


def singularity_proximity(m: float, params: SingularityParams | None = None) -> float:
    """Map det(J^T J) to [0, 1]: 0 at m_start and above, 1 at m_full and below.

    Linear in log space between the two thresholds; the measure is
    floored far above underflow so log never sees zero.
    """
    params = params or SingularityParams()
    m = max(float(m), _MANIP_FLOOR)
    top = math.log(params.m_start) - math.log(m)
    bottom = math.log(params.m_start) - math.log(params.m_full)
    return min(1.0, max(0.0, top / bottom))


def estimate_speed(history, params: SpeedParams | None = None) -> tuple[float, bool]:
    """(ee_speed, violated) over the last `window` history entries.

    `history` is time-ascending (t_ns, position) pairs; with fewer than
    `window` samples all available ones are used.  Speed is the
    straight-line distance between the oldest and newest retained
    samples over their time span.  Fewer than two samples, or duplicate
    or backwards timestamps, are stream bugs and raise
    InvalidStreamError.
    """
    params = params or SpeedParams()
    recent = list(history)[-params.window :]
    if len(recent) < 2:
        raise InvalidStreamError("speed estimate needs at least two samples")
    times = [int(t) for t, _ in recent]
    for a, b in zip(times, times[1:]):
        if b <= a:
            raise InvalidStreamError(f"non-increasing timestamps in speed window ({a} then {b})")
    p_old = np.asarray(recent[0][1], dtype=np.float64)
    p_new = np.asarray(recent[-1][1], dtype=np.float64)
    dt = (times[-1] - times[0]) * 1e-9
    speed = float(np.linalg.norm(p_new - p_old) / dt)
    return speed, speed > params.v_max


@dataclass
class ConstraintStatus:
    singularity_proximity: float = 0.0
    workspace: list[tuple[str, float]] = field(default_factory=list)
    ee_speed: float = 0.0
    speed_violated: bool = False

    def to_payload(self) -> dict:
        return {
            "singularity_proximity": float(self.singularity_proximity),
            "workspace": [{"face": f, "depth": float(d)} for f, d in self.workspace],
            "ee_speed": float(self.ee_speed),
            "speed_violated": bool(self.speed_violated),
        }

    @staticmethod
    def from_payload(payload: dict) -> "ConstraintStatus":
        return ConstraintStatus(
            singularity_proximity=float(payload["singularity_proximity"]),
            workspace=[(str(w["face"]), float(w["depth"])) for w in payload["workspace"]],
            ee_speed=float(payload["ee_speed"]),
            speed_violated=bool(payload["speed_violated"]),
        )


def evaluate(
    model: RobotModel,
    base: Pose | None,
    q,
    box: WorkspaceBox | None,
    history,
    s_params: SingularityParams | None = None,
    v_params: SpeedParams | None = None,
) -> ConstraintStatus:
    """Full per-tick annotation for one arm.

    `history` must already carry the current ee position as its newest
    entry.  A single-entry history (the first tick of a session)
    reports zero speed instead of propagating the estimator's
    two-sample precondition.
    """
    base = base or Pose.identity()
    s_params = s_params or SingularityParams()
    v_params = v_params or SpeedParams()

    prox = singularity_proximity(manipulability(model, base, q), s_params)

    faces: list[tuple[str, float]] = []
    if box is not None:
        ee_world = ee_pose(model, base, q).position
        faces = check_workspace(box, base.inverse().transform_point(ee_world))

    history = list(history)
    if len(history) >= 2:
        speed, violated = estimate_speed(history, v_params)
    else:
        speed, violated = 0.0, False

    return ConstraintStatus(
        singularity_proximity=prox,
        workspace=faces,
        ee_speed=speed,
        speed_violated=violated,
    )
