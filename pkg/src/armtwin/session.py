"""The control loop: hand frames in, joint commands and robot state out.

One Session owns all mutable state (per-arm last command, gripper,
speed history, recording machinery).  tick() is called once per
accepted hand frame; everything inside is a pure function of session
state plus the frame, with no wall-clock reads, so feeding an identical
frame stream through a fresh session reproduces identical trajectories
down to the byte.

Recording walks idle -> armed -> recording -> idle.  A start_recording
control arms the session; recording begins when the start gesture fires
(every anchored hand inside its sphere), or in the same call when the
control carries {"immediate": true}.  It ends on the sustained palms-up
gesture, a stop_recording control, or reset.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import constraints, trajectory
from .constraints import ConstraintStatus, SingularityParams, SpeedParams, WorkspaceBox
from .errors import DegenerateHandError, ModelError, SessionError
from .geometry import Pose
from .ik import IkParams, solve_ik
from .kinematics import forward_kinematics
from .model import ArmInstance, ArmSetup, RobotModel, bundled_model, load_model, parse_model
from .retarget import (
    END_GESTURE_HOLD_NS,
    GripperState,
    HandFrame,
    RetargetParams,
    START_RADIUS,
    detect_start_gesture,
    frame_palms_up,
    hand_to_target,
)

log = logging.getLogger(__name__)

CONDITION_LABELS = ("none", "live", "post")


@dataclass
class SessionConfig:
    setup: ArmSetup
    boxes: dict[str, WorkspaceBox | None] = field(default_factory=dict)
    homes: dict[str, np.ndarray] = field(default_factory=dict)
    anchors: dict[str, np.ndarray] = field(default_factory=dict)
    anchor_radius: float = START_RADIUS
    rate_hz: float = 30.0
    retarget: RetargetParams = field(default_factory=RetargetParams)
    ik: IkParams = field(default_factory=IkParams)
    s_params: SingularityParams = field(default_factory=SingularityParams)
    v_params: SpeedParams = field(default_factory=SpeedParams)
    feedback_mode: str = "live"
    storage_dir: Path = Path("recordings")
    task_label: str = ""
    condition_label: str = "live"

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise SessionError("rate_hz must be > 0")
        if self.feedback_mode not in ("none", "live"):
            raise SessionError(f"feedback_mode must be none or live, got {self.feedback_mode!r}")
        self.storage_dir = Path(self.storage_dir)
        for arm in self.setup:
            self.boxes.setdefault(arm.name, None)
            home = self.homes.get(arm.name)
            if home is None:
                home = np.zeros(arm.model.n_joints)
            home = np.asarray(home, dtype=np.float64).reshape(-1)
            if home.shape[0] != arm.model.n_joints:
                raise SessionError(f"home for arm {arm.name!r} has wrong length")
            if not arm.model.inside_limits(home):
                raise SessionError(f"home for arm {arm.name!r} violates joint limits")
            self.homes[arm.name] = home


def _resolve_model(ref, config_dir: Path) -> RobotModel:
    if isinstance(ref, dict):
        return parse_model(ref)
    ref = str(ref)
    candidate = Path(ref)
    if not candidate.suffix and "/" not in ref:
        return bundled_model(ref)
    if not candidate.is_absolute():
        candidate = config_dir / candidate
    return load_model(candidate)


def parse_session_config(doc: dict, config_dir: Path | None = None) -> SessionConfig:
    """Build a SessionConfig from a parsed YAML/JSON document."""
    if not isinstance(doc, dict):
        raise SessionError("session config must be a mapping")
    config_dir = config_dir or Path(".")

    raw_arms = doc.get("arms")
    if not isinstance(raw_arms, list) or not raw_arms:
        raise SessionError("session config needs an arms list")

    instances = []
    boxes: dict[str, WorkspaceBox | None] = {}
    homes: dict[str, np.ndarray] = {}
    anchors: dict[str, np.ndarray] = {}
    for i, ra in enumerate(raw_arms):
        if not isinstance(ra, dict):
            raise SessionError(f"arms[{i}] must be a mapping")
        name = ra.get("name")
        if not isinstance(name, str) or not name:
            raise SessionError(f"arms[{i}] needs a name")
        try:
            model = _resolve_model(ra.get("model", "vx300s"), config_dir)
        except ModelError as exc:
            raise SessionError(f"arm {name!r}: {exc}") from exc
        bp = ra.get("base_pose", {})
        base_pose = Pose.from_xyz_rpy(bp.get("xyz", [0, 0, 0]), bp.get("rpy", [0, 0, 0]))
        hand = ra.get("hand", "right")
        instances.append(ArmInstance(name=name, model=model, base_pose=base_pose, assigned_hand=hand))

        ws = ra.get("workspace")
        if ws is not None:
            boxes[name] = WorkspaceBox(ws["min"], ws["max"])
        if ra.get("home") is not None:
            homes[name] = np.asarray(ra["home"], dtype=np.float64)
        if ra.get("anchor") is not None:
            anchors[hand] = np.asarray(ra["anchor"], dtype=np.float64).reshape(3)

    def sub(key, cls, **renames):
        raw = doc.get(key)
        if raw is None:
            return cls()
        if not isinstance(raw, dict):
            raise SessionError(f"{key} section must be a mapping")
        kwargs = {renames.get(k, k): v for k, v in raw.items()}
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise SessionError(f"bad {key} section: {exc}") from exc

    return SessionConfig(
        setup=ArmSetup(instances),
        boxes=boxes,
        homes=homes,
        anchors=anchors,
        anchor_radius=float(doc.get("anchor_radius", START_RADIUS)),
        rate_hz=float(doc.get("rate_hz", 30.0)),
        retarget=sub("retarget", RetargetParams),
        ik=sub("ik", IkParams),
        s_params=sub("singularity", SingularityParams),
        v_params=sub("speed", SpeedParams),
        feedback_mode=str(doc.get("feedback", "live")),
        storage_dir=Path(doc.get("storage_dir", "recordings")),
        task_label=str(doc.get("task_label", "")),
        condition_label=str(doc.get("condition_label", "live")),
    )


def load_session_config(path) -> SessionConfig:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SessionError(f"cannot read session config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise SessionError(f"cannot parse session config {path}: {exc}") from exc
    return parse_session_config(doc, config_dir=path.parent)


@dataclass
class ArmCommand:
    q_cmd: np.ndarray
    gripper: str
    ik_ok: bool
    ee_pose: Pose
    link_poses: list[Pose]


@dataclass
class TickResult:
    t_ns: int
    seq: int
    dropped: bool = False
    commands: dict[str, ArmCommand] = field(default_factory=dict)
    constraints: dict[str, ConstraintStatus] = field(default_factory=dict)
    recording: str = "idle"
    events: list[dict] = field(default_factory=list)


class _ArmState:
    def __init__(self, arm: ArmInstance, home: np.ndarray, window: int):
        self.arm = arm
        self.last_commanded_q = home.copy()
        self.grip = GripperState("open")
        self.ee_history: list[tuple[int, np.ndarray]] = []
        self._window = window

    def push_history(self, t_ns: int, position: np.ndarray):
        self.ee_history.append((t_ns, position.copy()))
        if len(self.ee_history) > self._window:
            del self.ee_history[0]


class Session:
    """Single-owner control loop over one ArmSetup."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.arms = {
            arm.name: _ArmState(arm, config.homes[arm.name], config.v_params.window)
            for arm in config.setup
        }
        self.recording = "idle"
        self.feedback_mode = config.feedback_mode
        self.task_label = config.task_label
        self.condition_label = config.condition_label
        self.stats = {"ticks": 0, "dropped": 0, "recordings": 0}
        self._last_seq: int | None = None
        self._last_t: int | None = None
        self._tick_counter = 0
        self._buffer: list[trajectory.TrajectorySample] = []
        self._started_at = 0
        self._palm_up_since: int | None = None

    # ------------------------------------------------------------------ tick

    def tick(self, frame: HandFrame) -> TickResult:
        """Process one hand frame; stale frames are dropped and counted."""
        if (self._last_seq is not None and frame.seq <= self._last_seq) or (
            self._last_t is not None and frame.t_ns <= self._last_t
        ):
            self.stats["dropped"] += 1
            return TickResult(t_ns=frame.t_ns, seq=frame.seq, dropped=True, recording=self.recording)
        self._last_seq = frame.seq
        self._last_t = frame.t_ns
        self._tick_counter += 1
        self.stats["ticks"] += 1

        events: list[dict] = []
        commands: dict[str, ArmCommand] = {}
        statuses: dict[str, ConstraintStatus] = {}

        for name, st in self.arms.items():
            arm = st.arm
            hand = frame.hands.get(arm.assigned_hand)
            ik_ok = False
            q_cmd = st.last_commanded_q
            if hand is not None:
                try:
                    target, grip = hand_to_target(
                        hand, st.grip, self.config.retarget, source_seq=frame.seq, source_t=frame.t_ns
                    )
                except DegenerateHandError as exc:
                    log.debug("retarget failed for arm %s, holding: %s", name, exc)
                else:
                    st.grip = grip
                    result = solve_ik(arm.model, arm.base_pose, target.pose, st.last_commanded_q, self.config.ik)
                    if result.converged:
                        q_cmd = result.q
                        ik_ok = True
            # ik_ok False (absent hand, degenerate hand, or IK failure)
            # keeps q_cmd bound to the previous command, unchanged

            frames = forward_kinematics(arm.model, arm.base_pose, q_cmd)
            ee = frames[-1]
            st.push_history(frame.t_ns, ee.position)
            status = constraints.evaluate(
                arm.model,
                arm.base_pose,
                q_cmd,
                self.config.boxes.get(name),
                st.ee_history,
                self.config.s_params,
                self.config.v_params,
            )
            st.last_commanded_q = q_cmd
            commands[name] = ArmCommand(
                q_cmd=q_cmd.copy(), gripper=st.grip.state, ik_ok=ik_ok, ee_pose=ee, link_poses=frames
            )
            statuses[name] = status

        events.extend(self._update_recording(frame, commands, statuses))

        return TickResult(
            t_ns=frame.t_ns,
            seq=frame.seq,
            commands=commands,
            constraints=statuses,
            recording=self.recording,
            events=events,
        )

    # ------------------------------------------------------------- recording

    def _update_recording(self, frame: HandFrame, commands, statuses) -> list[dict]:
        events: list[dict] = []
        if self.recording == "armed":
            if detect_start_gesture(frame, self.config.anchors, self.config.anchor_radius):
                self._begin_recording(frame.t_ns)
                events.append({"event": "recording_started", "t_ns": frame.t_ns})
        if self.recording == "recording":
            self._buffer.append(
                trajectory.TrajectorySample(
                    t_ns=frame.t_ns,
                    seq=self._tick_counter,
                    arms={
                        name: trajectory.ArmSample(
                            q_cmd=cmd.q_cmd.copy(),
                            gripper=cmd.gripper,
                            ee_pose=cmd.ee_pose,
                            ik_ok=cmd.ik_ok,
                        )
                        for name, cmd in commands.items()
                    },
                    constraint={name: statuses[name] for name in commands},
                )
            )
            if frame_palms_up(frame):
                if self._palm_up_since is None:
                    self._palm_up_since = frame.t_ns
                if frame.t_ns - self._palm_up_since >= END_GESTURE_HOLD_NS:
                    events.append(self._finish_recording("end_gesture"))
            else:
                self._palm_up_since = None
        return events

    def _begin_recording(self, t_ns: int):
        self.recording = "recording"
        self._buffer = []
        self._started_at = t_ns
        self._palm_up_since = None

    def _finish_recording(self, reason: str) -> dict:
        traj = trajectory.Trajectory(
            header=trajectory.TrajectoryHeader(
                model_hash=self.config.setup.hashes(),
                rate_hz=self.config.rate_hz,
                task_label=self.task_label,
                condition_label=self.condition_label,
                started_at=self._started_at,
            ),
            samples=self._buffer,
        )
        path = trajectory.save_trajectory(traj, self.config.storage_dir)
        self.recording = "idle"
        self._buffer = []
        self._palm_up_since = None
        self.stats["recordings"] += 1
        log.info("recording saved: %s (%d samples, %s)", path, len(traj.samples), reason)
        return {
            "event": "recording_stopped",
            "reason": reason,
            "path": str(path),
            "samples": len(traj.samples),
        }

    # --------------------------------------------------------------- control

    def handle_control(self, cmd: str, args: dict) -> tuple[bool, str]:
        """Apply one control message; returns (ok, human-readable message)."""
        args = args or {}
        if cmd == "start_recording":
            if self.recording != "idle":
                return False, f"cannot start: recording state is {self.recording}"
            self.recording = "armed"
            if args.get("immediate"):
                self._begin_recording(self._last_t or 0)
                return True, "recording"
            return True, "armed"
        if cmd == "stop_recording":
            if self.recording == "recording":
                event = self._finish_recording("control")
                return True, "saved " + event["path"]
            if self.recording == "armed":
                self.recording = "idle"
                return True, "aborted before start gesture"
            return False, "not recording"
        if cmd == "set_feedback":
            mode = args.get("mode")
            if mode not in ("none", "live"):
                return False, f"feedback mode must be none or live, got {mode!r}"
            self.feedback_mode = mode
            return True, f"feedback {mode}"
        if cmd == "set_labels":
            if "task" in args:
                self.task_label = str(args["task"])
            if "condition" in args:
                condition = str(args["condition"])
                if condition not in CONDITION_LABELS:
                    return False, f"condition must be one of {CONDITION_LABELS}"
                self.condition_label = condition
            return True, f"labels task={self.task_label!r} condition={self.condition_label!r}"
        if cmd == "reset":
            self.recording = "idle"
            self._buffer = []
            self._palm_up_since = None
            for st in self.arms.values():
                st.last_commanded_q = self.config.homes[st.arm.name].copy()
                st.grip = GripperState("open")
                st.ee_history.clear()
            return True, "session reset"
        if cmd == "get_model":
            return True, self.model_document()
        return False, f"unknown control command {cmd!r}"

    def model_document(self) -> str:
        """Compact JSON description of the setup, served to viewers."""
        arms = []
        for arm in self.config.setup:
            arms.append(
                {
                    "name": arm.name,
                    "assigned_hand": arm.assigned_hand,
                    "model_hash": arm.model.model_hash,
                    "base_pose": {
                        "p": [float(v) for v in arm.base_pose.position],
                        "q": [float(v) for v in arm.base_pose.orientation],
                    },
                    "model": arm.model.source,
                    "workspace": (
                        None
                        if self.config.boxes.get(arm.name) is None
                        else {
                            "min": [float(v) for v in self.config.boxes[arm.name].min],
                            "max": [float(v) for v in self.config.boxes[arm.name].max],
                        }
                    ),
                    "anchor": (
                        None
                        if self.config.anchors.get(arm.assigned_hand) is None
                        else [float(v) for v in self.config.anchors[arm.assigned_hand]]
                    ),
                }
            )
        return json.dumps({"arms": arms, "anchor_radius": self.config.anchor_radius}, separators=(",", ":"))

    # ----------------------------------------------------------------- state

    def robot_state_payload(self, result: TickResult) -> dict:
        """Wire-protocol robot_state body for one tick."""
        arms = []
        for name in self.config.setup.names:
            cmd = result.commands[name]
            arms.append(
                arm_state_payload(
                    name,
                    self.arms[name].arm.model,
                    cmd.link_poses,
                    cmd.q_cmd,
                    cmd.gripper,
                    cmd.ik_ok,
                    result.constraints[name],
                )
            )
        return {"arms": arms, "recording": result.recording, "feedback_mode": self.feedback_mode}


def arm_state_payload(
    name: str,
    model: RobotModel,
    link_poses: list[Pose],
    q_cmd: np.ndarray,
    gripper: str,
    ik_ok: bool,
    status: ConstraintStatus,
) -> dict:
    """One arm's block of a robot_state payload (shared with replay)."""
    links = [
        {
            "name": link_name,
            "p": [float(v) for v in pose.position],
            "q": [float(v) for v in pose.orientation],
        }
        for link_name, pose in zip(model.link_names, link_poses)
    ]
    return {
        "name": name,
        "links": links,
        "q_cmd": [float(v) for v in q_cmd],
        "gripper": gripper,
        "ik_ok": bool(ik_ok),
        "constraint": status.to_payload(),
    }


def default_session_config() -> SessionConfig:
    """The bundled single-arm setup used when no config file is given."""
    from importlib import resources

    text = resources.files("armtwin").joinpath("configs/default_session.yaml").read_text(encoding="utf-8")
    return parse_session_config(yaml.safe_load(text))
