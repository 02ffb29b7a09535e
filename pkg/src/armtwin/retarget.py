"""Hand landmark retargeting: skeleton frames in, gripper poses out.

A tracked hand arrives as a handful of world-space landmarks.  The palm
frame is built from four knuckle positions and the wrist:

    origin = mean of the four knuckle positions
    u = normalize(index_knuckle - little_knuckle)   (across the palm)
    f = normalize(origin - wrist)                    (toward the fingers)
    w = normalize(u x f)                             (out of the palm)
    f' = w x u                                       (re-orthogonalized)

The basis rotation has columns (u, f', w).  The palm normal is +w for a
right hand and -w for a left hand, so "palm facing up" means the same
thing for both sides.  Collinear or coincident landmarks (||u x f||
below 1e-6) have no usable basis and raise DegenerateHandError.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateHandError
from .geometry import Pose, matrix_to_quat, quat_from_axis_angle, quat_mul, quat_rotate

SIDES = ("left", "right")
KNUCKLE_KEYS = ("index", "middle", "ring", "little")

# palms-up end gesture: normal within a 25 degree cone of world +Z,
# held continuously for 3.0 seconds
PALM_UP_CONE_RAD = math.radians(25.0)
END_GESTURE_HOLD_NS = 3_000_000_000

# start gesture: knuckle centroid within this distance of its anchor sphere
START_RADIUS = 0.06

_EPS = 1e-9
_CROSS_EPS = 1e-6
_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class RetargetParams:
    thumb_shift: float = 0.02
    pitch_offset: float = 0.26
    grip_close_threshold: float = 0.04
    grip_hysteresis: float = 0.005


@dataclass
class Hand:
    """Landmarks of one tracked hand, all in world coordinates."""

    side: str
    wrist: Pose
    knuckles: dict[str, np.ndarray]
    thumb_tip: np.ndarray
    index_tip: np.ndarray

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        missing = [k for k in KNUCKLE_KEYS if k not in self.knuckles]
        if missing:
            raise ValueError(f"hand is missing knuckles: {missing}")
        self.knuckles = {k: np.asarray(self.knuckles[k], dtype=np.float64).reshape(3) for k in KNUCKLE_KEYS}
        self.thumb_tip = np.asarray(self.thumb_tip, dtype=np.float64).reshape(3)
        self.index_tip = np.asarray(self.index_tip, dtype=np.float64).reshape(3)

    @property
    def pinch_distance(self) -> float:
        return float(np.linalg.norm(self.thumb_tip - self.index_tip))


@dataclass
class HandFrame:
    """One tracking sample: stream time, monotone counter, zero to two hands."""

    t_ns: int
    seq: int = 0
    hands: dict[str, Hand] = field(default_factory=dict)

    def __post_init__(self):
        self.t_ns = int(self.t_ns)
        self.seq = int(self.seq)
        for side, hand in self.hands.items():
            if side not in SIDES:
                raise ValueError(f"unknown hand side {side!r}")
            if hand.side != side:
                raise ValueError(f"hand keyed {side!r} claims side {hand.side!r}")


@dataclass(frozen=True)
class GripperState:
    """Binary gripper command, updated only through gripper_update."""

    state: str = "open"

    def __post_init__(self):
        if self.state not in ("open", "closed"):
            raise ValueError(f"gripper state must be open or closed, got {self.state!r}")


@dataclass(frozen=True)
class EeTarget:
    """World-frame target one hand maps to, stamped with its source frame."""

    pose: Pose
    gripper: str
    source_seq: int = 0
    source_t: int = 0


def transform_hand(hand: Hand, pose: Pose) -> Hand:
    """The same hand rigidly moved by `pose` (used by tests and synthesis)."""
    return Hand(
        side=hand.side,
        wrist=pose.compose(hand.wrist),
        knuckles={k: pose.transform_point(v) for k, v in hand.knuckles.items()},
        thumb_tip=pose.transform_point(hand.thumb_tip),
        index_tip=pose.transform_point(hand.index_tip),
    )


def _normalize(v, what):
    n = np.linalg.norm(v)
    if n < _EPS:
        raise DegenerateHandError(f"{what} is degenerate (zero length)")
    return v / n


def knuckle_centroid(hand: Hand) -> np.ndarray:
    return np.mean([hand.knuckles[k] for k in KNUCKLE_KEYS], axis=0)


def compute_hand_basis(hand: Hand) -> Pose:
    """Palm frame of a hand; raises DegenerateHandError when collinear."""
    origin = knuckle_centroid(hand)
    u = _normalize(hand.knuckles["index"] - hand.knuckles["little"], "knuckle span")
    f = _normalize(origin - hand.wrist.position, "wrist-to-knuckle direction")
    w_raw = np.cross(u, f)
    w_norm = np.linalg.norm(w_raw)
    if w_norm < _CROSS_EPS:
        raise DegenerateHandError(f"hand landmarks are collinear (cross norm {w_norm:.3g})")
    w = w_raw / w_norm
    f_ortho = np.cross(w, u)
    rot = np.column_stack((u, f_ortho, w))
    return Pose(origin, matrix_to_quat(rot))


def palm_normal(hand: Hand) -> np.ndarray:
    """Unit normal out of the palm surface, anatomically correct per side."""
    basis = compute_hand_basis(hand)
    w = quat_rotate(basis.orientation, np.array([0.0, 0.0, 1.0]))
    return w if hand.side == "right" else -w


def retarget_pose(hand: Hand, params: RetargetParams | None = None) -> Pose:
    """Gripper target pose for one hand.

    Position is the palm origin nudged thumb_shift meters toward the
    thumb tip; orientation is the palm basis pitched by pitch_offset
    about its own u axis.  Rigidly moving the whole hand moves the
    result by exactly the same transform.
    """
    params = params or RetargetParams()
    basis = compute_hand_basis(hand)
    shift_dir = _normalize(hand.thumb_tip - basis.position, "thumb offset direction")
    position = basis.position + params.thumb_shift * shift_dir
    pitch = quat_from_axis_angle((1.0, 0.0, 0.0), params.pitch_offset)
    return Pose(position, quat_mul(basis.orientation, pitch))


def gripper_update(
    prev: GripperState,
    thumb_tip,
    index_tip,
    params: RetargetParams | None = None,
) -> GripperState:
    """Hysteretic open/closed decision from the thumb-index distance.

    Inside the band (threshold +- hysteresis) the previous state is
    kept, so a signal oscillating entirely within the band never
    toggles.
    """
    params = params or RetargetParams()
    d = float(np.linalg.norm(np.asarray(thumb_tip, dtype=np.float64) - np.asarray(index_tip, dtype=np.float64)))
    if d < params.grip_close_threshold - params.grip_hysteresis:
        return GripperState("closed")
    if d > params.grip_close_threshold + params.grip_hysteresis:
        return GripperState("open")
    return prev


def hand_to_target(
    hand: Hand,
    prev_grip: GripperState,
    params: RetargetParams | None = None,
    source_seq: int = 0,
    source_t: int = 0,
) -> tuple[EeTarget, GripperState]:
    """Full retarget of one hand: gripper pose plus updated grip state."""
    params = params or RetargetParams()
    pose = retarget_pose(hand, params)
    grip = gripper_update(prev_grip, hand.thumb_tip, hand.index_tip, params)
    target = EeTarget(pose=pose, gripper=grip.state, source_seq=source_seq, source_t=source_t)
    return target, grip


def detect_start_gesture(frame: HandFrame, anchors: dict[str, np.ndarray], radius: float = START_RADIUS) -> bool:
    """True when every anchored hand is present and inside its sphere.

    `anchors` maps a side to the world-space center of its start sphere.
    A side with an anchor but no tracked hand fails the gesture.
    """
    if not anchors:
        return False
    for side, center in anchors.items():
        hand = frame.hands.get(side)
        if hand is None:
            return False
        origin = knuckle_centroid(hand)
        if np.linalg.norm(origin - np.asarray(center, dtype=np.float64)) > radius:
            return False
    return True


def frame_palms_up(frame: HandFrame, cone_rad: float = PALM_UP_CONE_RAD) -> bool:
    """True when the frame has hands and every one shows its palm upward."""
    if not frame.hands:
        return False
    cos_cone = math.cos(cone_rad)
    for hand in frame.hands.values():
        try:
            normal = palm_normal(hand)
        except DegenerateHandError:
            return False
        if float(np.dot(normal, _UP)) <= cos_cone:
            return False
    return True


def detect_end_gesture(
    frames,
    now_ns: int,
    hold_ns: int = END_GESTURE_HOLD_NS,
    cone_rad: float = PALM_UP_CONE_RAD,
) -> bool:
    """True when palms have been up continuously for the trailing window.

    `frames` is time-ascending.  The run of palms-up frames ending at
    `now_ns` must have started at least `hold_ns` ago; any frame that is
    not palms-up (including one with no hands) breaks the run, and a
    history shorter than the window can never satisfy it.
    """
    run_start = None
    for frame in frames:
        if frame.t_ns > now_ns:
            break
        if frame_palms_up(frame, cone_rad):
            if run_start is None:
                run_start = frame.t_ns
        else:
            run_start = None
    if run_start is None:
        return False
    return now_ns - run_start >= hold_ns
