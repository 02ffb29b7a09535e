"""Synthetic hand streams: scripted waypoints to 30 Hz HandFrames.

Stands in for a real tracker.  A script is a YAML/JSON document with
per-hand waypoint tracks:

    rate_hz: 30.0
    hands:
      right:
        - {t: 0.0, pos: [0.45, -0.10, 0.28], rpy: [3.14159, 0, 0], pinch: 0.08}
        - {t: 2.0, pos: [0.45,  0.10, 0.25], rpy: [3.14159, 0, 0], pinch: 0.02}

Position, rpy and pinch are interpolated linearly between waypoints; a
hand is present from its first to its last waypoint time.  The skeleton
is a fixed template placed rigidly at the scripted pose, mirrored for
the left hand, built so that compute_hand_basis recovers exactly the
scripted rotation for a right hand (and its Y-flipped twin for a left
hand) and the thumb-index distance equals the scripted pinch value.

Orientation semantics: rpy ~ identity means palm up (normal +Z);
rpy [pi, 0, 0] is palm down with the knuckle line along +X.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ArmTwinError
from .geometry import Pose, quat_from_rpy, quat_rotate
from .retarget import Hand, HandFrame, SIDES


class ScriptError(ArmTwinError):
    """Synthetic stream script is malformed."""


# local skeleton template for a right hand, in basis coordinates:
# knuckle line along +x (index side positive), fingers along +y
_KNUCKLE_X = {"index": 0.033, "middle": 0.011, "ring": -0.011, "little": -0.033}
_WRIST_LOCAL = np.array([0.0, -0.09, 0.0])
_PINCH_CENTER = np.array([0.045, 0.05, 0.012])
_PINCH_DIR = np.array([1.0, 0.0, 0.0])


def hand_at(side: str, pos, orientation_q, pinch: float) -> Hand:
    """Place the template skeleton rigidly in the world.

    For a right hand the recovered palm basis equals (pos, orientation)
    exactly; a left hand mirrors the template across its local x so the
    palm normal convention still points the same world direction.
    """
    if side not in SIDES:
        raise ScriptError(f"unknown hand side {side!r}")
    if pinch <= 0:
        raise ScriptError("pinch distance must be > 0")
    mirror = 1.0 if side == "right" else -1.0
    pose = Pose(pos, orientation_q)

    def world(local):
        return pose.transform_point(local)

    knuckles = {
        name: world(np.array([mirror * x, 0.0, 0.0])) for name, x in _KNUCKLE_X.items()
    }
    center = _PINCH_CENTER * np.array([mirror, 1.0, 1.0])
    half = 0.5 * pinch * mirror * _PINCH_DIR
    return Hand(
        side=side,
        wrist=Pose(world(_WRIST_LOCAL), pose.orientation),
        knuckles=knuckles,
        thumb_tip=world(center + half),
        index_tip=world(center - half),
    )


@dataclass(frozen=True)
class Waypoint:
    t: float
    pos: np.ndarray
    rpy: np.ndarray
    pinch: float


@dataclass
class Script:
    rate_hz: float
    tracks: dict[str, list[Waypoint]]

    @property
    def t_start(self) -> float:
        return min(track[0].t for track in self.tracks.values())

    @property
    def t_end(self) -> float:
        return max(track[-1].t for track in self.tracks.values())


def parse_script(doc: dict) -> Script:
    if not isinstance(doc, dict):
        raise ScriptError("script must be a mapping")
    rate = float(doc.get("rate_hz", 30.0))
    if rate <= 0:
        raise ScriptError("rate_hz must be > 0")
    raw_hands = doc.get("hands")
    if not isinstance(raw_hands, dict) or not raw_hands:
        raise ScriptError("script needs a hands mapping with at least one side")

    tracks: dict[str, list[Waypoint]] = {}
    for side, raw_track in raw_hands.items():
        if side not in SIDES:
            raise ScriptError(f"unknown hand side {side!r}")
        if not isinstance(raw_track, list) or not raw_track:
            raise ScriptError(f"hand {side!r} needs a list of waypoints")
        track = []
        for i, rw in enumerate(raw_track):
            if not isinstance(rw, dict):
                raise ScriptError(f"{side}[{i}] must be a mapping")
            try:
                wp = Waypoint(
                    t=float(rw["t"]),
                    pos=np.asarray(rw["pos"], dtype=np.float64).reshape(3),
                    rpy=np.asarray(rw.get("rpy", [0.0, 0.0, 0.0]), dtype=np.float64).reshape(3),
                    pinch=float(rw.get("pinch", 0.08)),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ScriptError(f"{side}[{i}]: bad waypoint ({exc})") from None
            if not np.all(np.isfinite(wp.pos)) or not np.all(np.isfinite(wp.rpy)):
                raise ScriptError(f"{side}[{i}]: non-finite waypoint")
            if wp.pinch <= 0:
                raise ScriptError(f"{side}[{i}]: pinch must be > 0")
            if track and wp.t <= track[-1].t:
                raise ScriptError(f"{side}[{i}]: waypoint times must be strictly increasing")
            track.append(wp)
        tracks[side] = track
    return Script(rate_hz=rate, tracks=tracks)


def load_script(path) -> Script:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScriptError(f"cannot read script {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScriptError(f"cannot parse script {path}: {exc}") from exc
    return parse_script(doc)


def _sample_track(track: list[Waypoint], t: float) -> tuple[np.ndarray, np.ndarray, float] | None:
    if t < track[0].t or t > track[-1].t:
        return None
    for a, b in zip(track, track[1:]):
        if t <= b.t:
            span = b.t - a.t
            alpha = 0.0 if span <= 0 else (t - a.t) / span
            pos = (1.0 - alpha) * a.pos + alpha * b.pos
            rpy = (1.0 - alpha) * a.rpy + alpha * b.rpy
            pinch = (1.0 - alpha) * a.pinch + alpha * b.pinch
            return pos, rpy, pinch
    return track[-1].pos, track[-1].rpy, track[-1].pinch


def script_frames(script: Script) -> list[HandFrame]:
    """Materialize the whole stream: round(duration * rate) frames.

    Frame k sits at t_start + k/rate with t_ns counted from zero at
    t_start, seq starting at 1.
    """
    t0 = script.t_start
    duration = script.t_end - t0
    count = max(1, round(duration * script.rate_hz))
    frames = []
    for k in range(count):
        t = t0 + k / script.rate_hz
        hands = {}
        for side, track in script.tracks.items():
            sampled = _sample_track(track, t)
            if sampled is None:
                continue
            pos, rpy, pinch = sampled
            hands[side] = hand_at(side, pos, quat_from_rpy(*rpy), pinch)
        frames.append(HandFrame(t_ns=round((t - t0) * 1e9), seq=k + 1, hands=hands))
    return frames


def palm_up_rpy() -> list[float]:
    """Orientation whose palm normal is world +Z (the end gesture)."""
    return [0.0, 0.0, 0.0]


def palm_down_rpy() -> list[float]:
    return [float(np.pi), 0.0, 0.0]


def demo_script_doc(anchor, duration: float = 10.0) -> dict:
    """A reach-and-return script starting at `anchor`, ending palms up.

    The palm flip at the end is abrupt (half a second), which traps the
    solver near the wrist gimbal lock and produces an IK catch-up jump;
    recordings of this script intentionally fail the joint_velocity
    validation check the way over-eager human demonstrations do.
    """
    anchor = [float(v) for v in np.asarray(anchor).reshape(3)]
    away = [anchor[0] + 0.1, anchor[1] + 0.18, anchor[2] - 0.05]
    hold = duration - 4.0
    if hold < 2.0:
        raise ScriptError("demo script needs at least 6 s")
    return {
        "rate_hz": 30.0,
        "hands": {
            "right": [
                {"t": 0.0, "pos": anchor, "rpy": palm_down_rpy(), "pinch": 0.08},
                {"t": 1.0, "pos": anchor, "rpy": palm_down_rpy(), "pinch": 0.08},
                {"t": 1.0 + 0.45 * (hold - 1.0), "pos": away, "rpy": palm_down_rpy(), "pinch": 0.02},
                {"t": hold, "pos": anchor, "rpy": palm_down_rpy(), "pinch": 0.08},
                {"t": hold + 0.5, "pos": anchor, "rpy": palm_up_rpy(), "pinch": 0.08},
                {"t": duration, "pos": anchor, "rpy": palm_up_rpy(), "pinch": 0.08},
            ]
        },
    }


def slow_script_doc(anchor, duration: float = 12.0) -> dict:
    """A gentle script whose recording passes every validation check.

    Motion stays well under the arm's joint velocity limits and the
    palm flip happens slowly at a spot straight ahead of the base,
    where flipping is a pure wrist roll the solver tracks frame to
    frame without catch-up jumps.
    """
    if duration < 12.0:
        raise ScriptError("slow script needs at least 12 s")
    anchor = [float(v) for v in np.asarray(anchor).reshape(3)]
    neutral = [0.50, 0.0, 0.30]
    # roll upward to palm-up (pi -> 2*pi): the wrist rolls away from its
    # -pi position limit instead of into it, so the solver tracks the
    # whole flip without a reconfiguration jump
    palm_up_high = [float(2.0 * np.pi), 0.0, 0.0]
    return {
        "rate_hz": 30.0,
        "hands": {
            "right": [
                {"t": 0.0, "pos": anchor, "rpy": palm_down_rpy(), "pinch": 0.08},
                {"t": 1.0, "pos": anchor, "rpy": palm_down_rpy(), "pinch": 0.08},
                {"t": 4.0, "pos": neutral, "rpy": palm_down_rpy(), "pinch": 0.03},
                {"t": 5.5, "pos": neutral, "rpy": palm_down_rpy(), "pinch": 0.08},
                {"t": duration - 3.7, "pos": neutral, "rpy": palm_up_high, "pinch": 0.08},
                {"t": duration, "pos": neutral, "rpy": palm_up_high, "pinch": 0.08},
            ]
        },
    }


def _check_palm_up_sign():
    # template sanity: identity orientation shows the palm upward for
    # both chiralities (the left template is mirrored precisely so this
    # holds); guards the mirroring math against regressions
    from .retarget import palm_normal

    for side in SIDES:
        hand = hand_at(side, np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]), 0.08)
        n = palm_normal(hand)
        assert n[2] > 0.99, (side, n)


def quat_for_waypoint(rpy) -> np.ndarray:
    return quat_from_rpy(*np.asarray(rpy, dtype=np.float64).reshape(3))


def stream_positions(frame: HandFrame) -> dict[str, np.ndarray]:
    """Knuckle centroid per side; convenience for tests and debugging."""
    from .retarget import knuckle_centroid

    return {side: knuckle_centroid(hand) for side, hand in frame.hands.items()}
