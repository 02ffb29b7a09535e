"""Wire protocol v1: canonical JSON message schemas over one socket.

Every message is an envelope {type, seq, t_ns, payload}.  Encoding is
canonical: keys in schema order, floats as shortest round-trip decimal
(Python repr), integers bare, no whitespace.  Decoding is tolerant of
key reordering and unknown extra keys, strict about types, enums,
finiteness and the protocol version, so two independent
implementations agree byte-for-byte on canonical messages.

Message kinds:
    hand_frame   tracked skeleton (hand_source -> server)
    robot_state  per-arm link poses, command and constraint annotations
                 (server -> viewers)
    control      operator command, acked (any client -> server)
    ack          result of a control or protocol violation notice
    hello        first message of every connection: role + version
"""

from __future__ import annotations

import json
import math

from .errors import ProtocolError, UnknownMessageType
from .geometry import Pose
from .retarget import Hand, HandFrame, KNUCKLE_KEYS, SIDES

PROTOCOL_VERSION = 1
WS_PATH = "/ws"

ROLES = ("hand_source", "viewer", "controller")
CONTROL_COMMANDS = (
    "start_recording",
    "stop_recording",
    "set_feedback",
    "set_labels",
    "reset",
    "get_model",
    "replay",
)
GRIPPER_VALUES = ("open", "closed")
RECORDING_VALUES = ("idle", "armed", "recording")
FEEDBACK_MODES = ("none", "live")
FACES = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")


def _fail(where, what):
    raise ProtocolError(f"{where}: {what}")


def _num(raw, where):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        _fail(where, "expected a number")
    v = float(raw)
    if not math.isfinite(v):
        _fail(where, "non-finite number")
    return v


def _cint(raw, where, minimum=0):
    if isinstance(raw, bool) or not isinstance(raw, int):
        _fail(where, "expected an integer")
    if raw < minimum:
        _fail(where, f"must be >= {minimum}")
    return raw


def _cbool(raw, where):
    if not isinstance(raw, bool):
        _fail(where, "expected a boolean")
    return raw


def _cstr(raw, where, enum=None):
    if not isinstance(raw, str):
        _fail(where, "expected a string")
    if enum is not None and raw not in enum:
        _fail(where, f"must be one of {enum}, got {raw!r}")
    return raw


def _cvec(raw, n, where):
    if not isinstance(raw, list) or len(raw) != n:
        _fail(where, f"expected a list of {n} numbers")
    return [_num(v, where) for v in raw]


def _cdict(raw, where):
    if not isinstance(raw, dict):
        _fail(where, "expected a mapping")
    return raw


def _cfree(raw, where, depth=0):
    """Validate and canonicalize a free-form JSON value (control args)."""
    if depth > 8:
        _fail(where, "nesting too deep")
    if raw is None or isinstance(raw, (bool, str, int)):
        return raw
    if isinstance(raw, float):
        if not math.isfinite(raw):
            _fail(where, "non-finite number")
        return raw
    if isinstance(raw, list):
        return [_cfree(v, where, depth + 1) for v in raw]
    if isinstance(raw, dict):
        out = {}
        for k in sorted(raw):
            if not isinstance(k, str):
                _fail(where, "mapping keys must be strings")
            out[k] = _cfree(raw[k], where, depth + 1)
        return out
    _fail(where, f"unsupported value of type {type(raw).__name__}")


def _cpose(raw, where):
    raw = _cdict(raw, where)
    return {"p": _cvec(raw.get("p"), 3, f"{where}.p"), "q": _cvec(raw.get("q"), 4, f"{where}.q")}


def _canon_hand_frame(payload):
    payload = _cdict(payload, "hand_frame")
    raw_hands = payload.get("hands")
    if not isinstance(raw_hands, list) or len(raw_hands) > 2:
        _fail("hand_frame.hands", "expected a list of at most two hands")
    hands = []
    seen = set()
    for i, rh in enumerate(raw_hands):
        where = f"hand_frame.hands[{i}]"
        rh = _cdict(rh, where)
        side = _cstr(rh.get("side"), f"{where}.side", SIDES)
        if side in seen:
            _fail(where, f"duplicate side {side!r}")
        seen.add(side)
        raw_kn = _cdict(rh.get("knuckles"), f"{where}.knuckles")
        knuckles = {k: _cvec(raw_kn.get(k), 3, f"{where}.knuckles.{k}") for k in KNUCKLE_KEYS}
        hands.append(
            {
                "side": side,
                "wrist": _cpose(rh.get("wrist"), f"{where}.wrist"),
                "knuckles": knuckles,
                "thumb_tip": _cvec(rh.get("thumb_tip"), 3, f"{where}.thumb_tip"),
                "index_tip": _cvec(rh.get("index_tip"), 3, f"{where}.index_tip"),
            }
        )
    return {"hands": hands}


def _canon_constraint(raw, where):
    raw = _cdict(raw, where)
    prox = _num(raw.get("singularity_proximity"), f"{where}.singularity_proximity")
    if not 0.0 <= prox <= 1.0:
        _fail(f"{where}.singularity_proximity", "must be within [0, 1]")
    raw_ws = raw.get("workspace")
    if not isinstance(raw_ws, list):
        _fail(f"{where}.workspace", "expected a list")
    workspace = []
    for i, rw in enumerate(raw_ws):
        rw = _cdict(rw, f"{where}.workspace[{i}]")
        depth = _num(rw.get("depth"), f"{where}.workspace[{i}].depth")
        if depth <= 0.0:
            _fail(f"{where}.workspace[{i}].depth", "must be > 0")
        workspace.append(
            {"face": _cstr(rw.get("face"), f"{where}.workspace[{i}].face", FACES), "depth": depth}
        )
    speed = _num(raw.get("ee_speed"), f"{where}.ee_speed")
    if speed < 0.0:
        _fail(f"{where}.ee_speed", "must be >= 0")
    return {
        "singularity_proximity": prox,
        "workspace": workspace,
        "ee_speed": speed,
        "speed_violated": _cbool(raw.get("speed_violated"), f"{where}.speed_violated"),
    }


def _canon_robot_state(payload):
    payload = _cdict(payload, "robot_state")
    raw_arms = payload.get("arms")
    if not isinstance(raw_arms, list) or not raw_arms:
        _fail("robot_state.arms", "expected a non-empty list")
    arms = []
    for i, ra in enumerate(raw_arms):
        where = f"robot_state.arms[{i}]"
        ra = _cdict(ra, where)
        raw_links = ra.get("links")
        if not isinstance(raw_links, list) or not raw_links:
            _fail(f"{where}.links", "expected a non-empty list")
        links = []
        for j, rl in enumerate(raw_links):
            rl = _cdict(rl, f"{where}.links[{j}]")
            links.append(
                {
                    "name": _cstr(rl.get("name"), f"{where}.links[{j}].name"),
                    "p": _cvec(rl.get("p"), 3, f"{where}.links[{j}].p"),
                    "q": _cvec(rl.get("q"), 4, f"{where}.links[{j}].q"),
                }
            )
        raw_q = ra.get("q_cmd")
        if not isinstance(raw_q, list) or not raw_q:
            _fail(f"{where}.q_cmd", "expected a non-empty list")
        arms.append(
            {
                "name": _cstr(ra.get("name"), f"{where}.name"),
                "links": links,
                "q_cmd": [_num(v, f"{where}.q_cmd") for v in raw_q],
                "gripper": _cstr(ra.get("gripper"), f"{where}.gripper", GRIPPER_VALUES),
                "ik_ok": _cbool(ra.get("ik_ok"), f"{where}.ik_ok"),
                "constraint": _canon_constraint(ra.get("constraint"), f"{where}.constraint"),
            }
        )
    return {
        "arms": arms,
        "recording": _cstr(payload.get("recording"), "robot_state.recording", RECORDING_VALUES),
        "feedback_mode": _cstr(payload.get("feedback_mode"), "robot_state.feedback_mode", FEEDBACK_MODES),
    }


def _canon_control(payload):
    payload = _cdict(payload, "control")
    return {
        "cmd": _cstr(payload.get("cmd"), "control.cmd", CONTROL_COMMANDS),
        "args": _cfree(_cdict(payload.get("args", {}), "control.args"), "control.args"),
    }


def _canon_ack(payload):
    payload = _cdict(payload, "ack")
    return {
        "for_seq": _cint(payload.get("for_seq"), "ack.for_seq"),
        "ok": _cbool(payload.get("ok"), "ack.ok"),
        "message": _cstr(payload.get("message"), "ack.message"),
    }


def _canon_hello(payload):
    payload = _cdict(payload, "hello")
    version = _cint(payload.get("protocol_version"), "hello.protocol_version")
    if version != PROTOCOL_VERSION:
        raise ProtocolError(
            f"protocol_version mismatch: peer speaks {version}, this end speaks {PROTOCOL_VERSION}"
        )
    return {"role": _cstr(payload.get("role"), "hello.role", ROLES), "protocol_version": version}


_CANON = {
    "hand_frame": _canon_hand_frame,
    "robot_state": _canon_robot_state,
    "control": _canon_control,
    "ack": _canon_ack,
    "hello": _canon_hello,
}

MESSAGE_TYPES = tuple(_CANON)


def _canon_envelope(msg) -> dict:
    msg = _cdict(msg, "envelope")
    mtype = msg.get("type")
    if not isinstance(mtype, str):
        _fail("envelope.type", "expected a string")
    canon = _CANON.get(mtype)
    if canon is None:
        raise UnknownMessageType(f"unknown message type {mtype!r}")
    if "payload" not in msg:
        _fail("envelope", "missing payload")
    return {
        "type": mtype,
        "seq": _cint(msg.get("seq"), "envelope.seq"),
        "t_ns": _cint(msg.get("t_ns"), "envelope.t_ns"),
        "payload": canon(msg["payload"]),
    }


def encode_message(msg: dict) -> bytes:
    """Canonical bytes for a message; raises ProtocolError if invalid."""
    env = _canon_envelope(msg)
    return json.dumps(env, separators=(",", ":"), allow_nan=False).encode("ascii")


def _reject_constant(name):
    raise ProtocolError(f"non-finite JSON constant {name!r} is not allowed")


def decode_message(data) -> dict:
    """Parse and validate bytes into a canonical message dict.

    Accepts reordered and unknown keys; rejects wrong types, bad enums,
    NaN/Infinity, unknown message types and hello version mismatches.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError:
            raise ProtocolError("message is not valid UTF-8") from None
    try:
        obj = json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message: {exc.msg}") from None
    return _canon_envelope(obj)


def make_envelope(mtype: str, seq: int, t_ns: int, payload: dict) -> dict:
    return {"type": mtype, "seq": int(seq), "t_ns": int(t_ns), "payload": payload}


# ---------------------------------------------------------------- converters


def hand_frame_payload(frame: HandFrame) -> dict:
    """Wire payload for a HandFrame (timestamp travels in the envelope)."""
    hands = []
    for side in SIDES:
        hand = frame.hands.get(side)
        if hand is None:
            continue
        hands.append(
            {
                "side": side,
                "wrist": {
                    "p": [float(v) for v in hand.wrist.position],
                    "q": [float(v) for v in hand.wrist.orientation],
                },
                "knuckles": {k: [float(v) for v in hand.knuckles[k]] for k in KNUCKLE_KEYS},
                "thumb_tip": [float(v) for v in hand.thumb_tip],
                "index_tip": [float(v) for v in hand.index_tip],
            }
        )
    return {"hands": hands}


def payload_to_hand_frame(payload: dict, seq: int, t_ns: int) -> HandFrame:
    """Domain HandFrame from a validated hand_frame payload."""
    hands = {}
    for rh in payload["hands"]:
        try:
            wrist = Pose(rh["wrist"]["p"], rh["wrist"]["q"])
        except ValueError as exc:
            raise ProtocolError(f"hand_frame wrist pose invalid: {exc}") from None
        hands[rh["side"]] = Hand(
            side=rh["side"],
            wrist=wrist,
            knuckles={k: rh["knuckles"][k] for k in KNUCKLE_KEYS},
            thumb_tip=rh["thumb_tip"],
            index_tip=rh["index_tip"],
        )
    return HandFrame(t_ns=t_ns, seq=seq, hands=hands)
