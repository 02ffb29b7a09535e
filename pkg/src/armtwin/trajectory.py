"""Recorded trajectory files: line-delimited records, canonical bytes.

Layout of a `.traj.jsonl` file:

    line 1     header: format_version, model_hash per arm, rate_hz,
               task_label, condition_label, started_at (stream ns)
    line 2..   one sample per line: t, seq, per-arm command block,
               per-arm constraint annotation

Serialization is canonical: fixed key order, joint angles printed with
17 significant digits, every other float as shortest round-trip
decimal, timestamps as plain integers.  save -> load -> save therefore
reproduces the file byte for byte, which is what makes recorded data
diffable and the determinism tests meaningful.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import ConstraintStatus
from .errors import ModelMismatchError, TrajectoryError, TrajectoryVersionError
from .geometry import Pose
from .model import ArmSetup

FORMAT_VERSION = 1

_GRIPPER_VALUES = ("open", "closed")


@dataclass
class ArmSample:
    q_cmd: np.ndarray
    gripper: str
    ee_pose: Pose
    ik_ok: bool


@dataclass
class TrajectorySample:
    t_ns: int
    seq: int
    arms: dict[str, ArmSample]
    constraint: dict[str, ConstraintStatus]


@dataclass
class TrajectoryHeader:
    model_hash: dict[str, str]
    rate_hz: float
    task_label: str = ""
    condition_label: str = "live"
    started_at: int = 0
    format_version: int = FORMAT_VERSION


@dataclass
class Trajectory:
    header: TrajectoryHeader
    samples: list[TrajectorySample] = field(default_factory=list)

    @property
    def arm_names(self) -> list[str]:
        return list(self.header.model_hash.keys())


def _f17(v) -> str:
    v = float(v)
    if v == 0.0:
        return "0"  # never emit "-0": JSON reads it back as int 0
    return "%.17g" % v


def _fr(v) -> str:
    return repr(float(v))


def _flist(vals, fmt) -> str:
    return "[" + ",".join(fmt(v) for v in vals) + "]"


def _bool(v) -> str:
    return "true" if v else "false"


def _constraint_str(c: ConstraintStatus) -> str:
    ws = ",".join('{"face":%s,"depth":%s}' % (json.dumps(f), _fr(d)) for f, d in c.workspace)
    return '{"singularity_proximity":%s,"workspace":[%s],"ee_speed":%s,"speed_violated":%s}' % (
        _fr(c.singularity_proximity),
        ws,
        _fr(c.ee_speed),
        _bool(c.speed_violated),
    )


def header_line(header: TrajectoryHeader) -> str:
    doc = {
        "format_version": int(header.format_version),
        "model_hash": {str(k): str(v) for k, v in header.model_hash.items()},
        "rate_hz": float(header.rate_hz),
        "task_label": str(header.task_label),
        "condition_label": str(header.condition_label),
        "started_at": int(header.started_at),
    }
    return json.dumps(doc, separators=(",", ":"), allow_nan=False)


def sample_line(sample: TrajectorySample, arm_order) -> str:
    arm_parts = []
    con_parts = []
    for name in arm_order:
        a = sample.arms[name]
        arm_parts.append(
            '%s:{"q_cmd":%s,"gripper":%s,"ee_pose":{"p":%s,"q":%s},"ik_ok":%s}'
            % (
                json.dumps(name),
                _flist(a.q_cmd, _f17),
                json.dumps(a.gripper),
                _flist(a.ee_pose.position, _fr),
                _flist(a.ee_pose.orientation, _fr),
                _bool(a.ik_ok),
            )
        )
        con_parts.append("%s:%s" % (json.dumps(name), _constraint_str(sample.constraint[name])))
    return '{"t":%d,"seq":%d,"arms":{%s},"constraint":{%s}}' % (
        int(sample.t_ns),
        int(sample.seq),
        ",".join(arm_parts),
        ",".join(con_parts),
    )


def serialize(traj: Trajectory) -> str:
    order = traj.arm_names
    lines = [header_line(traj.header)]
    lines.extend(sample_line(s, order) for s in traj.samples)
    return "\n".join(lines) + "\n"


def _sanitize_label(label: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9_-]+", "_", label).strip("_")
    return cleaned or "untitled"


def save_trajectory(traj: Trajectory, directory) -> Path:
    """Write the trajectory under `directory`, returning the file path.

    Filename is {task_label}_{started_at}.traj.jsonl with a _2, _3 ...
    suffix on collision.  Content is canonical, so saving the same
    trajectory twice produces byte-identical files under two names.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = f"{_sanitize_label(traj.header.task_label)}_{int(traj.header.started_at)}"
    path = directory / f"{stem}.traj.jsonl"
    bump = 1
    while path.exists():
        bump += 1
        path = directory / f"{stem}_{bump}.traj.jsonl"
    path.write_text(serialize(traj), encoding="ascii")
    return path


def _parse_float(raw, where):
    if not isinstance(raw, (int, float)) or isinstance(raw, bool):
        raise TrajectoryError(f"{where}: expected a number")
    v = float(raw)
    if not np.isfinite(v):
        raise TrajectoryError(f"{where}: non-finite number")
    return v


def _parse_vec(raw, length, where):
    if not isinstance(raw, list) or len(raw) != length:
        raise TrajectoryError(f"{where}: expected a list of {length} numbers")
    return np.array([_parse_float(v, where) for v in raw])


def _parse_constraint(raw, where) -> ConstraintStatus:
    if not isinstance(raw, dict):
        raise TrajectoryError(f"{where}: constraint must be a mapping")
    try:
        faces = []
        for w in raw["workspace"]:
            faces.append((str(w["face"]), _parse_float(w["depth"], where)))
        return ConstraintStatus(
            singularity_proximity=_parse_float(raw["singularity_proximity"], where),
            workspace=faces,
            ee_speed=_parse_float(raw["ee_speed"], where),
            speed_violated=bool(raw["speed_violated"]),
        )
    except KeyError as exc:
        raise TrajectoryError(f"{where}: constraint missing field {exc}") from None


def _parse_header(doc, where) -> TrajectoryHeader:
    if not isinstance(doc, dict):
        raise TrajectoryError(f"{where}: header must be a mapping")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise TrajectoryVersionError(f"{where}: unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    hashes = doc.get("model_hash")
    if not isinstance(hashes, dict) or not hashes:
        raise TrajectoryError(f"{where}: header needs a model_hash mapping")
    return TrajectoryHeader(
        model_hash={str(k): str(v) for k, v in hashes.items()},
        rate_hz=_parse_float(doc.get("rate_hz"), where),
        task_label=str(doc.get("task_label", "")),
        condition_label=str(doc.get("condition_label", "")),
        started_at=int(doc.get("started_at", 0)),
        format_version=FORMAT_VERSION,
    )


def _parse_sample(doc, arm_order, n_joints, where) -> TrajectorySample:
    if not isinstance(doc, dict):
        raise TrajectoryError(f"{where}: sample must be a mapping")
    try:
        t_ns = int(doc["t"])
        seq = int(doc["seq"])
        raw_arms = doc["arms"]
        raw_con = doc["constraint"]
    except (KeyError, TypeError, ValueError):
        raise TrajectoryError(f"{where}: sample missing t/seq/arms/constraint") from None
    if not isinstance(raw_arms, dict) or set(raw_arms) != set(arm_order):
        raise TrajectoryError(f"{where}: sample arms do not match header arms")
    if not isinstance(raw_con, dict) or set(raw_con) != set(arm_order):
        raise TrajectoryError(f"{where}: sample constraints do not match header arms")

    arms = {}
    cons = {}
    for name in arm_order:
        ra = raw_arms[name]
        if not isinstance(ra, dict):
            raise TrajectoryError(f"{where}: arm {name!r} block must be a mapping")
        expected = n_joints.get(name)
        if expected is None:
            # no setup to check against: first sample fixes the joint count
            raw_q = ra.get("q_cmd")
            if not isinstance(raw_q, list) or not raw_q:
                raise TrajectoryError(f"{where}: arm {name!r} q_cmd must be a non-empty list")
            expected = n_joints[name] = len(raw_q)
        try:
            q_cmd = _parse_vec(ra["q_cmd"], expected, f"{where} arm {name!r} q_cmd")
            gripper = ra["gripper"]
            ee = ra["ee_pose"]
            ik_ok = bool(ra["ik_ok"])
        except KeyError as exc:
            raise TrajectoryError(f"{where}: arm {name!r} missing field {exc}") from None
        if gripper not in _GRIPPER_VALUES:
            raise TrajectoryError(f"{where}: arm {name!r} gripper must be open or closed")
        if not isinstance(ee, dict):
            raise TrajectoryError(f"{where}: arm {name!r} ee_pose must be a mapping")
        p = _parse_vec(ee.get("p"), 3, f"{where} arm {name!r} ee_pose.p")
        qq = _parse_vec(ee.get("q"), 4, f"{where} arm {name!r} ee_pose.q")
        try:
            pose = Pose(p, qq)
        except ValueError as exc:
            raise TrajectoryError(f"{where}: arm {name!r} ee_pose invalid ({exc})") from None
        arms[name] = ArmSample(q_cmd=q_cmd, gripper=str(gripper), ee_pose=pose, ik_ok=ik_ok)
        cons[name] = _parse_constraint(raw_con[name], f"{where} arm {name!r}")
    return TrajectorySample(t_ns=t_ns, seq=seq, arms=arms, constraint=cons)


def load_trajectory(path, setup: ArmSetup | None = None) -> Trajectory:
    """Parse a trajectory file; the exact inverse of save_trajectory.

    With a setup supplied, every header model hash must match the
    corresponding arm's loaded model (ModelMismatchError otherwise) and
    joint counts are checked against the models.  Any malformed line is
    reported with its 1-based line number.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TrajectoryError(f"cannot read trajectory {path}: {exc}") from exc

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TrajectoryError(f"{path}: empty file")

    def parse_json(raw, lineno):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TrajectoryError(f"line {lineno}: malformed record ({exc.msg})") from None

    header = _parse_header(parse_json(lines[0], 1), "line 1")
    arm_order = list(header.model_hash.keys())

    n_joints: dict[str, int] = {}
    if setup is not None:
        for name, digest in header.model_hash.items():
            if name not in setup.names:
                raise ModelMismatchError(f"trajectory arm {name!r} not present in setup")
            arm = setup[name]
            if arm.model.model_hash != digest:
                raise ModelMismatchError(
                    f"trajectory arm {name!r} was recorded with model hash {digest[:12]}..., "
                    f"setup provides {arm.model.model_hash[:12]}..."
                )
            n_joints[name] = arm.model.n_joints

    samples = []
    prev_t = None
    prev_seq = None
    for i, raw in enumerate(lines[1:], start=2):
        doc = parse_json(raw, i)
        sample = _parse_sample(doc, arm_order, n_joints, f"line {i}")
        if prev_seq is not None and sample.seq <= prev_seq:
            raise TrajectoryError(f"line {i}: sample seq must be strictly increasing")
        if prev_t is not None and sample.t_ns < prev_t:
            raise TrajectoryError(f"line {i}: sample t must be non-decreasing")
        prev_seq = sample.seq
        prev_t = sample.t_ns
        samples.append(sample)

    return Trajectory(header=header, samples=samples)
