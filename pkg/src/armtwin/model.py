"""Robot model configs: parsing, validation, hashing, kernel-ready arrays.

A model file (YAML, or JSON since YAML is a superset here) describes one
serial chain:

    name: vx300s
    joints:
      - name: waist
        axis: [0, 0, 1]
        origin: {xyz: [0, 0, 0.079], rpy: [0, 0, 0]}
        limits: {position: [-3.14158, 3.14158], velocity: 3.14159}
      ...
    ee_offset: {xyz: [0.1072, 0, 0], rpy: [0, 0, 0]}
    gripper: {open: 0.074, closed: 0.015}

The origin is the fixed transform from the parent link frame to the
joint frame; the axis is a unit vector in that joint frame.  rpy is
intrinsic X-Y-Z.  Loaded models are frozen: mutating arrays raises.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np
import yaml

from .errors import ModelError
from .geometry import Pose, quat_to_matrix

_AXIS_RENORM_TOL = 1e-3


def _require(cond, msg):
    if not cond:
        raise ModelError(msg)


def _vec(raw, length, what):
    _require(
        isinstance(raw, (list, tuple)) and len(raw) == length,
        f"{what} must be a list of {length} numbers",
    )
    try:
        arr = np.array([float(v) for v in raw], dtype=np.float64)
    except (TypeError, ValueError):
        raise ModelError(f"{what} must be a list of {length} numbers") from None
    _require(np.all(np.isfinite(arr)), f"{what} must be finite")
    return arr


def _pose_from_dict(raw, what):
    _require(isinstance(raw, dict), f"{what} must be a mapping with xyz and rpy")
    xyz = _vec(raw.get("xyz", [0, 0, 0]), 3, f"{what}.xyz")
    rpy = _vec(raw.get("rpy", [0, 0, 0]), 3, f"{what}.rpy")
    return Pose.from_xyz_rpy(xyz, rpy)


@dataclass(frozen=True, eq=False)
class JointSpec:
    name: str
    axis: np.ndarray
    origin: Pose
    limit_lower: float
    limit_upper: float
    velocity_limit: float


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    joints: tuple[JointSpec, ...]
    ee_offset: Pose
    open_aperture: float
    closed_aperture: float
    source: dict = field(repr=False, default_factory=dict)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def link_names(self) -> list[str]:
        """One name per frame reported by forward kinematics."""
        return ["base"] + [j.name for j in self.joints] + ["ee"]

    @cached_property
    def limits_lower(self) -> np.ndarray:
        return _frozen(np.array([j.limit_lower for j in self.joints]))

    @cached_property
    def limits_upper(self) -> np.ndarray:
        return _frozen(np.array([j.limit_upper for j in self.joints]))

    @cached_property
    def velocity_limits(self) -> np.ndarray:
        return _frozen(np.array([j.velocity_limit for j in self.joints]))

    @cached_property
    def chain_arrays(self):
        """(fix_r, fix_p, axes, ee_r, ee_p) in the layout the kernels take."""
        n = self.n_joints
        fix_r = np.empty((n, 3, 3))
        fix_p = np.empty((n, 3))
        axes = np.empty((n, 3))
        for i, j in enumerate(self.joints):
            fix_r[i] = quat_to_matrix(j.origin.orientation)
            fix_p[i] = j.origin.position
            axes[i] = j.axis
        ee_r = quat_to_matrix(self.ee_offset.orientation)
        ee_p = np.array(self.ee_offset.position)
        return tuple(_frozen(a) for a in (fix_r, fix_p, axes, ee_r, ee_p))

    @cached_property
    def model_hash(self) -> str:
        return _compute_hash(self)

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.limits_lower, self.limits_upper)

    def inside_limits(self, q: np.ndarray) -> bool:
        return bool(np.all(q >= self.limits_lower) and np.all(q <= self.limits_upper))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _canonical_definition(model: RobotModel) -> dict:
    def pose_dict(p: Pose):
        return {
            "xyz": [repr(float(v)) for v in p.position],
            "q": [repr(float(v)) for v in p.orientation],
        }

    return {
        "name": model.name,
        "joints": [
            {
                "name": j.name,
                "axis": [repr(float(v)) for v in j.axis],
                "origin": pose_dict(j.origin),
                "limits": [repr(j.limit_lower), repr(j.limit_upper)],
                "velocity": repr(j.velocity_limit),
            }
            for j in model.joints
        ],
        "ee_offset": pose_dict(model.ee_offset),
        "gripper": [repr(model.open_aperture), repr(model.closed_aperture)],
    }


def _compute_hash(model: RobotModel) -> str:
    """Hex sha256 of the parsed definition.

    Computed from parsed values, not file bytes, so formatting-only
    differences (whitespace, key order, JSON vs YAML) hash identically.
    """
    blob = json.dumps(_canonical_definition(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("ascii")).hexdigest()


def parse_model(doc: dict) -> RobotModel:
    _require(isinstance(doc, dict), "model config must be a mapping")
    name = doc.get("name")
    _require(isinstance(name, str) and name != "", "model needs a non-empty name")

    raw_joints = doc.get("joints")
    _require(isinstance(raw_joints, list) and len(raw_joints) >= 1, "model needs at least one joint")

    joints = []
    seen = set()
    for idx, rj in enumerate(raw_joints):
        where = f"joints[{idx}]"
        _require(isinstance(rj, dict), f"{where} must be a mapping")
        jname = rj.get("name")
        _require(isinstance(jname, str) and jname != "", f"{where} needs a name")
        _require(jname not in seen, f"duplicate joint name {jname!r}")
        seen.add(jname)

        axis = _vec(rj.get("axis"), 3, f"{where}.axis")
        norm = float(np.linalg.norm(axis))
        _require(abs(norm - 1.0) <= _AXIS_RENORM_TOL, f"{where}.axis is not a unit vector (norm {norm:.6g})")
        axis = _frozen(axis / norm)

        origin = _pose_from_dict(rj.get("origin", {}), f"{where}.origin")

        limits = rj.get("limits")
        _require(isinstance(limits, dict), f"{where}.limits must be a mapping")
        pos = _vec(limits.get("position"), 2, f"{where}.limits.position")
        _require(pos[0] < pos[1], f"{where}.limits.position must satisfy min < max")
        vel = limits.get("velocity")
        try:
            vel = float(vel)
        except (TypeError, ValueError):
            raise ModelError(f"{where}.limits.velocity must be a positive number") from None
        _require(np.isfinite(vel) and vel > 0.0, f"{where}.limits.velocity must be a positive number")

        joints.append(
            JointSpec(
                name=jname,
                axis=axis,
                origin=origin,
                limit_lower=float(pos[0]),
                limit_upper=float(pos[1]),
                velocity_limit=vel,
            )
        )

    ee_offset = _pose_from_dict(doc.get("ee_offset", {}), "ee_offset")

    gripper = doc.get("gripper")
    _require(isinstance(gripper, dict), "gripper must be a mapping with open and closed apertures")
    try:
        g_open = float(gripper.get("open"))
        g_closed = float(gripper.get("closed"))
    except (TypeError, ValueError):
        raise ModelError("gripper open/closed must be numbers") from None
    _require(g_open > g_closed >= 0.0, "gripper must satisfy open > closed >= 0")

    return RobotModel(
        name=name,
        joints=tuple(joints),
        ee_offset=ee_offset,
        open_aperture=g_open,
        closed_aperture=g_closed,
        source=doc,
    )


def load_model(path) -> RobotModel:
    """Parse and validate a model config file (YAML or JSON)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ModelError(f"cannot read model config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ModelError(f"cannot parse model config {path}: {exc}") from exc
    return parse_model(doc)


def bundled_model(name: str = "vx300s") -> RobotModel:
    """Load one of the model configs shipped inside the package."""
    ref = resources.files("armtwin").joinpath(f"models/{name}.yaml")
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ModelError(f"no bundled model named {name!r}") from None
    return parse_model(yaml.safe_load(text))


@dataclass(frozen=True, eq=False)
class ArmInstance:
    """One arm placed in the world, driven by one assigned hand side."""

    name: str
    model: RobotModel
    base_pose: Pose
    assigned_hand: str = "right"

    def __post_init__(self):
        if self.assigned_hand not in ("left", "right"):
            raise ModelError(f"assigned_hand must be left or right, got {self.assigned_hand!r}")


class ArmSetup:
    """One or two named arms sharing a world frame, hands assigned distinctly."""

    def __init__(self, arms: list[ArmInstance]):
        if not 1 <= len(arms) <= 2:
            raise ModelError("setup needs one or two arms")
        names = [a.name for a in arms]
        if len(set(names)) != len(names):
            raise ModelError("arm names must be unique")
        hands = [a.assigned_hand for a in arms]
        if len(set(hands)) != len(hands):
            raise ModelError("arms must be assigned distinct hands")
        self._arms = {a.name: a for a in arms}

    def __iter__(self):
        return iter(self._arms.values())

    def __len__(self):
        return len(self._arms)

    @property
    def names(self) -> list[str]:
        return list(self._arms.keys())

    def __getitem__(self, name: str) -> ArmInstance:
        try:
            return self._arms[name]
        except KeyError:
            raise ModelError(f"no arm named {name!r} in setup") from None

    def hashes(self) -> dict[str, str]:
        return {name: arm.model.model_hash for name, arm in self._arms.items()}
