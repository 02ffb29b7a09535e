"""Quaternion and rigid-transform primitives.

Conventions, used consistently everywhere in the package:
  * quaternions are numpy arrays [w, x, y, z], unit norm, Hamilton product
  * world frame is right-handed with Z up
  * rpy means intrinsic rotations about X, then Y, then Z
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_UNIT_TOL = 1e-6


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n < _UNIT_TOL:
        raise ValueError("cannot normalize near-zero quaternion")
    out = q / n
    # canonical sign: w >= 0, so equal rotations serialize identically
    if out[0] < 0.0:
        out = -out
    return out


def quat_mul(a, b):
    """Hamilton product a*b, both [w, x, y, z]."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v):
    """Rotate vector v by unit quaternion q."""
    w = q[0]
    u = q[1:]
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if abs(n - 1.0) > _UNIT_TOL:
        raise ValueError(f"axis must be unit length, got norm {n}")
    half = 0.5 * angle
    q = np.empty(4)
    q[0] = np.cos(half)
    q[1:] = np.sin(half) * (axis / n)
    return quat_normalize(q)


def quat_from_rpy(roll, pitch, yaw):
    """Quaternion for intrinsic X-Y-Z rotation (roll, then pitch, then yaw)."""
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), roll)
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), pitch)
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), yaw)
    return quat_normalize(quat_mul(quat_mul(qx, qy), qz))


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(rot):
    """Unit quaternion [w,x,y,z] for a proper rotation matrix.

    Uses the largest-diagonal branch so it stays well conditioned for
    rotations near pi.
    """
    rot = np.asarray(rot, dtype=np.float64)
    tr = rot[0, 0] + rot[1, 1] + rot[2, 2]
    q = np.empty(4)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q[0] = 0.25 * s
        q[1] = (rot[2, 1] - rot[1, 2]) / s
        q[2] = (rot[0, 2] - rot[2, 0]) / s
        q[3] = (rot[1, 0] - rot[0, 1]) / s
    elif rot[0, 0] >= rot[1, 1] and rot[0, 0] >= rot[2, 2]:
        s = np.sqrt(1.0 + rot[0, 0] - rot[1, 1] - rot[2, 2]) * 2.0
        q[0] = (rot[2, 1] - rot[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (rot[0, 1] + rot[1, 0]) / s
        q[3] = (rot[0, 2] + rot[2, 0]) / s
    elif rot[1, 1] >= rot[2, 2]:
        s = np.sqrt(1.0 + rot[1, 1] - rot[0, 0] - rot[2, 2]) * 2.0
        q[0] = (rot[0, 2] - rot[2, 0]) / s
        q[1] = (rot[0, 1] + rot[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (rot[1, 2] + rot[2, 1]) / s
    else:
        s = np.sqrt(1.0 + rot[2, 2] - rot[0, 0] - rot[1, 1]) * 2.0
        q[0] = (rot[1, 0] - rot[0, 1]) / s
        q[1] = (rot[0, 2] + rot[2, 0]) / s
        q[2] = (rot[1, 2] + rot[2, 1]) / s
        q[3] = 0.25 * s
    return quat_normalize(q)


def rotvec_from_matrix(rot):
    """Axis-angle vector (axis * angle) of a rotation matrix.

    Stable both near identity (series expansion) and near pi (diagonal
    branch), angle always in [0, pi].
    """
    rot = np.asarray(rot, dtype=np.float64)
    cos_a = np.clip((rot[0, 0] + rot[1, 1] + rot[2, 2] - 1.0) * 0.5, -1.0, 1.0)
    angle = np.arccos(cos_a)
    skew = np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
    if angle < 1e-8:
        return 0.5 * skew
    if angle > np.pi - 1e-6:
        # near pi the skew part vanishes; recover axis from the symmetric part
        d = np.array(
            [
                np.sqrt(max(0.0, (rot[0, 0] + 1.0) * 0.5)),
                np.sqrt(max(0.0, (rot[1, 1] + 1.0) * 0.5)),
                np.sqrt(max(0.0, (rot[2, 2] + 1.0) * 0.5)),
            ]
        )
        k = int(np.argmax(d))
        axis = d.copy()
        # off-diagonal entries fix the relative signs
        if k == 0:
            axis[1] = (rot[0, 1] + rot[1, 0]) / (4.0 * d[0]) if d[0] > 0 else 0.0
            axis[2] = (rot[0, 2] + rot[2, 0]) / (4.0 * d[0]) if d[0] > 0 else 0.0
        elif k == 1:
            axis[0] = (rot[0, 1] + rot[1, 0]) / (4.0 * d[1]) if d[1] > 0 else 0.0
            axis[2] = (rot[1, 2] + rot[2, 1]) / (4.0 * d[1]) if d[1] > 0 else 0.0
        else:
            axis[0] = (rot[0, 2] + rot[2, 0]) / (4.0 * d[2]) if d[2] > 0 else 0.0
            axis[1] = (rot[1, 2] + rot[2, 1]) / (4.0 * d[2]) if d[2] > 0 else 0.0
        axis = axis / np.linalg.norm(axis)
        # pick the sign consistent with the (possibly tiny) skew part
        if np.dot(axis, skew) < 0.0:
            axis = -axis
        return axis * angle
    return skew * (0.5 * angle / np.sin(angle))


def rotation_angle_between(qa, qb):
    """Magnitude in radians of the rotation taking qa to qb."""
    dot = abs(float(np.dot(qa, qb)))
    return 2.0 * np.arccos(np.clip(dot, -1.0, 1.0))


@dataclass
class Pose:
    """Rigid transform: rotate by `orientation`, then translate by `position`."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        q = np.asarray(self.orientation, dtype=np.float64).reshape(4)
        n = np.linalg.norm(q)
        if abs(n - 1.0) > _UNIT_TOL:
            raise ValueError(f"orientation must be unit quaternion, got norm {n}")
        self.orientation = quat_normalize(q)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_xyz_rpy(xyz, rpy) -> "Pose":
        return Pose(np.asarray(xyz, dtype=np.float64), quat_from_rpy(*rpy))

    def compose(self, other: "Pose") -> "Pose":
        """self applied first in the chain sense: returns self * other."""
        return Pose(
            self.position + quat_rotate(self.orientation, other.position),
            quat_mul(self.orientation, other.orientation),
        )

    def inverse(self) -> "Pose":
        inv_q = quat_conjugate(self.orientation)
        return Pose(-quat_rotate(inv_q, self.position), inv_q)

    def transform_point(self, point):
        return self.position + quat_rotate(self.orientation, np.asarray(point, dtype=np.float64))

    def rotation_matrix(self):
        return quat_to_matrix(self.orientation)

    def almost_equal(self, other: "Pose", pos_tol=1e-9, rot_tol=1e-9) -> bool:
        if np.linalg.norm(self.position - other.position) > pos_tol:
            return False
        return rotation_angle_between(self.orientation, other.orientation) <= rot_tol
