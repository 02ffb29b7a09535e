"""Forward kinematics and differential quantities at the Pose level.

All three entry points take (model, base, q): base may be None for a
world-aligned arm at the origin.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .geometry import Pose, matrix_to_quat, quat_to_matrix
from .model import RobotModel


def _check_q(model: RobotModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != model.n_joints:
        raise ValueError(f"expected {model.n_joints} joint angles, got {q.shape[0]}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint angles must be finite")
    return q


def _frames(model: RobotModel, base: Pose | None, q):
    base = base or Pose.identity()
    fix_r, fix_p, axes, ee_r, ee_p = model.chain_arrays
    return kernels.chain_frames(
        fix_r,
        fix_p,
        axes,
        q,
        quat_to_matrix(base.orientation),
        base.position,
        ee_r,
        ee_p,
    )


def forward_kinematics(model: RobotModel, base: Pose | None, q) -> list[Pose]:
    """World pose of every link frame: base, one per joint, then ee.

    A chain with zero joints (not constructible through load_model, but
    allowed for the type) reports just the base frame.
    """
    q = _check_q(model, q)
    if model.n_joints == 0:
        base = base or Pose.identity()
        return [Pose(base.position.copy(), base.orientation.copy())]
    rs, ps = _frames(model, base, q)
    return [Pose(ps[i], matrix_to_quat(rs[i])) for i in range(rs.shape[0])]


def ee_pose(model: RobotModel, base: Pose | None, q) -> Pose:
    q = _check_q(model, q)
    rs, ps = _frames(model, base, q)
    return Pose(ps[-1], matrix_to_quat(rs[-1]))


def jacobian(model: RobotModel, base: Pose | None, q) -> np.ndarray:
    """6xN spatial Jacobian at the ee origin, world frame.

    Rows are linear then angular velocity; column i is
    (omega_i x (p_ee - p_i), omega_i) for joint i.
    """
    base = base or Pose.identity()
    q = _check_q(model, q)
    fix_r, fix_p, axes, ee_r, ee_p = model.chain_arrays
    return kernels.chain_jacobian(
        fix_r,
        fix_p,
        axes,
        q,
        quat_to_matrix(base.orientation),
        base.position,
        ee_r,
        ee_p,
    )


def manipulability(model: RobotModel, base: Pose | None, q) -> float:
    """Yoshikawa-style singularity measure; zero at singular configs.

    Computed as the Gram determinant of the Jacobian's six rows,
    det(J J^T), which equals det(J^T J) for a six-joint arm.  Chains
    that cannot span all six ee velocity directions (fewer than six
    joints, or a rank-losing pose such as a fully extended arm) read
    as zero.
    """
    return float(kernels.gram_det(jacobian(model, base, q)))
