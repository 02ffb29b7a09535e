"""Damped least squares inverse kinematics.

The solver is a plain iterative scheme:

    dq = J^T (J J^T + damping^2 I)^-1 e

with e the 6-vector (position difference, axis-angle of the rotation
taking current to target).  Each component of dq is clamped to
+-step_limit, the update is clamped to joint limits, and convergence is
tested *before* the first step so an already-satisfying seed costs zero
iterations.  Everything is deterministic: same inputs, same bits out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import Pose, quat_to_matrix
from .model import RobotModel


@dataclass(frozen=True)
class IkParams:
    max_iterations: int = 100
    damping: float = 1e-3
    pos_tolerance: float = 1e-4
    rot_tolerance: float = 1e-3
    step_limit: float = 0.2


@dataclass(frozen=True)
class IkResult:
    q: np.ndarray
    converged: bool
    pos_error: float
    rot_error: float
    iterations: int


def damped_step(jac: np.ndarray, error: np.ndarray, damping: float) -> np.ndarray:
    """One raw DLS step (no clamping), exposed for analysis and tests."""
    jac = np.ascontiguousarray(jac, dtype=np.float64)
    error = np.ascontiguousarray(error, dtype=np.float64)
    return kernels.dls_step(jac, error, float(damping))


def solve_ik(
    model: RobotModel,
    base: Pose | None,
    target: Pose,
    q_seed,
    params: IkParams | None = None,
) -> IkResult:
    """Solve for joint angles reaching a world-frame target pose.

    On convergence the returned q reproduces the reported errors under
    forward kinematics.  On failure the best iterate encountered is
    returned (scored by max of the tolerance-normalized errors) with
    converged=False and iterations == max_iterations.
    """
    base = base or Pose.identity()
    params = params or IkParams()
    if not np.all(np.isfinite(target.position)):
        raise ValueError("target position must be finite")
    q_seed = np.asarray(q_seed, dtype=np.float64).reshape(-1)
    if q_seed.shape[0] != model.n_joints:
        raise ValueError(f"expected {model.n_joints} seed angles, got {q_seed.shape[0]}")
    if params.max_iterations < 0:
        raise ValueError("max_iterations must be >= 0")

    fix_r, fix_p, axes, ee_r, ee_p = model.chain_arrays
    q, converged, pos_err, rot_err, iterations = kernels.dls_ik(
        fix_r,
        fix_p,
        axes,
        model.limits_lower,
        model.limits_upper,
        quat_to_matrix(base.orientation),
        base.position,
        ee_r,
        ee_p,
        quat_to_matrix(target.orientation),
        target.position,
        q_seed,
        int(params.max_iterations),
        float(params.damping),
        float(params.pos_tolerance),
        float(params.rot_tolerance),
        float(params.step_limit),
    )
    return IkResult(
        q=q,
        converged=bool(converged),
        pos_error=float(pos_err),
        rot_error=float(rot_err),
        iterations=int(iterations),
    )
