"""Numeric kernels for the per-tick hot path (FK, Jacobian, damped IK).

Every function here is compiled with numba when available.  Setting the
environment variable ARMTWIN_DISABLE_NUMBA=1 (or not having numba
installed) runs the identical source as plain numpy instead; the jitted
variants expose the interpreted original as `.py_func`, and the fallback
path aliases `.py_func` to itself so callers and benchmarks never need
to care which mode is active.

All arrays are float64.  Rotations are 3x3 matrices in here; quaternion
conversion happens one level up, at the Pose boundary.
"""

import os

import numpy as np

NUMBA_ENABLED = False
if os.environ.get("ARMTWIN_DISABLE_NUMBA", "") not in ("", "0"):
    _jit = None
else:
    try:
        import numba as _numba

        def _jit(fn):
            return _numba.njit(cache=True)(fn)

        NUMBA_ENABLED = True
    except ImportError:
        _jit = None

if _jit is None:

    def _jit(fn):
        fn.py_func = fn
        return fn


@_jit
def rot_axis_angle(axis, angle):
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis[0], axis[1], axis[2]
    c = np.cos(angle)
    s = np.sin(angle)
    t = 1.0 - c
    out = np.empty((3, 3))
    out[0, 0] = t * x * x + c
    out[0, 1] = t * x * y - s * z
    out[0, 2] = t * x * z + s * y
    out[1, 0] = t * x * y + s * z
    out[1, 1] = t * y * y + c
    out[1, 2] = t * y * z - s * x
    out[2, 0] = t * x * z - s * y
    out[2, 1] = t * y * z + s * x
    out[2, 2] = t * z * z + c
    return out


@_jit
def rotmat_log(rot):
    """Axis-angle vector of a rotation matrix, angle in [0, pi]."""
    tr = rot[0, 0] + rot[1, 1] + rot[2, 2]
    cos_a = (tr - 1.0) * 0.5
    if cos_a > 1.0:
        cos_a = 1.0
    elif cos_a < -1.0:
        cos_a = -1.0
    angle = np.arccos(cos_a)
    skew = np.empty(3)
    skew[0] = rot[2, 1] - rot[1, 2]
    skew[1] = rot[0, 2] - rot[2, 0]
    skew[2] = rot[1, 0] - rot[0, 1]
    if angle < 1e-8:
        return 0.5 * skew
    if angle > np.pi - 1e-6:
        d0 = np.sqrt(max(0.0, (rot[0, 0] + 1.0) * 0.5))
        d1 = np.sqrt(max(0.0, (rot[1, 1] + 1.0) * 0.5))
        d2 = np.sqrt(max(0.0, (rot[2, 2] + 1.0) * 0.5))
        axis = np.empty(3)
        axis[0] = d0
        axis[1] = d1
        axis[2] = d2
        if d0 >= d1 and d0 >= d2:
            axis[1] = (rot[0, 1] + rot[1, 0]) / (4.0 * d0)
            axis[2] = (rot[0, 2] + rot[2, 0]) / (4.0 * d0)
        elif d1 >= d2:
            axis[0] = (rot[0, 1] + rot[1, 0]) / (4.0 * d1)
            axis[2] = (rot[1, 2] + rot[2, 1]) / (4.0 * d1)
        else:
            axis[0] = (rot[0, 2] + rot[2, 0]) / (4.0 * d2)
            axis[1] = (rot[1, 2] + rot[2, 1]) / (4.0 * d2)
        norm = np.sqrt(axis[0] ** 2 + axis[1] ** 2 + axis[2] ** 2)
        axis = axis / norm
        if axis[0] * skew[0] + axis[1] * skew[1] + axis[2] * skew[2] < 0.0:
            axis = -axis
        return axis * angle
    return skew * (0.5 * angle / np.sin(angle))


@_jit
def chain_frames(fix_r, fix_p, axes, q, base_r, base_p, ee_r, ee_p):
    """World pose of every link frame of a serial chain.

    fix_r, fix_p  per-joint fixed origin transform (parent link -> joint)
    axes          per-joint unit rotation axis, expressed in the joint frame
    q             joint angles, radians
    base_r/p      world pose of the chain base
    ee_r/p        fixed tool transform hung off the last link

    Returns (rs, ps) of shape (n+2, 3, 3) and (n+2, 3): base frame,
    one frame per joint (its child link), then the end effector.
    """
    n = axes.shape[0]
    rs = np.empty((n + 2, 3, 3))
    ps = np.empty((n + 2, 3))
    rs[0] = base_r
    ps[0] = base_p
    for i in range(n):
        r_joint = rs[i] @ fix_r[i]
        p_joint = ps[i] + rs[i] @ fix_p[i]
        rs[i + 1] = r_joint @ rot_axis_angle(axes[i], q[i])
        ps[i + 1] = p_joint
    rs[n + 1] = rs[n] @ ee_r
    ps[n + 1] = ps[n] + rs[n] @ ee_p
    return rs, ps


@_jit
def jacobian_from_frames(rs, ps, axes):
    """Spatial Jacobian (linear over angular rows) at the ee origin.

    Column i is (omega_i x (p_ee - p_i), omega_i) with everything in
    world coordinates, for the frames produced by chain_frames.
    """
    n = axes.shape[0]
    jac = np.empty((6, n))
    p_ee = ps[n + 1]
    for i in range(n):
        w = rs[i + 1] @ axes[i]
        rx = p_ee[0] - ps[i + 1][0]
        ry = p_ee[1] - ps[i + 1][1]
        rz = p_ee[2] - ps[i + 1][2]
        jac[0, i] = w[1] * rz - w[2] * ry
        jac[1, i] = w[2] * rx - w[0] * rz
        jac[2, i] = w[0] * ry - w[1] * rx
        jac[3, i] = w[0]
        jac[4, i] = w[1]
        jac[5, i] = w[2]
    return jac


@_jit
def chain_jacobian(fix_r, fix_p, axes, q, base_r, base_p, ee_r, ee_p):
    rs, ps = chain_frames(fix_r, fix_p, axes, q, base_r, base_p, ee_r, ee_p)
    return jacobian_from_frames(rs, ps, axes)


@_jit
def gram_det(jac):
    """Gram determinant of the Jacobian over its six rows: det(J J^T).

    Equals det(J^T J) for a six-joint chain.  For chains with fewer
    joints the row Gram is rank-deficient, so the value is ~0: a chain
    that cannot span all six velocity directions reads as singular.
    Clamped to zero if numerical noise pushes it negative.
    """
    g = np.ascontiguousarray(jac) @ jac.T
    d = np.linalg.det(np.ascontiguousarray(g))
    if d < 0.0:
        d = 0.0
    return d


@_jit
def dls_step(jac, err, damping):
    """One damped least squares step: J^T (J J^T + damping^2 I)^-1 err."""
    m = jac.shape[0]
    a = jac @ jac.T + (damping * damping) * np.eye(m)
    y = np.linalg.solve(np.ascontiguousarray(a), np.ascontiguousarray(err))
    return jac.T @ y


@_jit
def dls_ik(
    fix_r,
    fix_p,
    axes,
    q_min,
    q_max,
    base_r,
    base_p,
    ee_r,
    ee_p,
    target_r,
    target_p,
    q_seed,
    max_iterations,
    damping,
    pos_tol,
    rot_tol,
    step_limit,
):
    """Iterative damped least squares IK toward a world-frame target pose.

    Convergence is checked before the first step, so a satisfying seed
    returns with zero iterations.  On failure the best iterate seen is
    returned, scored by max(pos_err/pos_tol, rot_err/rot_tol).

    Returns (q, converged, pos_err, rot_err, iterations).
    """
    n = axes.shape[0]
    q = np.empty(n)
    for i in range(n):
        v = q_seed[i]
        if v < q_min[i]:
            v = q_min[i]
        elif v > q_max[i]:
            v = q_max[i]
        q[i] = v

    best_q = q.copy()
    best_score = np.inf
    best_pos = np.inf
    best_rot = np.inf
    err = np.empty(6)
    iterations = 0
    while True:
        rs, ps = chain_frames(fix_r, fix_p, axes, q, base_r, base_p, ee_r, ee_p)
        p_ee = ps[n + 1]
        r_ee = rs[n + 1]
        err[0] = target_p[0] - p_ee[0]
        err[1] = target_p[1] - p_ee[1]
        err[2] = target_p[2] - p_ee[2]
        rv = rotmat_log(target_r @ r_ee.T)
        err[3] = rv[0]
        err[4] = rv[1]
        err[5] = rv[2]
        pos_err = np.sqrt(err[0] ** 2 + err[1] ** 2 + err[2] ** 2)
        rot_err = np.sqrt(err[3] ** 2 + err[4] ** 2 + err[5] ** 2)

        score = max(pos_err / pos_tol, rot_err / rot_tol)
        if score < best_score:
            best_score = score
            best_pos = pos_err
            best_rot = rot_err
            best_q[:] = q

        if pos_err <= pos_tol and rot_err <= rot_tol:
            return q.copy(), True, pos_err, rot_err, iterations
        if iterations >= max_iterations:
            break

        jac = jacobian_from_frames(rs, ps, axes)
        dq = dls_step(jac, err, damping)
        for i in range(n):
            step = dq[i]
            if step > step_limit:
                step = step_limit
            elif step < -step_limit:
                step = -step_limit
            v = q[i] + step
            if v < q_min[i]:
                v = q_min[i]
            elif v > q_max[i]:
                v = q_max[i]
            q[i] = v
        iterations += 1

    return best_q, False, best_pos, best_rot, iterations


def warmup():
    """Trigger JIT compilation of every kernel on a tiny 1-joint chain.

    Harmless (a few numpy calls) when numba is disabled.  Call once
    before latency-sensitive work; the compiled code is disk-cached so
    later processes pay far less than the first.
    """
    fix_r = np.eye(3)[None, :, :]
    fix_p = np.zeros((1, 3))
    axes = np.array([[0.0, 0.0, 1.0]])
    q = np.zeros(1)
    eye = np.eye(3)
    zero = np.zeros(3)
    off = np.array([0.1, 0.0, 0.0])
    chain_frames(fix_r, fix_p, axes, q, eye, zero, eye, off)
    jac = chain_jacobian(fix_r, fix_p, axes, q, eye, zero, eye, off)
    gram_det(jac)
    dls_step(jac, np.zeros(6), 1e-3)
    dls_ik(
        fix_r,
        fix_p,
        axes,
        np.array([-3.0]),
        np.array([3.0]),
        eye,
        zero,
        eye,
        off,
        eye,
        np.array([0.1, 0.0, 0.0]),
        q,
        2,
        1e-3,
        1e-4,
        1e-3,
        0.2,
    )
