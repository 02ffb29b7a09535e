import numpy as np
import pytest

import oracles
from armtwin.geometry import Pose, matrix_to_quat, quat_to_matrix
from armtwin.kinematics import ee_pose, forward_kinematics, jacobian, manipulability
from armtwin.model import bundled_model, parse_model


def one_joint_model():
    return parse_model(
        {
            "name": "one",
            "joints": [
                {
                    "name": "j",
                    "axis": [0, 0, 1],
                    "origin": {"xyz": [0, 0, 0], "rpy": [0, 0, 0]},
                    "limits": {"position": [-3.2, 3.2], "velocity": 10.0},
                }
            ],
            "ee_offset": {"xyz": [0.3, 0, 0], "rpy": [0, 0, 0]},
            "gripper": {"open": 0.07, "closed": 0.01},
        }
    )


def test_single_z_joint_quarter_turn():
    model = one_joint_model()
    assert np.allclose(ee_pose(model, None, [0.0]).position, [0.3, 0, 0], atol=1e-12)
    spun = ee_pose(model, None, [np.pi / 2])
    assert np.allclose(spun.position, [0.0, 0.3, 0.0], atol=1e-9)


def test_single_joint_jacobian_column():
    model = one_joint_model()
    J = jacobian(model, None, [0.0])
    assert np.allclose(J[:, 0], [0.0, 0.3, 0.0, 0.0, 0.0, 1.0], atol=1e-12)


def test_bundled_home_pose():
    # straight-line sum of the config's x and z origin offsets
    # (independent oracle composition gives the identical values)
    ee = ee_pose(bundled_model(), None, np.zeros(6))
    assert np.allclose(ee.position, [0.536494, 0.0, 0.42705], atol=1e-12)
    assert np.allclose(ee.orientation, [1, 0, 0, 0], atol=1e-12)


def test_fk_matches_homogeneous_oracle():
    doc = oracles.bundled_model_doc()
    model = bundled_model()
    rng = np.random.default_rng(21)
    for _ in range(50):
        q = rng.uniform(model.limits_lower, model.limits_upper)
        ours = forward_kinematics(model, None, q)
        ref = oracles.fk_homog(doc, q)
        assert len(ours) == model.n_joints + 2
        for pose, T in zip(ours, ref):
            assert np.linalg.norm(pose.position - T[:3, 3]) < 1e-9
            assert np.abs(quat_to_matrix(pose.orientation) - T[:3, :3]).max() < 1e-9
            assert abs(np.linalg.norm(pose.orientation) - 1.0) < 1e-9


def test_fk_with_base_pose():
    doc = oracles.bundled_model_doc()
    model = bundled_model()
    rng = np.random.default_rng(22)
    for _ in range(10):
        R = oracles.random_rotation(rng)
        p = rng.normal(size=3)
        base = Pose(p, matrix_to_quat(R))
        q = rng.uniform(model.limits_lower, model.limits_upper)
        ours = ee_pose(model, base, q)
        ref = oracles.fk_homog(doc, q, base=(R, p))[-1]
        assert np.linalg.norm(ours.position - ref[:3, 3]) < 1e-9


def test_jacobian_matches_central_differences():
    doc = oracles.bundled_model_doc()
    model = bundled_model()
    rng = np.random.default_rng(23)
    for _ in range(25):
        q = rng.uniform(model.limits_lower, model.limits_upper)
        J = jacobian(model, None, q)
        J_fd = oracles.numeric_jacobian(doc, q)
        assert np.abs(J - J_fd).max() < 1e-5


def test_manipulability_matches_lu_oracle():
    model = bundled_model()
    rng = np.random.default_rng(24)
    for _ in range(25):
        q = rng.uniform(model.limits_lower, model.limits_upper)
        m = manipulability(model, None, q)
        ref = max(oracles.det_lu(jacobian(model, None, q).T @ jacobian(model, None, q)), 0.0)
        assert m >= 0.0
        assert abs(m - ref) <= 1e-9 * max(abs(ref), 1e-12)


def test_manipulability_invariant_under_base_yaw():
    model = bundled_model()
    rng = np.random.default_rng(25)
    base = Pose.from_xyz_rpy([0.2, -0.4, 0.1], [0, 0, 1.2])
    for _ in range(10):
        q = rng.uniform(model.limits_lower, model.limits_upper)
        a = manipulability(model, None, q)
        b = manipulability(model, base, q)
        assert abs(a - b) <= 1e-9 * max(a, 1e-12)


def test_planar_2r_extended_is_singular():
    model = parse_model(oracles.planar_2r_doc())
    m = manipulability(model, None, np.zeros(2))
    assert m < 1e-12
    # the structural reason: both positional columns point along +y
    J = jacobian(model, None, np.zeros(2))
    cross = np.cross(J[:3, 0], J[:3, 1])
    assert np.linalg.norm(cross) < 1e-12
    # a bent elbow decouples them again
    J_bent = jacobian(model, None, [0.0, 1.0])
    assert np.linalg.norm(np.cross(J_bent[:3, 0], J_bent[:3, 1])) > 1e-3


def test_bundled_home_is_wrist_singular():
    # forearm_roll and wrist_rotate are collinear at the zero pose
    assert manipulability(bundled_model(), None, np.zeros(6)) < 1e-12


def test_dimension_mismatch_rejected():
    model = bundled_model()
    with pytest.raises(ValueError):
        forward_kinematics(model, None, np.zeros(3))
    with pytest.raises(ValueError):
        jacobian(model, None, np.zeros(7))
    with pytest.raises(ValueError):
        forward_kinematics(model, None, np.array([np.nan, 0, 0, 0, 0, 0]))
