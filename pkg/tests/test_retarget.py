import math

import numpy as np
import pytest

import oracles
from armtwin import synth
from armtwin.errors import DegenerateHandError
from armtwin.geometry import (
    Pose,
    matrix_to_quat,
    quat_rotate,
    rotation_angle_between,
)
from armtwin.retarget import (
    GripperState,
    Hand,
    HandFrame,
    RetargetParams,
    compute_hand_basis,
    detect_end_gesture,
    detect_start_gesture,
    frame_palms_up,
    gripper_update,
    hand_to_target,
    knuckle_centroid,
    palm_normal,
    retarget_pose,
    transform_hand,
)


def random_hand(rng, side="right", pinch=0.06):
    rot = oracles.random_rotation(rng)
    pos = rng.uniform(-0.5, 0.5, size=3)
    return synth.hand_at(side, pos, matrix_to_quat(rot), pinch)


def test_centroid_is_knuckle_mean():
    rng = np.random.default_rng(40)
    hand = random_hand(rng)
    want = np.mean([hand.knuckles[k] for k in ("index", "middle", "ring", "little")], axis=0)
    assert np.allclose(knuckle_centroid(hand), want, atol=1e-12)


def test_basis_matches_cross_product_reference():
    rng = np.random.default_rng(41)
    for _ in range(25):
        hand = random_hand(rng, side=("left", "right")[int(rng.integers(2))])
        origin, ref = oracles.hand_basis_reference(
            hand.knuckles["index"],
            hand.knuckles["middle"],
            hand.knuckles["ring"],
            hand.knuckles["little"],
            hand.wrist.position,
        )
        basis = compute_hand_basis(hand)
        assert np.allclose(basis.position, origin, atol=1e-12)
        got = np.column_stack(
            [quat_rotate(basis.orientation, e) for e in np.eye(3)]
        )
        assert np.allclose(got, ref, atol=1e-9)
        # orthonormal, right-handed
        assert np.allclose(got.T @ got, np.eye(3), atol=1e-9)
        assert np.linalg.det(got) > 0.99


def test_rigid_motion_equivariance():
    # moving the whole hand by a rigid transform moves the retargeted
    # pose by exactly the same transform
    rng = np.random.default_rng(42)
    for _ in range(10):
        hand = random_hand(rng)
        motion = Pose(rng.uniform(-1, 1, size=3), matrix_to_quat(oracles.random_rotation(rng)))
        before = retarget_pose(hand)
        after = retarget_pose(transform_hand(hand, motion))
        expect = motion.compose(before)
        assert np.allclose(after.position, expect.position, atol=1e-9)
        assert rotation_angle_between(after.orientation, expect.orientation) < 1e-7


def test_thumb_shift_magnitude_and_direction():
    rng = np.random.default_rng(43)
    hand = random_hand(rng)
    params = RetargetParams(thumb_shift=0.02, pitch_offset=0.0)
    pose = retarget_pose(hand, params)
    centroid = knuckle_centroid(hand)
    offset = pose.position - centroid
    assert abs(np.linalg.norm(offset) - 0.02) < 1e-12
    toward_thumb = hand.thumb_tip - centroid
    cos = np.dot(offset, toward_thumb) / (np.linalg.norm(offset) * np.linalg.norm(toward_thumb))
    assert cos > 1.0 - 1e-9


def test_pitch_offset_rotates_about_palm_u():
    rng = np.random.default_rng(44)
    hand = random_hand(rng)
    flat = retarget_pose(hand, RetargetParams(pitch_offset=0.0))
    basis = compute_hand_basis(hand)
    assert rotation_angle_between(flat.orientation, basis.orientation) < 1e-9

    pitched = retarget_pose(hand, RetargetParams(pitch_offset=0.26))
    assert abs(rotation_angle_between(pitched.orientation, basis.orientation) - 0.26) < 1e-9
    # the palm's across-axis is unchanged by a rotation about itself
    u_basis = quat_rotate(basis.orientation, np.array([1.0, 0.0, 0.0]))
    u_pitch = quat_rotate(pitched.orientation, np.array([1.0, 0.0, 0.0]))
    assert np.allclose(u_basis, u_pitch, atol=1e-9)


def test_collinear_landmarks_rejected():
    hand = Hand(
        side="right",
        wrist=Pose([-0.1, 0.0, 0.0], [1, 0, 0, 0]),
        knuckles={
            "index": np.array([0.03, 0.0, 0.0]),
            "middle": np.array([0.01, 0.0, 0.0]),
            "ring": np.array([-0.01, 0.0, 0.0]),
            "little": np.array([-0.03, 0.0, 0.0]),
        },
        thumb_tip=np.array([0.05, 0.01, 0.0]),
        index_tip=np.array([0.05, 0.05, 0.0]),
    )
    with pytest.raises(DegenerateHandError):
        compute_hand_basis(hand)


def test_hand_validation():
    rng = np.random.default_rng(45)
    good = random_hand(rng)
    with pytest.raises(ValueError):
        Hand(
            side="middle",
            wrist=good.wrist,
            knuckles=good.knuckles,
            thumb_tip=good.thumb_tip,
            index_tip=good.index_tip,
        )
    with pytest.raises(ValueError):
        Hand(
            side="right",
            wrist=good.wrist,
            knuckles={"index": good.knuckles["index"]},
            thumb_tip=good.thumb_tip,
            index_tip=good.index_tip,
        )
    with pytest.raises(ValueError):
        HandFrame(t_ns=0, hands={"left": good})  # keyed left, claims right


def test_palm_normal_side_convention():
    # palm-up construction gives a +Z normal for either side
    for side in ("left", "right"):
        hand = synth.hand_at(side, (0.4, 0.0, 0.3), synth.quat_for_waypoint(synth.palm_up_rpy()), 0.06)
        assert np.dot(palm_normal(hand), [0, 0, 1]) > 0.95
        down = synth.hand_at(side, (0.4, 0.0, 0.3), synth.quat_for_waypoint(synth.palm_down_rpy()), 0.06)
        assert np.dot(palm_normal(down), [0, 0, 1]) < -0.95


def test_gripper_hysteresis_band():
    params = RetargetParams(grip_close_threshold=0.04, grip_hysteresis=0.005)
    closed = GripperState("closed")
    opened = GripperState("open")
    z = np.zeros(3)

    def at(d, prev):
        return gripper_update(prev, z, [d, 0, 0], params).state

    assert at(0.02, opened) == "closed"
    assert at(0.06, closed) == "open"
    # inside the band the previous state sticks, from either side
    assert at(0.038, opened) == "open"
    assert at(0.038, closed) == "closed"
    assert at(0.044, closed) == "closed"
    # oscillation entirely inside the band never toggles
    state = closed
    for d in [0.036, 0.044, 0.037, 0.043, 0.041, 0.039] * 4:
        state = gripper_update(state, z, [d, 0, 0], params)
        assert state.state == "closed"


def test_hand_to_target_stamps_and_grips():
    rng = np.random.default_rng(46)
    hand = random_hand(rng, pinch=0.01)
    target, grip = hand_to_target(hand, GripperState("open"), source_seq=17, source_t=123)
    assert grip.state == "closed"
    assert target.gripper == "closed"
    assert target.source_seq == 17 and target.source_t == 123
    assert np.allclose(target.pose.position, retarget_pose(hand).position, atol=1e-12)


def test_start_gesture_spheres():
    anchors = {
        "left": np.array([0.30, 0.25, 0.25]),
        "right": np.array([0.30, -0.25, 0.25]),
    }
    q_down = synth.quat_for_waypoint(synth.palm_down_rpy())
    inside = HandFrame(
        t_ns=0,
        hands={
            side: synth.hand_at(side, anchors[side] + [0.0, 0.0, 0.02], q_down, 0.06)
            for side in anchors
        },
    )
    assert detect_start_gesture(inside, anchors)

    one_out = HandFrame(
        t_ns=0,
        hands={
            "left": synth.hand_at("left", anchors["left"], q_down, 0.06),
            "right": synth.hand_at("right", anchors["right"] + [0.2, 0.0, 0.0], q_down, 0.06),
        },
    )
    assert not detect_start_gesture(one_out, anchors)

    missing = HandFrame(t_ns=0, hands={"left": inside.hands["left"]})
    assert not detect_start_gesture(missing, anchors)
    assert not detect_start_gesture(inside, {})


def _frames_palms(pattern, rate_hz=30.0):
    """HandFrames from a per-frame True/False palms-up pattern."""
    q_up = synth.quat_for_waypoint(synth.palm_up_rpy())
    q_down = synth.quat_for_waypoint(synth.palm_down_rpy())
    frames = []
    for i, up in enumerate(pattern):
        t_ns = int(round(i * 1e9 / rate_hz))
        q = q_up if up else q_down
        hands = {
            "left": synth.hand_at("left", (0.3, 0.2, 0.3), q, 0.06),
            "right": synth.hand_at("right", (0.3, -0.2, 0.3), q, 0.06),
        }
        frames.append(HandFrame(t_ns=t_ns, seq=i + 1, hands=hands))
    return frames


def test_end_gesture_requires_full_hold():
    rate = 30.0
    n_31 = int(3.1 * rate) + 1
    frames = _frames_palms([True] * n_31, rate)
    assert detect_end_gesture(frames, frames[-1].t_ns)

    n_29 = int(2.9 * rate) + 1
    short = _frames_palms([True] * n_29, rate)
    assert not detect_end_gesture(short, short[-1].t_ns)


def test_end_gesture_gap_resets_hold():
    rate = 30.0
    n_31 = int(3.1 * rate) + 1
    pattern = [True] * n_31
    pattern[n_31 // 2] = False
    frames = _frames_palms(pattern, rate)
    assert not detect_end_gesture(frames, frames[-1].t_ns)


def test_frame_without_hands_is_not_palms_up():
    assert not frame_palms_up(HandFrame(t_ns=0))
    mixed = _frames_palms([True])[0]
    # tilt one palm out of the cone: palm-down left hand
    mixed.hands["left"] = synth.hand_at(
        "left", (0.3, 0.2, 0.3), synth.quat_for_waypoint(synth.palm_down_rpy()), 0.06
    )
    assert not frame_palms_up(mixed)


def test_palm_cone_boundary():
    # a palm tilted just inside 25 degrees passes, just outside fails
    for tilt, want in ((math.radians(24.0), True), (math.radians(26.0), False)):
        q = synth.quat_for_waypoint([synth.palm_up_rpy()[0] + tilt, 0.0, 0.0])
        hand = synth.hand_at("right", (0.3, -0.2, 0.3), q, 0.06)
        frame = HandFrame(t_ns=0, hands={"right": hand})
        assert frame_palms_up(frame) is want
