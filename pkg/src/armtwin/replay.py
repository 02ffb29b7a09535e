"""Trajectory validation and kinematic replay.

Validation re-derives every safety property from the recorded joint
commands alone, so a file that was edited after recording fails even
though each line still parses.  There is deliberately no velocity
clamp in the live command path, which means an honest recording can
fail the joint_velocity check (an IK catch-up step after a held pose
is the usual culprit); validation exists to surface exactly that
before anyone replays the file on hardware.

Replay steps through the samples on their recorded timestamps (scaled
by 1/speed_scale) and publishes the same robot_state payloads a live
session would.  The twin realizes each recorded command exactly, so
max_joint_error is zero unless clamp_velocity is set, in which case
the safe-replay clamp rewrites steps that exceed a joint's velocity
limit and the report shows how far the file was from replayable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .constraints import SpeedParams
from .errors import ModelMismatchError, TrajectoryError
from .kinematics import forward_kinematics
from .model import ArmSetup
from .session import arm_state_payload
from .trajectory import Trajectory, load_trajectory  # noqa: F401  (re-export)

CONTINUITY_LIMIT_RAD = 0.5
CHECK_NAMES = ("speed", "joint_velocity", "limits", "continuity")


@dataclass(frozen=True)
class CheckResult:
    """One validation check: worst observed value against its limit."""

    name: str
    passed: bool
    worst_value: float
    limit: float
    worst_sample_seq: int
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = (
                f"{c.name}: {status} worst={c.worst_value:.6g} limit={c.limit:.6g}"
                f" at seq={c.worst_sample_seq}"
            )
            if c.detail:
                line += f" ({c.detail})"
            out.append(line)
        return out


@dataclass(frozen=True)
class FidelityReport:
    max_joint_error: float
    max_time_jitter: float
    samples_replayed: int

    def __post_init__(self):
        if self.max_joint_error < 0 or self.max_time_jitter < 0 or self.samples_replayed < 0:
            raise ValueError("fidelity metrics must be non-negative")


def _worst(values):
    """(max value, argmax index); empty input counts as all-clear."""
    if not values:
        return 0.0, 0
    idx = int(np.argmax(values))
    return float(values[idx]), idx


def validate_trajectory(
    traj: Trajectory, setup: ArmSetup, v_params: SpeedParams | None = None
) -> ValidationReport:
    """Recompute speed, joint-velocity, limit and continuity checks."""
    if v_params is None:
        v_params = SpeedParams()
    samples = traj.samples
    if not samples:
        raise TrajectoryError("cannot validate an empty trajectory")
    seqs = [s.seq for s in samples]

    limit_vals, vel_vals, speed_vals, cont_vals = [], [], [], []
    limit_seq, vel_seq, speed_seq, cont_seq = [], [], [], []

    for name in traj.arm_names:
        arm = setup[name]
        qs = np.array([s.arms[name].q_cmd for s in samples], dtype=np.float64)

        lower = arm.model.limits_lower
        upper = arm.model.limits_upper
        for k, q in enumerate(qs):
            margin = float(max(np.max(q - upper), np.max(lower - q)))
            limit_vals.append(margin)
            limit_seq.append(seqs[k])

        fk_pos = np.empty((len(qs), 3))
        for k, q in enumerate(qs):
            fk_pos[k] = forward_kinematics(arm.model, arm.base_pose, q)[-1].position

        vel_limits = arm.model.velocity_limits
        for k in range(1, len(qs)):
            dt = (samples[k].t_ns - samples[k - 1].t_ns) / 1e9
            dq = np.abs(qs[k] - qs[k - 1])
            if dt <= 0.0:
                ratio = 0.0 if not np.any(dq > 0) else float("inf")
                step = float(np.linalg.norm(fk_pos[k] - fk_pos[k - 1]))
                speed = 0.0 if step == 0.0 else float("inf")
            else:
                ratio = float(np.max(dq / dt / vel_limits))
                speed = float(np.linalg.norm(fk_pos[k] - fk_pos[k - 1]) / dt)
            vel_vals.append(ratio)
            vel_seq.append(seqs[k])
            speed_vals.append(speed)
            speed_seq.append(seqs[k])
            cont_vals.append(float(np.max(dq)))
            cont_seq.append(seqs[k])

    def check(name, vals, seq_of, limit, detail=""):
        worst, idx = _worst(vals)
        return CheckResult(
            name=name,
            passed=bool(worst <= limit),
            worst_value=worst,
            limit=limit,
            worst_sample_seq=seq_of[idx] if seq_of else seqs[0],
            detail=detail,
        )

    checks = (
        check("speed", speed_vals, speed_seq, v_params.v_max, "ee m/s from FK between samples"),
        check("joint_velocity", vel_vals, vel_seq, 1.0, "max |dq|/dt over its joint's limit"),
        check("limits", limit_vals, limit_seq, 0.0, "max excursion past a position limit, rad"),
        check("continuity", cont_vals, cont_seq, CONTINUITY_LIMIT_RAD, "max per-step |dq|, rad"),
    )
    return ValidationReport(checks=checks)


def _check_setup(traj: Trajectory, setup: ArmSetup):
    hashes = setup.hashes()
    for name, digest in traj.header.model_hash.items():
        if hashes.get(name) != digest:
            raise ModelMismatchError(
                f"trajectory arm {name!r} does not match the loaded setup"
            )


def replay_states(traj: Trajectory, setup: ArmSetup, feedback_mode: str = "live"):
    """Yield (t_ns, robot_state payload) per sample, link poses rebuilt by FK.

    Clamping is not applied here; this is the faithful wire image of
    the file, shared by the server's replay command and the CLI.
    """
    _check_setup(traj, setup)
    for sample in traj.samples:
        arms = []
        for name in traj.arm_names:
            arm = setup[name]
            rec = sample.arms[name]
            q = np.asarray(rec.q_cmd, dtype=np.float64)
            link_poses = forward_kinematics(arm.model, arm.base_pose, q)
            arms.append(
                arm_state_payload(
                    name, arm.model, link_poses, q, rec.gripper, rec.ik_ok, sample.constraint[name]
                )
            )
        yield sample.t_ns, {"arms": arms, "recording": "idle", "feedback_mode": feedback_mode}


def replay_in_sim(
    traj: Trajectory,
    setup: ArmSetup,
    speed_scale: float = 1.0,
    sink=None,
    clamp_velocity: bool = False,
) -> FidelityReport:
    """Replay on the recorded clock and measure how faithfully it ran.

    `sink(t_ns, payload)` receives every robot_state.  speed_scale=2
    halves the wall-clock duration.  With clamp_velocity the safe-mode
    clamp limits each step to velocity_limit * dt per joint and
    max_joint_error reports the largest correction; without it the
    replayed command is the recorded command, exactly.
    """
    if speed_scale <= 0:
        raise ValueError("speed_scale must be > 0")
    if not traj.samples:
        raise TrajectoryError("cannot replay an empty trajectory")
    _check_setup(traj, setup)

    prev_q = {}
    prev_t = None
    max_err = 0.0
    max_jitter = 0.0
    count = 0
    t_rec0 = traj.samples[0].t_ns
    t_wall0 = time.monotonic()
    for sample in traj.samples:
        due = (sample.t_ns - t_rec0) / 1e9 / speed_scale
        delay = t_wall0 + due - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        max_jitter = max(max_jitter, abs((time.monotonic() - t_wall0) - due))
        arms = []
        for name in traj.arm_names:
            arm = setup[name]
            rec = sample.arms[name]
            q = np.asarray(rec.q_cmd, dtype=np.float64)
            realized = q
            if clamp_velocity and name in prev_q:
                dt = (sample.t_ns - prev_t) / 1e9
                step = np.clip(
                    q - prev_q[name],
                    -arm.model.velocity_limits * dt,
                    arm.model.velocity_limits * dt,
                )
                realized = arm.model.clamp(prev_q[name] + step)
            max_err = max(max_err, float(np.max(np.abs(realized - q))))
            prev_q[name] = realized
            if sink is not None:
                # the published state shows what the twin realized, which
                # in clamp mode can differ from the file
                link_poses = forward_kinematics(arm.model, arm.base_pose, realized)
                arms.append(
                    arm_state_payload(
                        name, arm.model, link_poses, realized, rec.gripper, rec.ik_ok, sample.constraint[name]
                    )
                )
        prev_t = sample.t_ns
        if sink is not None:
            sink(sample.t_ns, {"arms": arms, "recording": "idle", "feedback_mode": "live"})
        count += 1
    return FidelityReport(
        max_joint_error=max_err, max_time_jitter=max_jitter, samples_replayed=count
    )
