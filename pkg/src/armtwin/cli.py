"""Operator entry points: serve, synth, replay, calibrate."""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import replay as replay_mod
from . import synth as synth_mod
from .errors import ArmTwinError
from .kinematics import manipulability
from .protocol import encode_message, decode_message, make_envelope, hand_frame_payload
from .session import load_session_config, default_session_config
from .model import load_model, bundled_model


def _parse_bind(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ArmTwinError(f"bind address must look like host:port, got {addr!r}")
    return host or "127.0.0.1", int(port)


def _ws_url(addr: str) -> str:
    if addr.startswith(("ws://", "wss://")):
        return addr if addr.endswith("/ws") else addr.rstrip("/") + "/ws"
    host, port = _parse_bind(addr)
    return f"ws://{host}:{port}/ws"


def cmd_serve(args) -> int:
    from .server import serve_forever

    try:
        config = load_session_config(args.config) if args.config else default_session_config()
        if args.feedback is not None:
            config.feedback_mode = args.feedback
        host, port = _parse_bind(args.bind)
    except ArmTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    serve_forever(config, host, port)
    return 0


def _stream_frames(url: str, frames, rate_hz: float) -> int:
    """Connect as hand_source and pace the frames out on the wall clock."""
    from websockets.sync.client import connect

    sent = 0
    with connect(url) as ws:
        ws.send(
            encode_message(
                make_envelope(
                    "hello", 1, time.time_ns(), {"role": "hand_source", "protocol_version": 1}
                )
            )
        )
        ack = decode_message(ws.recv(timeout=10))
        if not ack["payload"]["ok"]:
            print(f"error: server refused: {ack['payload']['message']}", file=sys.stderr)
            return -1
        t0 = time.monotonic()
        for i, frame in enumerate(frames):
            env = make_envelope("hand_frame", 2 + i, frame.t_ns, hand_frame_payload(frame))
            ws.send(encode_message(env))
            sent += 1
            due = t0 + (i + 1) / rate_hz
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
    return sent


def cmd_synth(args) -> int:
    try:
        script = synth_mod.load_script(args.script)
        frames = synth_mod.script_frames(script)
    except ArmTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        out = Path(args.out)
        with out.open("wb") as fh:
            for i, frame in enumerate(frames):
                env = make_envelope("hand_frame", 1 + i, frame.t_ns, hand_frame_payload(frame))
                fh.write(encode_message(env) + b"\n")
        print(f"wrote {len(frames)} frames to {out}")
        return 0
    sent = _stream_frames(_ws_url(args.connect), frames, script.rate_hz)
    if sent < 0:
        return 1
    print(f"streamed {sent} frames at {script.rate_hz:g} Hz")
    return 0


def _replay_config():
    override = os.environ.get("ARMTWIN_CONFIG")
    return load_session_config(override) if override else default_session_config()


def cmd_replay(args) -> int:
    try:
        config = _replay_config()
        traj = replay_mod.load_trajectory(Path(args.path), setup=config.setup)
    except ArmTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.validate:
        report = replay_mod.validate_trajectory(traj, config.setup, config.v_params)
        for line in report.lines():
            print(line)
        if not report.passed and not args.force:
            failed = [c.name for c in report.checks if not c.passed]
            print(f"validation failed ({', '.join(failed)}); use --force to replay anyway")
            return 1

    if args.connect:
        from websockets.sync.client import connect

        with connect(_ws_url(args.connect)) as ws:
            ws.send(
                encode_message(
                    make_envelope(
                        "hello", 1, time.time_ns(), {"role": "controller", "protocol_version": 1}
                    )
                )
            )
            decode_message(ws.recv(timeout=10))
            ws.send(
                encode_message(
                    make_envelope(
                        "control",
                        2,
                        time.time_ns(),
                        {"cmd": "replay", "args": {"path": str(Path(args.path).resolve()), "speed": args.speed}},
                    )
                )
            )
            ack = decode_message(ws.recv(timeout=10))["payload"]
            print(("ok: " if ack["ok"] else "refused: ") + ack["message"])
            return 0 if ack["ok"] else 1

    fid = replay_mod.replay_in_sim(traj, config.setup, speed_scale=args.speed)
    print(
        f"replayed {fid.samples_replayed} samples: max_joint_error={fid.max_joint_error:.3g} rad,"
        f" max_time_jitter={fid.max_time_jitter * 1e3:.2f} ms"
    )
    return 0


def cmd_calibrate(args) -> int:
    try:
        if args.config:
            path = Path(args.config)
            model = load_model(path) if path.suffix in (".yaml", ".yml", ".json") else bundled_model(args.config)
        else:
            model = bundled_model()
    except ArmTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if model.n_joints < 2:
        print("warning: single-joint model, manipulability is the 1x1 Gram determinant")
    rng = np.random.default_rng(args.seed)
    lower, upper = model.limits_lower, model.limits_upper
    values = np.empty(args.samples)
    for i in range(args.samples):
        q = rng.uniform(lower, upper)
        values[i] = manipulability(model, None, q)
    values.sort()
    print(f"manipulability over {args.samples} uniform in-limit samples of {model.name}:")
    for pct in (50.0, 25.0, 10.0, 5.0, 1.0, 0.5):
        print(f"  p{pct:g}: {np.percentile(values, pct):.6g}")
    m_start = float(np.percentile(values, 5.0))
    m_full = float(np.percentile(values, 0.5))
    print(f"suggested singularity thresholds: m_start={m_start:.6g} m_full={m_full:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armtwin", description="hand-to-robot teleoperation twin"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the streaming server")
    p.add_argument("--config", default=None, help="session config file (default: bundled)")
    p.add_argument("--bind", default="127.0.0.1:8765", help="host:port to listen on")
    p.add_argument("--feedback", choices=("none", "live"), default=None)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("synth", help="generate a synthetic hand stream")
    p.add_argument("--script", required=True, help="waypoint script file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--out", default=None, help="write frames to this file")
    group.add_argument("--connect", default=None, help="stream to a server (host:port)")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("replay", help="validate and replay a recording")
    p.add_argument("path", help="trajectory file")
    p.add_argument("--connect", default=None, help="ask a running server to replay it")
    p.add_argument("--validate", action="store_true", help="run validation checks first")
    p.add_argument("--speed", type=float, default=1.0, help="replay speed multiplier")
    p.add_argument("--force", action="store_true", help="replay even if validation fails")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("calibrate", help="suggest singularity thresholds for a model")
    p.add_argument("--config", default=None, help="model file or bundled model name")
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
