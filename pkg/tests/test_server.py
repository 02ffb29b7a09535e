import json
import time

import numpy as np
import pytest
from websockets.exceptions import ConnectionClosed, InvalidStatus
from websockets.sync.client import connect

from armtwin import protocol, synth
from armtwin.protocol import decode_message, encode_message, hand_frame_payload, make_envelope
from armtwin.server import ArmTwinServer
from armtwin.session import Session, default_session_config
from armtwin.trajectory import load_trajectory


@pytest.fixture()
def server(tmp_path):
    config = default_session_config()
    config.storage_dir = tmp_path
    srv = ArmTwinServer(config, host="127.0.0.1", port=0).start_background()
    yield srv
    srv.stop_background()


def send(ws, mtype, seq, payload, t_ns=0):
    ws.send(encode_message(make_envelope(mtype, seq, t_ns, payload)))


def recv(ws, timeout=3.0):
    return decode_message(ws.recv(timeout=timeout))


def hello(ws, role, seq=1):
    send(ws, "hello", seq, {"role": role, "protocol_version": protocol.PROTOCOL_VERSION})
    ack = recv(ws)
    assert ack["type"] == "ack"
    return ack


def script_frames(server, count=None):
    frames = synth.script_frames(synth.parse_script(synth.slow_script_doc(server.config.anchors["right"])))
    return frames if count is None else frames[:count]


def assert_refused_then_closed(ws, match=None):
    ack = recv(ws)
    assert ack["type"] == "ack" and ack["payload"]["ok"] is False
    if match:
        assert match in ack["payload"]["message"]
    with pytest.raises(ConnectionClosed) as closed:
        ws.recv(timeout=3.0)
    assert closed.value.rcvd.code == 1008
    return ack


def test_non_ws_path_is_404(server):
    bad = server.url.replace("/ws", "/metrics")
    with pytest.raises(InvalidStatus) as err:
        connect(bad, open_timeout=3)
    assert err.value.response.status_code == 404


def test_first_message_must_be_hello(server):
    with connect(server.url) as ws:
        send(ws, "control", 1, {"cmd": "reset", "args": {}})
        assert_refused_then_closed(ws, "hello")


def test_hello_gets_ack_and_repeat_hello_refused(server):
    with connect(server.url) as ws:
        ack = hello(ws, "viewer")
        assert ack["payload"]["ok"] is True
        assert "viewer" in ack["payload"]["message"]
        send(ws, "hello", 2, {"role": "viewer", "protocol_version": 1})
        assert_refused_then_closed(ws, "greeted")


def test_single_hand_source_slot(server):
    with connect(server.url) as first:
        assert hello(first, "hand_source")["payload"]["ok"] is True
        with connect(server.url) as second:
            send(second, "hello", 1, {"role": "hand_source", "protocol_version": 1})
            assert_refused_then_closed(second, "already connected")
        assert server.stats.refused_hand_sources == 1
        # the first source is unaffected and can still stream
        frame = script_frames(server, 1)[0]
        send(first, "hand_frame", 2, hand_frame_payload(frame), t_ns=frame.t_ns)
        deadline = time.monotonic() + 2.0
        while server.stats.frames_in < 1:
            assert time.monotonic() < deadline
            time.sleep(0.01)
    # after disconnect the slot frees up
    deadline = time.monotonic() + 2.0
    while server._hand_source is not None:
        assert time.monotonic() < deadline
        time.sleep(0.01)
    with connect(server.url) as third:
        assert hello(third, "hand_source")["payload"]["ok"] is True


def test_inbound_seq_must_strictly_increase(server):
    with connect(server.url) as ws:
        hello(ws, "controller", seq=5)
        send(ws, "control", 5, {"cmd": "reset", "args": {}})
        assert_refused_then_closed(ws, "seq must increase")


def test_stream_reaches_viewers_not_controllers(server):
    with connect(server.url) as source, connect(server.url) as viewer, connect(server.url) as controller:
        hello(source, "hand_source")
        hello(viewer, "viewer")
        hello(controller, "controller")

        frames = script_frames(server, 12)
        for i, frame in enumerate(frames):
            send(source, "hand_frame", i + 2, hand_frame_payload(frame), t_ns=frame.t_ns)
            time.sleep(1 / 30)

        states = []
        try:
            while True:
                msg = recv(viewer, timeout=0.5)
                if msg["type"] == "robot_state":
                    states.append(msg)
        except TimeoutError:
            pass
        assert len(states) >= 8
        seqs = [m["seq"] for m in states]
        assert seqs == sorted(seqs)
        (arm,) = states[-1]["payload"]["arms"]
        assert arm["name"] == "right_arm" and len(arm["q_cmd"]) == 6
        assert states[-1]["payload"]["recording"] == "idle"

        with pytest.raises(TimeoutError):
            controller.recv(timeout=0.4)
        assert server.stats.frames_in == 12


def test_control_acked_for_any_role(server):
    with connect(server.url) as ws:
        hello(ws, "viewer")
        send(ws, "control", 2, {"cmd": "get_model", "args": {}})
        ack = recv(ws)
        assert ack["payload"]["ok"] is True and ack["payload"]["for_seq"] == 2
        doc = json.loads(ack["payload"]["message"])
        assert doc["arms"][0]["name"] == "right_arm"

        send(ws, "control", 3, {"cmd": "stop_recording", "args": {}})
        ack = recv(ws)
        assert ack["payload"]["ok"] is False and "not recording" in ack["payload"]["message"]

        send(ws, "control", 4, {"cmd": "set_feedback", "args": {"mode": "none"}})
        assert recv(ws)["payload"]["ok"] is True
        assert server.session.feedback_mode == "none"


def test_viewer_cannot_stream_hands(server):
    with connect(server.url) as ws:
        hello(ws, "viewer")
        frame = script_frames(server, 1)[0]
        send(ws, "hand_frame", 2, hand_frame_payload(frame))
        assert_refused_then_closed(ws, "cannot stream hands")


def test_malformed_message_refused(server):
    with connect(server.url) as ws:
        hello(ws, "controller")
        ws.send('{"type":"control","seq":')
        assert_refused_then_closed(ws)
    assert server.stats.protocol_errors >= 1


def make_recording(config):
    """Record a short clean segment directly through a session."""
    session = Session(config)
    session.handle_control("set_labels", {"task": "served"})
    session.handle_control("start_recording", {"immediate": True})
    doc = synth.slow_script_doc(config.anchors["right"])
    for frame in synth.script_frames(synth.parse_script(doc))[:90]:
        session.tick(frame)
    ok, msg = session.handle_control("stop_recording", {})
    assert ok
    return msg.removeprefix("saved ")


def test_replay_control_streams_recorded_states(server, tmp_path):
    path = make_recording(server.config)
    n_samples = len(load_trajectory(path).samples)

    with connect(server.url) as viewer, connect(server.url) as controller:
        hello(viewer, "viewer")
        hello(controller, "controller")
        send(controller, "control", 2, {"cmd": "replay", "args": {"path": path, "speed": 20.0}})
        ack = recv(controller)
        assert ack["payload"]["ok"] is True
        assert f"replaying {n_samples} samples" in ack["payload"]["message"]

        # immediately asking again collides with the running replay
        send(controller, "control", 3, {"cmd": "replay", "args": {"path": path, "speed": 20.0}})
        ack2 = recv(controller)
        assert ack2["payload"]["ok"] is False and "already running" in ack2["payload"]["message"]

        states = []
        try:
            while True:
                msg = recv(viewer, timeout=1.0)
                if msg["type"] == "robot_state":
                    states.append(msg)
        except TimeoutError:
            pass
        assert len(states) == n_samples
        # replayed states carry the recorded commands in order
        recorded = load_trajectory(path)
        got_q = np.array([m["payload"]["arms"][0]["q_cmd"] for m in states])
        want_q = np.array([s.arms["right_arm"].q_cmd for s in recorded.samples])
        assert np.array_equal(got_q, want_q)


def test_replay_refuses_missing_file(server):
    with connect(server.url) as ws:
        hello(ws, "controller")
        send(ws, "control", 2, {"cmd": "replay", "args": {"path": "/nonexistent.traj.jsonl"}})
        ack = recv(ws)
        assert ack["payload"]["ok"] is False and "cannot load" in ack["payload"]["message"]
        send(ws, "control", 3, {"cmd": "replay", "args": {}})
        assert recv(ws)["payload"]["ok"] is False
