"""Streaming endpoint: one websocket path, one session, many clients.

Every connection starts with a hello naming its role.  Exactly one
hand_source may drive the session at a time; a second is refused with
an ack and closed.  Viewers receive every robot_state; a viewer that
cannot drain its queue is closed rather than silently skipped, so the
"every robot_state" contract stays honest.  Controllers (and anyone
else) may send control messages, which are always acked.

All session interaction happens on one asyncio task: connection
handlers only deposit the latest hand frame into a single slot and the
tick loop consumes it at the session rate, so frames arriving faster
than the tick rate collapse to the newest one.  A replay control
command starts a paced producer that temporarily replaces the live
broadcast with recorded robot_state messages.
"""

from __future__ import annotations

import asyncio
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from http import HTTPStatus
from pathlib import Path

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from . import protocol, replay
from .errors import ArmTwinError, ProtocolError, UnknownMessageType
from .session import Session, SessionConfig

log = logging.getLogger(__name__)

OUTBOX_LIMIT = 256
STATS_WINDOW = 4096


@dataclass
class ServerStats:
    tick_ms: deque = field(default_factory=lambda: deque(maxlen=STATS_WINDOW))
    emit_latency_ms: deque = field(default_factory=lambda: deque(maxlen=STATS_WINDOW))
    emit_t_ns: deque = field(default_factory=lambda: deque(maxlen=STATS_WINDOW))
    frames_in: int = 0
    ticks: int = 0
    refused_hand_sources: int = 0
    protocol_errors: int = 0
    slow_viewers_closed: int = 0


class _Client:
    """Per-connection bookkeeping owned by that connection's handler."""

    def __init__(self, ws):
        self.ws = ws
        self.role: str | None = None
        self.out_seq = 0
        self.last_in_seq: int | None = None
        self.outbox: asyncio.Queue = asyncio.Queue(maxsize=OUTBOX_LIMIT)
        self.closed = False

    def next_seq(self) -> int:
        self.out_seq += 1
        return self.out_seq

    def enqueue(self, mtype: str, payload: dict, recv_ns: int | None = None) -> bool:
        """Queue one outbound message; False means the client is too slow."""
        if self.closed:
            return False
        env = protocol.make_envelope(mtype, self.next_seq(), time.time_ns(), payload)
        try:
            self.outbox.put_nowait((protocol.encode_message(env), recv_ns))
        except asyncio.QueueFull:
            self.closed = True
            return False
        return True


class ArmTwinServer:
    """Owns a Session and serves it over the wire protocol."""

    def __init__(self, config: SessionConfig, host: str = "127.0.0.1", port: int = 8765):
        self.config = config
        self.session = Session(config)
        self.host = host
        self.port = port
        self.stats = ServerStats()
        self._clients: set[_Client] = set()
        self._hand_source: _Client | None = None
        self._pending: tuple | None = None  # (HandFrame, recv_ns), latest wins
        self._frame_event: asyncio.Event | None = None
        self._replay_task: asyncio.Task | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._stop: asyncio.Event | None = None
        self._thread: threading.Thread | None = None
        self._ready = threading.Event()
        self._thread_error: BaseException | None = None

    # ------------------------------------------------------------ lifecycle

    async def run(self):
        """Serve until stop() is called; updates self.port when bound to 0."""
        self._loop = asyncio.get_running_loop()
        self._stop = asyncio.Event()
        self._frame_event = asyncio.Event()

        def process_request(connection, request):
            if request.path != protocol.WS_PATH:
                return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")
            return None

        async with ws_serve(
            self._handler, self.host, self.port, process_request=process_request
        ) as server:
            self.port = server.sockets[0].getsockname()[1]
            tick_task = asyncio.create_task(self._tick_loop())
            log.info("serving on ws://%s:%d%s", self.host, self.port, protocol.WS_PATH)
            self._ready.set()
            try:
                await self._stop.wait()
            finally:
                tick_task.cancel()
                if self._replay_task is not None:
                    self._replay_task.cancel()
                for client in list(self._clients):
                    client.closed = True
                    await client.ws.close()

    def stop(self):
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set)

    def start_background(self) -> "ArmTwinServer":
        """Run the server on a daemon thread; returns once it is accepting."""

        def main():
            try:
                asyncio.run(self.run())
            except BaseException as exc:  # surfaced via wait below
                self._thread_error = exc
                self._ready.set()

        self._thread = threading.Thread(target=main, name="armtwin-server", daemon=True)
        self._thread.start()
        if not self._ready.wait(timeout=15):
            raise RuntimeError("server did not start within 15 s")
        if self._thread_error is not None:
            raise RuntimeError(f"server failed to start: {self._thread_error}")
        return self

    def stop_background(self):
        self.stop()
        if self._thread is not None:
            self._thread.join(timeout=15)
            self._thread = None

    @property
    def url(self) -> str:
        return f"ws://{self.host}:{self.port}{protocol.WS_PATH}"

    # ------------------------------------------------------------- tick loop

    async def _tick_loop(self):
        # frame-driven with a rate cap: a new frame is processed as soon
        # as it arrives unless that would exceed the session rate, in
        # which case we sleep out the remainder and take whatever frame
        # is newest by then (latest wins).  The 0.9 slack keeps a source
        # at exactly the session rate from being paced by our own sleep
        # overshoot, which would slowly push ticks behind the stream.
        period = 1.0 / self.config.rate_hz
        loop = asyncio.get_running_loop()
        last_tick = float("-inf")
        while True:
            await self._frame_event.wait()
            wait = last_tick + 0.9 * period - loop.time()
            if wait > 0:
                await asyncio.sleep(wait)
            if self._pending is None:
                self._frame_event.clear()
                continue
            frame, recv_ns = self._pending
            self._pending = None
            self._frame_event.clear()
            last_tick = loop.time()
            t0 = time.perf_counter()
            result = self.session.tick(frame)
            self.stats.tick_ms.append((time.perf_counter() - t0) * 1e3)
            self.stats.ticks += 1
            if result.dropped:
                continue
            if self._replay_task is None:
                payload = self.session.robot_state_payload(result)
                self._broadcast_state(payload, recv_ns)

    def _broadcast_state(self, payload: dict, recv_ns: int | None):
        for client in list(self._clients):
            if client.role != "viewer":
                continue
            if not client.enqueue("robot_state", payload, recv_ns):
                self.stats.slow_viewers_closed += 1
                asyncio.ensure_future(client.ws.close(1008, "outbound queue overflow"))

    # ----------------------------------------------------------- connections

    async def _handler(self, ws):
        client = _Client(ws)
        sender = asyncio.create_task(self._sender(client))
        try:
            await self._serve_client(client)
        except ConnectionClosed:
            pass
        finally:
            self._clients.discard(client)
            if self._hand_source is client:
                self._hand_source = None
            client.closed = True
            sender.cancel()

    async def _sender(self, client: _Client):
        try:
            while True:
                data, recv_ns = await client.outbox.get()
                await client.ws.send(data)
                if recv_ns is not None:
                    now = time.time_ns()
                    self.stats.emit_latency_ms.append((now - recv_ns) / 1e6)
                    self.stats.emit_t_ns.append(now)
        except (ConnectionClosed, asyncio.CancelledError):
            pass

    async def _refuse(self, client: _Client, for_seq: int, message: str, close: bool = True):
        self.stats.protocol_errors += 1
        try:
            env = protocol.make_envelope(
                "ack",
                client.next_seq(),
                time.time_ns(),
                {"for_seq": for_seq, "ok": False, "message": message},
            )
            await client.ws.send(protocol.encode_message(env))
        except ConnectionClosed:
            return
        if close:
            client.closed = True
            await client.ws.close(1008, "protocol violation")

    async def _serve_client(self, client: _Client):
        async for raw in client.ws:
            try:
                msg = protocol.decode_message(raw)
            except (UnknownMessageType, ProtocolError) as exc:
                await self._refuse(client, 0, str(exc))
                return
            seq = msg["seq"]
            if client.last_in_seq is not None and seq <= client.last_in_seq:
                await self._refuse(client, seq, f"seq must increase, got {seq}")
                return
            client.last_in_seq = seq

            if client.role is None:
                if msg["type"] != "hello":
                    await self._refuse(client, seq, "first message must be hello")
                    return
                role = msg["payload"]["role"]
                if role == "hand_source" and self._hand_source is not None:
                    self.stats.refused_hand_sources += 1
                    await self._refuse(client, seq, "a hand source is already connected")
                    return
                client.role = role
                if role == "hand_source":
                    self._hand_source = client
                self._clients.add(client)
                client.enqueue("ack", {"for_seq": seq, "ok": True, "message": f"hello {role}"})
                continue

            mtype = msg["type"]
            if mtype == "hand_frame":
                if client is not self._hand_source:
                    await self._refuse(client, seq, f"role {client.role} cannot stream hands")
                    return
                frame = protocol.payload_to_hand_frame(msg["payload"], seq, msg["t_ns"])
                self._pending = (frame, time.time_ns())
                self._frame_event.set()
                self.stats.frames_in += 1
            elif mtype == "control":
                ok, message = await self._handle_control(
                    msg["payload"]["cmd"], msg["payload"]["args"]
                )
                client.enqueue("ack", {"for_seq": seq, "ok": ok, "message": message})
            elif mtype == "hello":
                await self._refuse(client, seq, "already greeted")
                return
            else:
                await self._refuse(client, seq, f"clients do not send {mtype}")
                return

    # --------------------------------------------------------------- control

    async def _handle_control(self, cmd: str, args: dict) -> tuple[bool, str]:
        if cmd == "replay":
            return self._start_replay(args)
        if cmd == "reset" and self._replay_task is not None:
            self._replay_task.cancel()
            self._replay_task = None
        return self.session.handle_control(cmd, args)

    def _start_replay(self, args: dict) -> tuple[bool, str]:
        if self._replay_task is not None:
            return False, "a replay is already running"
        if self.session.recording != "idle":
            return False, f"cannot replay while recording state is {self.session.recording}"
        path = args.get("path")
        if not isinstance(path, str):
            return False, "replay needs a path argument"
        speed = args.get("speed", 1.0)
        if not isinstance(speed, (int, float)) or isinstance(speed, bool) or speed <= 0:
            return False, "replay speed must be > 0"
        try:
            traj = replay.load_trajectory(Path(path), setup=self.config.setup)
        except ArmTwinError as exc:
            return False, f"cannot load {path}: {exc}"
        self._replay_task = asyncio.create_task(self._run_replay(traj, float(speed)))
        return True, f"replaying {len(traj.samples)} samples from {path}"

    async def _run_replay(self, traj, speed: float):
        loop = asyncio.get_running_loop()
        t0_wall = loop.time()
        t0_rec = traj.samples[0].t_ns if traj.samples else 0
        try:
            for t_ns, payload in replay.replay_states(
                traj, self.config.setup, self.session.feedback_mode
            ):
                due = t0_wall + (t_ns - t0_rec) / 1e9 / speed
                delay = due - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                self._broadcast_state(payload, None)
        except asyncio.CancelledError:
            raise
        finally:
            self._replay_task = None


def serve_forever(config: SessionConfig, host: str, port: int):
    """Blocking entry point used by the command line."""
    server = ArmTwinServer(config, host=host, port=port)
    try:
        asyncio.run(server.run())
    except KeyboardInterrupt:
        pass
    return server
