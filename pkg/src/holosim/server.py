"""Bidirectional state sync between the live simulation and its clients.

The simulation is authoritative: clients only express intent (HumanCommand,
Control), and every client sees the same full-state Snapshot stream plus
every Event. One connection may hold the human-controller role at a time;
later claimants are downgraded to observers. A stalled client only ever
delays itself: snapshots coalesce to the latest, events queue losslessly,
and the tick task never waits on a socket.
"""

from __future__ import annotations

import asyncio
import contextlib
import socket
from dataclasses import dataclass, field, replace

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import protocol
from .engine import Engine, EventLogEntry, SimConfig
from .policies import EXTERNAL
from .protocol import (
    CLIENT_HELLO,
    CONTROL,
    ERROR,
    EVENT,
    HUMAN_COMMAND,
    ROLE_CONTROLLER,
    ROLE_OBSERVER,
    SERVER_WELCOME,
    SNAPSHOT,
    MalformedFrame,
    VersionMismatch,
    WireMessage,
)
from .world import DELIVERED, ScenarioConfig, load_scenario

DEFAULT_SNAPSHOT_RATE_HZ = 20.0


class EndpointBusy(OSError):
    """The requested host:port is already bound."""


def _mean_color(mesh) -> list[float]:
    if len(mesh.colors) == 0:
        return [0.5, 0.5, 0.5]
    return [float(c) for c in mesh.colors.mean(axis=0)]


def snapshot_payload(engine: Engine, paused: bool) -> dict:
    """Full-state snapshot of the engine's world, schema-conformant."""
    from .interaction import interaction_circle

    w = engine.world
    holograms = []
    for h in sorted(w.holograms, key=lambda h: h.id):
        assessment = engine.robot_assessments.get(h.id)
        holograms.append({
            "id": h.id,
            "label": h.label,
            "status": h.status,
            "carried_by": h.carried_by,
            "position": [float(v) for v in h.pose.translation],
            "circle_radius": float(interaction_circle(h).radius),
            "color": _mean_color(h.mesh),
            "assessment": None if assessment is None else {
                "angle": assessment.angle,
                "cost": assessment.cost,
                "occluded": assessment.occluded,
                "region": assessment.region.value,
            },
        })
    path = engine.controller.current_path()
    return {
        "time": w.time,
        "bounds": [float(v) for v in w.scene.bounds],
        "goal_zone": {"center": [float(v) for v in w.scene.goal_zone.center],
                      "radius": float(w.scene.goal_zone.radius)},
        "human": {
            "position": [float(v) for v in w.human.position],
            "heading": float(w.human.heading),
            "head_yaw": float(w.human.head_yaw),
            "head_pitch": float(w.human.head_pitch),
            "fov_h": float(w.human.fov_h),
            "fov_v": float(w.human.fov_v),
            "footprint_radius": float(w.human.footprint_radius),
            "carried": w.human.carried,
        },
        "robot": {
            "position": [float(v) for v in w.robot.position],
            "heading": float(w.robot.heading),
            "footprint_radius": float(w.robot.footprint_radius),
            "carried": w.robot.carried,
            "enabled": engine.robot_enabled,
        },
        "holograms": holograms,
        "plan": {
            "queue": list(engine.controller.queue.ids) if engine.robot_enabled else [],
            "path": [] if path is None else [[float(x), float(y)] for x, y in path],
        },
        "delivered_count": sum(1 for h in w.holograms if h.status == DELIVERED),
        "complete": engine.all_delivered(),
        "paused": paused,
    }


class InteractiveSim:
    """Engine wrapper for live serving: the human is driven externally."""

    def __init__(self, scn: ScenarioConfig, cfg: SimConfig):
        self.scn = scn
        self.cfg = replace(cfg, human_policy=EXTERNAL)
        self.paused = False
        self.time_scale = 1.0
        self._build()

    def _build(self) -> None:
        seeded = self.scn.with_seed(self.cfg.seed)
        world = load_scenario(seeded)
        self.engine = Engine(world, self.cfg, scenario_data=seeded.data,
                             scenario_dir=str(seeded.base_dir))

    def reset(self) -> None:
        self._build()

    def push_command(self, payload: dict) -> None:
        self.engine.human_policy.push_command(payload)

    def finished(self) -> bool:
        return (self.engine.all_delivered()
                or self.engine.world.time >= self.cfg.max_time - 1e-9)

    def tick(self) -> list[EventLogEntry]:
        return self.engine.tick()

    def snapshot(self) -> dict:
        return snapshot_payload(self.engine, self.paused)

    def scenario_summary(self) -> dict:
        w = self.engine.world
        return {
            "name": self.scn.name,
            "bounds": [float(v) for v in w.scene.bounds],
            "goal_zone": {"center": [float(v) for v in w.scene.goal_zone.center],
                          "radius": float(w.scene.goal_zone.radius)},
            "hologram_count": len(w.holograms),
        }


@dataclass
class Session:
    id: int
    role: str
    websocket: object
    subscribed: bool = True
    out_seq: int = 0
    last_in_seq: int = -1
    events: asyncio.Queue = field(default_factory=asyncio.Queue)
    latest_snapshot: dict | None = None
    wake: asyncio.Event = field(default_factory=asyncio.Event)
    said_hello: bool = False


class SyncServer:
    """Session bookkeeping and broadcast plumbing around one InteractiveSim."""

    def __init__(self, sim: InteractiveSim, snapshot_rate_hz: float = DEFAULT_SNAPSHOT_RATE_HZ):
        self.sim = sim
        self.snapshot_rate_hz = snapshot_rate_hz
        self.sessions: dict[int, Session] = {}
        self._next_session_id = 1
        self._next_snapshot_time = 0.0
        self._closed = False

    # -- session management --------------------------------------------------

    def controller_taken(self) -> bool:
        return any(s.role == ROLE_CONTROLLER for s in self.sessions.values())

    def open_session(self, websocket) -> Session:
        session = Session(id=self._next_session_id, role=ROLE_OBSERVER, websocket=websocket)
        self._next_session_id += 1
        self.sessions[session.id] = session
        return session

    def close_session(self, session: Session) -> None:
        self.sessions.pop(session.id, None)

    def assign_role(self, session: Session, requested: str | None) -> tuple[str, bool]:
        """Returns (role, downgraded). Controller is exclusive."""
        want_controller = requested in (None, ROLE_CONTROLLER)
        if want_controller and not self.controller_taken():
            session.role = ROLE_CONTROLLER
            return session.role, False
        downgraded = requested == ROLE_CONTROLLER or (
            requested is None and self.controller_taken())
        session.role = ROLE_OBSERVER
        return session.role, downgraded and requested == ROLE_CONTROLLER

    # -- outbound ------------------------------------------------------------

    def _enqueue(self, session: Session, msg_type: str, payload: dict) -> None:
        session.events.put_nowait((msg_type, payload))
        session.wake.set()

    def enqueue_snapshot(self, session: Session) -> None:
        # Coalesce: only the newest unsent snapshot survives a slow client.
        session.latest_snapshot = self.sim.snapshot()
        session.wake.set()

    def broadcast_events(self, entries: list[EventLogEntry]) -> None:
        for session in list(self.sessions.values()):
            if not session.said_hello:
                continue
            for e in entries:
                self._enqueue(session, EVENT,
                              {"kind": e.kind, "time": e.time, "data": e.payload})

    def broadcast_snapshot(self) -> None:
        for session in list(self.sessions.values()):
            if session.said_hello and session.subscribed:
                self.enqueue_snapshot(session)

    def make_message(self, session: Session, msg_type: str, payload: dict) -> bytes:
        msg = WireMessage(type=msg_type, seq=session.out_seq,
                          time=self.sim.engine.world.time, payload=payload)
        session.out_seq += 1
        return protocol.encode(msg)

    # -- inbound -------------------------------------------------------------

    def handle_frame(self, session: Session, raw: str) -> list[tuple[str, dict]]:
        """Process one inbound frame; returns direct replies (type, payload)."""
        try:
            msg = protocol.decode(raw)
        except VersionMismatch as e:
            return [(ERROR, {"code": "version_mismatch", "message": str(e),
                             "supported_versions": e.supported})]
        except MalformedFrame as e:
            return [(ERROR, {"code": e.code, "message": str(e)})]
        if msg.seq <= session.last_in_seq:
            return [(ERROR, {"code": "bad_seq",
                             "message": f"seq {msg.seq} not increasing"})]
        session.last_in_seq = msg.seq

        if msg.type == CLIENT_HELLO:
            return self._handle_hello(session, msg)
        if not session.said_hello:
            return [(ERROR, {"code": "handshake_required",
                             "message": "send ClientHello first"})]
        if msg.type == HUMAN_COMMAND:
            if session.role != ROLE_CONTROLLER:
                return [(ERROR, {"code": "not_controller",
                                 "message": "only the human controller may send commands"})]
            self.sim.push_command(msg.payload)
            return []
        if msg.type == CONTROL:
            return self._handle_control(session, msg)
        return [(ERROR, {"code": "unexpected_type",
                         "message": f"server does not accept {msg.type}"})]

    def _handle_hello(self, session: Session, msg: WireMessage) -> list[tuple[str, dict]]:
        replies: list[tuple[str, dict]] = []
        if session.said_hello:
            return [(ERROR, {"code": "already_welcomed", "message": "duplicate hello"})]
        role, downgraded = self.assign_role(session, msg.payload.get("role"))
        if downgraded:
            replies.append((ERROR, {"code": "controller_taken",
                                    "message": "controller role taken; joining as observer"}))
        session.said_hello = True
        replies.append((SERVER_WELCOME, {
            "scenario": self.sim.scenario_summary(),
            "role": role,
            "snapshot_rate_hz": self.snapshot_rate_hz,
        }))
        self.enqueue_snapshot(session)
        return replies

    def _handle_control(self, session: Session, msg: WireMessage) -> list[tuple[str, dict]]:
        action = msg.payload["action"]
        if action == "pause":
            self.sim.paused = True
        elif action == "resume":
            self.sim.paused = False
        elif action == "reset":
            self.sim.reset()
            self.broadcast_snapshot()
        elif action == "set_rate":
            self.sim.time_scale = float(msg.payload["rate"])
        return []

    # -- tick loop -----------------------------------------------------------

    async def run_loop(self) -> None:
        loop = asyncio.get_running_loop()
        snapshot_period = 1.0 / self.snapshot_rate_hz
        while not self._closed:
            if self.sim.paused or self.sim.finished():
                await asyncio.sleep(0.02)
                continue
            started = loop.time()
            events = self.sim.tick()
            if events:
                self.broadcast_events(events)
            if self.sim.engine.world.time + 1e-9 >= self._next_snapshot_time:
                self._next_snapshot_time = self.sim.engine.world.time + snapshot_period
                self.broadcast_snapshot()
            budget = self.sim.cfg.dt / max(self.sim.time_scale, 1e-6)
            await asyncio.sleep(max(0.0, budget - (loop.time() - started)))

    def close(self) -> None:
        self._closed = True


def build_app(sim: InteractiveSim, snapshot_rate_hz: float = DEFAULT_SNAPSHOT_RATE_HZ):
    """FastAPI app exposing the sync protocol at /ws."""
    server = SyncServer(sim, snapshot_rate_hz)

    @contextlib.asynccontextmanager
    async def lifespan(app):
        task = asyncio.create_task(server.run_loop())
        try:
            yield
        finally:
            server.close()
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(lifespan=lifespan)
    app.state.sync_server = server

    async def writer(session: Session, websocket) -> None:
        # Sole sender for this session: guarantees strictly increasing seq.
        while True:
            await session.wake.wait()
            session.wake.clear()
            while not session.events.empty():
                msg_type, payload = session.events.get_nowait()
                await websocket.send_text(
                    server.make_message(session, msg_type, payload).decode())
            if session.latest_snapshot is not None:
                snap, session.latest_snapshot = session.latest_snapshot, None
                await websocket.send_text(
                    server.make_message(session, SNAPSHOT, snap).decode())

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        session = server.open_session(websocket)
        writer_task = asyncio.create_task(writer(session, websocket))
        try:
            while True:
                raw = await websocket.receive_text()
                for msg_type, payload in server.handle_frame(session, raw):
                    server._enqueue(session, msg_type, payload)
        except WebSocketDisconnect:
            pass
        finally:
            writer_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await writer_task
            server.close_session(session)

    return app


def check_endpoint_free(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as e:
        raise EndpointBusy(f"{host}:{port} is already in use") from e
    finally:
        probe.close()


def serve(scn: ScenarioConfig, cfg: SimConfig, host: str = "127.0.0.1",
          port: int = 8765, snapshot_rate_hz: float = DEFAULT_SNAPSHOT_RATE_HZ) -> None:
    """Run the interactive simulation server until interrupted."""
    import uvicorn

    check_endpoint_free(host, port)
    sim = InteractiveSim(scn, cfg)
    app = build_app(sim, snapshot_rate_hz)
    uvicorn.run(app, host=host, port=port, log_level="warning")
