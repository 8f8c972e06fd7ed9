"""Real-time streaming service for the operator console.

Speaks the E2 frame format over TCP, extended with the ui_* message
types.  Each side sends one version frame (payload ``cfe2/1``) on
connect.  The simulation loop is the single writer; client commands are
queued and drained at second boundaries; every simulated second one
ui_snapshot frame is broadcast to all clients.
"""

from __future__ import annotations

import logging
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

from .. import e2
from .scenario import ScenarioConfig
from .sim import MetricsRow, Simulator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UiFault:
    antenna: int
    on: bool


@dataclass(frozen=True)
class UiMoveUe:
    ue_id: int
    x: float
    y: float


@dataclass(frozen=True)
class UiSnapshotReq:
    pass


@dataclass(frozen=True)
class UiSnapshot:
    time_s: int
    total_thpt_mbps: float
    dl_thpt_mbps: float
    active_antennas: int
    power_w: float
    ptime_us: float
    actions: int
    per_ue_thpt: dict
    per_port_snr: dict
    per_port_rsrp: dict
    ue_positions: dict
    fault_state: list
    decisions: list


@dataclass(frozen=True)
class ErrorMsg:
    message: str


e2.register_message("ui_fault", UiFault, ("antenna", "on"))
e2.register_message("ui_move_ue", UiMoveUe, ("ue_id", "x", "y"))
e2.register_message("ui_snapshot_req", UiSnapshotReq, ())
e2.register_message("ui_snapshot", UiSnapshot,
                    ("time_s", "total_thpt_mbps", "dl_thpt_mbps",
                     "active_antennas", "power_w", "ptime_us", "actions",
                     "per_ue_thpt", "per_port_snr", "per_port_rsrp",
                     "ue_positions", "fault_state", "decisions"))
e2.register_message("error", ErrorMsg, ("message",))

VERSION_FRAME = struct.pack(">I", len(e2.PROTOCOL_VERSION)) + e2.PROTOCOL_VERSION.encode()


def snapshot_from_row(sim: Simulator, row: MetricsRow, decision_tail: int = 20) -> UiSnapshot:
    decisions = sim.xapp.decision_log[-decision_tail:] if sim.xapp else []
    return UiSnapshot(
        time_s=row.time_s,
        total_thpt_mbps=round(row.total_thpt_mbps, 6),
        dl_thpt_mbps=row.dl_thpt_mbps,
        active_antennas=row.active_antennas,
        power_w=round(row.power_w, 6),
        ptime_us=round(row.ptime_us, 6),
        actions=row.actions,
        per_ue_thpt={str(r): round(v, 6) for r, v in row.per_ue_thpt_mbps.items()},
        per_port_snr={str(r): [round(v, 3) for v in vals]
                      for r, vals in row.per_port_snr.items()},
        per_port_rsrp={str(r): [round(v, 3) for v in vals]
                       for r, vals in row.per_port_rsrp.items()},
        ue_positions={str(r): list(u.position) for r, u in sim.ues.items()},
        fault_state=[bool(f) for f in sim.fault_state],
        decisions=decisions,
    )


class _Client:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.lock = threading.Lock()
        self.alive = True

    def send(self, frame: bytes):
        try:
            with self.lock:
                self.sock.sendall(frame)
        except OSError:
            self.alive = False

    def read_exactly(self, n: int) -> bytes:
        data = b""
        while len(data) < n:
            chunk = self.sock.recv(n - len(data))
            if not chunk:
                raise ConnectionError("peer closed")
            data += chunk
        return data


class ConsoleServer:
    """Runs a scenario in (dilated) real time; serves ui_* clients."""

    def __init__(self, scenario: ScenarioConfig, port: int, speed: float = 1.0,
                 host: str = "127.0.0.1"):
        self.sim = Simulator(scenario)
        self.speed = speed
        self.commands: queue.Queue = queue.Queue()
        self.clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._latest_snapshot: UiSnapshot | None = None
        self._stop = threading.Event()
        self.listener = socket.create_server((host, port))
        self.port = self.listener.getsockname()[1]

    # client side ---------------------------------------------------------

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                sock, addr = self.listener.accept()
            except OSError:
                return
            client = _Client(sock)
            with self._clients_lock:
                self.clients.append(client)
            threading.Thread(target=self._client_loop, args=(client,),
                             daemon=True).start()

    def _client_loop(self, client: _Client):
        try:
            client.send(VERSION_FRAME)
            version = e2.read_frame(client.read_exactly)
            if version.decode("utf-8", "replace") != e2.PROTOCOL_VERSION:
                client.send(e2.encode(ErrorMsg(
                    f"incompatible protocol {version!r}, want {e2.PROTOCOL_VERSION}")))
                return
            while not self._stop.is_set():
                payload = e2.read_frame(client.read_exactly)
                try:
                    msg = e2.decode_payload(payload)
                except e2.E2DecodeError as exc:
                    client.send(e2.encode(ErrorMsg(str(exc))))
                    continue
                self._dispatch(client, msg)
        except (ConnectionError, OSError):
            pass
        finally:
            client.alive = False
            with self._clients_lock:
                if client in self.clients:
                    self.clients.remove(client)
            client.sock.close()

    def _dispatch(self, client: _Client, msg):
        if isinstance(msg, UiSnapshotReq):
            snap = self._latest_snapshot
            if snap is not None:
                client.send(e2.encode(snap))
        elif isinstance(msg, (UiFault, UiMoveUe)):
            self.commands.put(msg)
        else:
            client.send(e2.encode(ErrorMsg(
                f"unsupported message {type(msg).__name__}")))

    # sim side ------------------------------------------------------------

    def _drain_commands(self):
        while True:
            try:
                msg = self.commands.get_nowait()
            except queue.Empty:
                return
            try:
                if isinstance(msg, UiFault):
                    self.sim.set_fault(msg.antenna, msg.on)
                elif isinstance(msg, UiMoveUe):
                    self.sim.move_ue(msg.ue_id, msg.x, msg.y)
            except (KeyError, IndexError) as exc:
                logger.warning("dropping bad command %r: %s", msg, exc)

    def _broadcast(self, snap: UiSnapshot):
        frame = e2.encode(snap)
        with self._clients_lock:
            targets = list(self.clients)
        for client in targets:
            client.send(frame)

    def run(self):
        """Blocks until the scenario finishes or stop() is called."""
        threading.Thread(target=self._accept_loop, daemon=True).start()
        period = 1.0 / self.speed
        while not self.sim.finished and not self._stop.is_set():
            t0 = time.monotonic()
            self._drain_commands()
            row = self.sim.step_second()
            snap = snapshot_from_row(self.sim, row)
            self._latest_snapshot = snap
            self._broadcast(snap)
            remaining = period - (time.monotonic() - t0)
            if remaining > 0:
                self._stop.wait(remaining)
        self.stop()

    def stop(self):
        self._stop.set()
        try:
            self.listener.close()
        except OSError:
            pass


def serve(scenario: ScenarioConfig, port: int, speed: float = 1.0):
    server = ConsoleServer(scenario, port, speed)
    logger.info("serving on port %d at %.1fx real time", server.port, speed)
    server.run()
    return server.sim.log
