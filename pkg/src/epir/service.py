"""Networked deployment: threaded database servers and a dispatching client.

Each connection is synchronous request/response, one request per frame.
Malformed frames are answered with an error frame; framing-level damage
(bad magic, truncation) also closes the connection since the stream can no
longer be trusted.
"""

from __future__ import annotations

import socket
import socketserver
import threading
from pathlib import Path

from . import wire
from .core import Database, ParameterError
from .mechanisms import QueryPlan, reconstruct
from .server import RequestError, handle


class TransportError(RuntimeError):
    """A remote server failed, naming the server that did."""


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        db: Database = self.server.database  # type: ignore[attr-defined]
        reader = self.request.makefile("rb")
        try:
            while True:
                try:
                    frame = wire.read_frame(reader.read)
                except wire.WireError as exc:
                    self._reply(wire.ErrorReply(wire.ERR_MALFORMED, str(exc)))
                    return  # stream is out of sync, drop the connection
                if frame is None:
                    return
                msg_type, payload = frame
                try:
                    msg = wire.decode_payload(msg_type, payload)
                except wire.WireError as exc:
                    self._reply(wire.ErrorReply(wire.ERR_MALFORMED, str(exc)))
                    continue  # framing was intact, keep the connection
                if msg_type in (wire.MSG_FETCH_INDICES, wire.MSG_XOR_SELECT):
                    try:
                        self._reply(handle(db, msg))
                    except RequestError as exc:
                        self._reply(wire.ErrorReply(wire.ERR_REQUEST, str(exc)))
                else:
                    self._reply(
                        wire.ErrorReply(wire.ERR_MALFORMED, f"unexpected message 0x{msg_type:02x}")
                    )
        except (ConnectionError, BrokenPipeError, OSError):
            return
        finally:
            reader.close()

    def _reply(self, msg) -> None:
        self.request.sendall(wire.encode_frame(msg))


class PirServer(socketserver.ThreadingTCPServer):
    """One database behind the framed protocol."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], database: Database):
        super().__init__(address, _Handler)
        self.database = database

    @property
    def endpoint(self) -> tuple[str, int]:
        host, port = self.server_address[:2]
        return host, port

    def serve_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


def load_record_file(path: str | Path, record_size_bits: int) -> Database:
    """Database from a raw concatenation of records; n inferred from size."""
    if record_size_bits <= 0 or record_size_bits % 8 != 0:
        raise ParameterError(f"record size must be a positive multiple of 8 bits, got {record_size_bits}")
    raw = Path(path).read_bytes()
    width = record_size_bits // 8
    if not raw or len(raw) % width != 0:
        raise ParameterError(
            f"record file size {len(raw)} is not a positive multiple of {width} bytes"
        )
    records = [raw[k : k + width] for k in range(0, len(raw), width)]
    return Database(records)


def serve(database: Database, listen: str) -> PirServer:
    """Bind a server; callers run serve_forever (or serve_in_thread) on it."""
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise ParameterError(f"listen address must be host:port, got {listen!r}")
    return PirServer((host, int(port)), database)


class _Connection:
    def __init__(self, server_id: int, endpoint: tuple[str, int]):
        self.server_id = server_id
        try:
            self.sock = socket.create_connection(endpoint, timeout=30)
        except OSError as exc:
            raise TransportError(f"server {server_id} at {endpoint}: {exc}") from exc
        self.reader = self.sock.makefile("rb")

    def round_trip(self, request):
        try:
            self.sock.sendall(wire.encode_frame(request))
            frame = wire.read_frame(self.reader.read)
        except (OSError, wire.WireError) as exc:
            raise TransportError(f"server {self.server_id}: {exc}") from exc
        if frame is None:
            raise TransportError(f"server {self.server_id}: connection closed")
        msg = wire.decode_payload(*frame)
        if isinstance(msg, wire.ErrorReply):
            raise TransportError(
                f"server {self.server_id}: remote error 0x{msg.code:04x} {msg.message}"
            )
        return msg

    def close(self):
        try:
            self.reader.close()
            self.sock.close()
        except OSError:
            pass


def remote_execute(plan: QueryPlan, endpoints: list[tuple[str, int]]) -> bytes:
    """Dispatch a plan to live servers and reconstruct the record.

    endpoints[k] serves plan server id k. Produces exactly the record an
    in-process run of the same plan would; any failure aborts with no
    partial result.
    """
    connections: dict[int, _Connection] = {}
    try:
        responses = []
        for sid, request in plan.requests:
            if sid >= len(endpoints):
                raise TransportError(f"no endpoint for server {sid}")
            conn = connections.get(sid)
            if conn is None:
                conn = connections[sid] = _Connection(sid, endpoints[sid])
            responses.append(conn.round_trip(request))
        return reconstruct(plan, responses)
    finally:
        for conn in connections.values():
            conn.close()
