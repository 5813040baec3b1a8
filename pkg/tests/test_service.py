import os
import socket

import numpy as np
import pytest

from epir import mechanisms as m
from epir import service, wire
from epir.core import Database, ParameterError, RngStream, SystemParams

N, D, B = 64, 3, 64


@pytest.fixture(scope="module")
def cluster():
    rng = RngStream(1234)
    content = Database.random(N, B // 8, rng).as_array()
    servers = [service.PirServer(("127.0.0.1", 0), Database(content.copy())) for _ in range(D)]
    for s in servers:
        s.serve_in_thread()
    yield content, [s.endpoint for s in servers]
    for s in servers:
        s.shutdown()


def fresh_replicas(content):
    return [Database(content.copy()) for _ in range(D)]


class TestRemoteExecute:
    @pytest.mark.parametrize("mech", [m.Chor(), m.Sparse(0.25), m.Subset(2)])
    def test_matches_in_process(self, cluster, mech):
        content, endpoints = cluster
        params = SystemParams(n=N, d=D, b=B)
        for seed in range(8):
            plan_wire = mech.generate(11, params, RngStream(seed))
            plan_local = mech.generate(11, params, RngStream(seed))
            got_wire = service.remote_execute(plan_wire, endpoints)
            got_local = m.execute_plan(plan_local, fresh_replicas(content), RngStream(seed))
            assert got_wire == got_local == content[11].tobytes()

    def test_fetch_mechanism_over_wire(self, cluster):
        content, endpoints = cluster
        params = SystemParams(n=N, d=D, b=B)
        plan = m.Direct(6).generate(3, params, RngStream(5))
        assert service.remote_execute(plan, endpoints) == content[3].tobytes()

    def test_server_down_is_transport_error(self, cluster):
        content, endpoints = cluster
        params = SystemParams(n=N, d=D, b=B)
        plan = m.Chor().generate(0, params, RngStream(0))
        dead = ("127.0.0.1", 1)  # nothing listens there
        with pytest.raises(service.TransportError, match="server 1"):
            service.remote_execute(plan, [endpoints[0], dead, endpoints[2]])

    def test_remote_request_error_names_server(self, cluster):
        _, endpoints = cluster
        plan = m.QueryPlan(
            "direct", ((0, m.FetchIndices((N + 5,))),), 0, m.PICK_INDEX
        )
        with pytest.raises(service.TransportError, match="server 0"):
            service.remote_execute(plan, endpoints)

    def test_missing_endpoint(self, cluster):
        _, endpoints = cluster
        plan = m.gen_chor(0, SystemParams(n=N, d=D, b=B), RngStream(1))
        with pytest.raises(service.TransportError):
            service.remote_execute(plan, endpoints[:1])


class TestProtocolBehaviour:
    def test_unknown_type_keeps_connection_open(self, cluster):
        content, endpoints = cluster
        sock = socket.create_connection(endpoints[0])
        reader = sock.makefile("rb")
        # a response-typed frame is unexpected on the server side
        sock.sendall(wire.encode_frame(wire.ErrorReply(0, "hello")))
        msg = wire.decode_payload(*wire.read_frame(reader.read))
        assert isinstance(msg, wire.ErrorReply) and msg.code == wire.ERR_MALFORMED
        # the same connection still answers a valid request
        sock.sendall(wire.encode_frame(m.FetchIndices((2,))))
        msg = wire.decode_payload(*wire.read_frame(reader.read))
        assert msg.items[0] == (2, content[2].tobytes())
        reader.close()
        sock.close()

    def test_garbage_gets_error_then_close(self, cluster):
        _, endpoints = cluster
        sock = socket.create_connection(endpoints[0])
        reader = sock.makefile("rb")
        sock.sendall(b"NOTAFRAMEATALL")
        msg = wire.decode_payload(*wire.read_frame(reader.read))
        assert isinstance(msg, wire.ErrorReply) and msg.code == wire.ERR_MALFORMED
        assert reader.read(1) == b""  # connection closed after framing damage
        reader.close()
        sock.close()

    def test_fuzz_then_valid_request(self, cluster):
        content, endpoints = cluster
        rng = np.random.default_rng(99)
        for _ in range(100):
            # short blobs leave the server waiting for the rest of a header,
            # so the probe must time out rather than block on the reply
            sock = socket.create_connection(endpoints[1], timeout=0.2)
            blob = rng.bytes(int(rng.integers(1, 64)))
            try:
                sock.sendall(blob)
                sock.recv(256)
            except OSError:
                pass
            finally:
                sock.close()
        plan = m.gen_chor(7, SystemParams(n=N, d=D, b=B), RngStream(3))
        assert service.remote_execute(plan, endpoints) == content[7].tobytes()


class TestRecordFile:
    def test_load_infers_count(self, tmp_path):
        path = tmp_path / "records.bin"
        path.write_bytes(os.urandom(10 * 8))
        db = service.load_record_file(path, 64)
        assert len(db) == 10 and db.record_bytes == 8

    def test_size_mismatch_is_startup_error(self, tmp_path):
        path = tmp_path / "records.bin"
        path.write_bytes(os.urandom(17))
        with pytest.raises(ParameterError):
            service.load_record_file(path, 64)

    def test_bad_record_size(self, tmp_path):
        path = tmp_path / "records.bin"
        path.write_bytes(os.urandom(16))
        with pytest.raises(ParameterError):
            service.load_record_file(path, 12)

    def test_serve_parses_listen_address(self, tmp_path):
        path = tmp_path / "records.bin"
        path.write_bytes(os.urandom(4 * 8))
        srv = service.serve(service.load_record_file(path, 64), "127.0.0.1:0")
        try:
            host, port = srv.endpoint
            assert host == "127.0.0.1" and port > 0
        finally:
            srv.server_close()

    def test_bad_listen_address(self):
        db = Database([b"\x00" * 8])
        with pytest.raises(ParameterError):
            service.serve(db, "localhost")
