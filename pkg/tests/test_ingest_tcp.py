"""The ingest socket: frames over real TCP, odd chunking, reconnects."""

import asyncio

from vitalsgate.clock import ManualClock
from vitalsgate.gateway.ingest import start_ingest_server
from vitalsgate.gateway.service import GatewayService
from vitalsgate.rules import INSTANT_ALERTS
from vitalsgate.wire import encode_frame


def frame(seq, node_id=1, hr=80):
    return encode_frame(node_id, seq, 36.5, 27.0, 50.0, 100.0, hr)


def run(coro):
    return asyncio.run(coro)


def test_frames_over_tcp_become_records(tmp_path):
    async def scenario():
        service = GatewayService(tmp_path / "store", clock=ManualClock(), hysteresis=INSTANT_ALERTS)
        server = await start_ingest_server(service, "127.0.0.1", 0)
        port = server.sockets[0].getsockname()[1]
        reader, writer = await asyncio.open_connection("127.0.0.1", port)
        payload = b"junk" + frame(0) + frame(1) + b"\xa5"  # split sync at the end
        for i in range(0, len(payload), 7):  # awkward chunking
            writer.write(payload[i : i + 7])
            await writer.drain()
        writer.write(frame(2)[1:])  # completes the trailing 0xA5
        await writer.drain()
        writer.close()
        await writer.wait_closed()
        for _ in range(200):
            if service.sessions.get(1) and service.sessions[1].records_persisted == 3:
                break
            await asyncio.sleep(0.01)
        server.close()
        await server.wait_closed()
        session = service.sessions[1]
        assert session.records_persisted == 3
        assert session.conn_id is None  # closed connection unbound
        return service

    run(scenario())


def test_newer_connection_supersedes_older(tmp_path):
    async def scenario():
        service = GatewayService(tmp_path / "store", clock=ManualClock(), hysteresis=INSTANT_ALERTS)
        server = await start_ingest_server(service, "127.0.0.1", 0)
        port = server.sockets[0].getsockname()[1]

        r1, w1 = await asyncio.open_connection("127.0.0.1", port)
        w1.write(frame(0))
        await w1.drain()
        while not service.sessions.get(1):
            await asyncio.sleep(0.01)

        r2, w2 = await asyncio.open_connection("127.0.0.1", port)
        w2.write(frame(1))
        await w2.drain()
        for _ in range(200):
            if service.sessions[1].records_persisted == 2:
                break
            await asyncio.sleep(0.01)
        # the first connection is asked to close; reading it sees EOF soon
        data = await asyncio.wait_for(r1.read(), timeout=5)
        assert data == b""
        assert service.diagnostics()["sessions_superseded"] == 1

        w2.close()
        await w2.wait_closed()
        server.close()
        await server.wait_closed()

    run(scenario())
