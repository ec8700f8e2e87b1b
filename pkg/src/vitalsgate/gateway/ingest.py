"""Stream-socket ingestion: raw wire-protocol frames over TCP."""

from __future__ import annotations

import asyncio
import contextlib
import itertools
import logging

from .service import GatewayService

log = logging.getLogger("vitalsgate.ingest")

_conn_counter = itertools.count(1)


async def start_ingest_server(service: GatewayService, host: str, port: int):
    """Bind the ingest socket; one connection = one decoder."""

    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        peer = writer.get_extra_info("peername")
        conn = service.connection_opened(f"tcp-{next(_conn_counter)}-{peer}")
        conn.on_close_requested = writer.close
        log.info("ingest connection %s opened", conn.conn_id)
        try:
            while not conn.close_requested:
                chunk = await reader.read(4096)
                if not chunk:
                    break
                service.connection_bytes(conn, chunk)
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            service.connection_closed(conn)
            writer.close()
            with contextlib.suppress(Exception):
                await writer.wait_closed()
            log.info("ingest connection %s closed", conn.conn_id)

    return await asyncio.start_server(handle, host, port)
