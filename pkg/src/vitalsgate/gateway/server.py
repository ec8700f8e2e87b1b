"""Process entry for `gateway serve`: HTTP API + ingest socket, one loop."""

from __future__ import annotations

import asyncio
import logging
import socket

import uvicorn

from ..rules import HysteresisConfig
from .api import create_app
from .config import GatewayConfig
from .ingest import start_ingest_server
from .service import GatewayService

log = logging.getLogger("vitalsgate.server")


class PortInUse(RuntimeError):
    pass


def _check_port_free(port: int) -> None:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind(("0.0.0.0", port))
        except OSError as exc:
            raise PortInUse(f"port {port} unavailable: {exc}") from exc


def serve(config: GatewayConfig) -> None:
    """Run until interrupted; clean shutdown flushes the store.

    Raises:
        PortInUse: before touching the store, if either port is taken.
    """
    logging.basicConfig(level=config.log_level.upper())
    _check_port_free(config.listen_port)
    _check_port_free(config.http_port)

    service = GatewayService(
        config.store_dir,
        hysteresis=HysteresisConfig(config.raise_after, config.clear_after),
        time_mode=config.time_mode,
        frame_period_ms=config.frame_period_ms,
        default_age_years=config.default_age_years,
    )
    app = create_app(service, ui_dir=config.ui_dir)

    async def main():
        ingest = await start_ingest_server(service, "0.0.0.0", config.listen_port)
        log.info("ingest listening on %s", config.listen_port)
        uv = uvicorn.Server(
            uvicorn.Config(
                app,
                host="0.0.0.0",
                port=config.http_port,
                log_level=config.log_level.lower(),
            )
        )
        try:
            await uv.serve()  # returns on SIGINT/SIGTERM
        finally:
            ingest.close()
            await ingest.wait_closed()
            service.close()
            log.info("store flushed, goodbye")

    asyncio.run(main())
