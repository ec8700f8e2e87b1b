"""Shared fixtures: the co-simulation driver, a live HTTP gateway, profiles."""

from __future__ import annotations

import asyncio
import threading
import time

import pytest
import uvicorn

from vitalsgate.clock import ManualClock
from vitalsgate.gateway.api import create_app
from vitalsgate.gateway.service import GatewayService
from vitalsgate.rules import INSTANT_ALERTS, default_profile
from vitalsgate.sim.node import NodeConfig, SensorNode
from vitalsgate.sim.scenario import replay_scenario
from vitalsgate.wire import encode_frame


class ReplayDriver:
    """Steps simulated nodes and feeds their frames into a gateway.

    Time is purely virtual: the driver advances the shared clock to
    each emission instant, so a six-hour experiment runs as fast as the
    code can go. The driver owns the nodes; a gateway can be swapped
    out mid-run (that is how the durability tests crash one).
    """

    def __init__(self, participants=(1, 2, 3, 4, 5), node_configs=None):
        if node_configs is None:
            node_configs = [
                NodeConfig(node_id=p, scenario=replay_scenario(p)) for p in participants
            ]
        self.nodes = [SensorNode(cfg) for cfg in node_configs]
        self.t = 0

    def done(self) -> bool:
        return all(node.halted for node in self.nodes)

    def run(self, service: GatewayService, clock: ManualClock, stop_at_ms=None) -> None:
        """Drive until every node halts (or the stop time is reached)."""
        conns = {
            node.config.node_id: service.connection_opened(
                f"drv-{node.config.node_id}-{self.t}"
            )
            for node in self.nodes
        }
        while not self.done() and (stop_at_ms is None or self.t < stop_at_ms):
            clock.set(self.t)
            for node in self.nodes:
                if node.halted:
                    continue
                result = node.tick(self.t)
                if result.frame is not None:
                    service.connection_bytes(conns[node.config.node_id], result.frame)
            self.t += self.nodes[0].config.sample_period_ms
        for conn in conns.values():
            service.connection_closed(conn)


class LiveGateway:
    """A gateway with its HTTP API on a real ephemeral port.

    Needed wherever in-process test transports fall short (the endless
    stream endpoint). Ingestion from the test thread is marshaled onto
    the server's event loop so the service stays single-threaded, as in
    production.
    """

    def __init__(self, tmp_path, hysteresis=INSTANT_ALERTS):
        self.clock = ManualClock()
        self.service = GatewayService(
            tmp_path / "live-store", clock=self.clock, hysteresis=hysteresis
        )
        app = create_app(self.service)
        self.loop = None
        self._server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
        )
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        self.loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self.loop)
        self.loop.run_until_complete(self._server.serve())

    def __enter__(self):
        self._thread.start()
        deadline = time.time() + 10
        while (not self._server.started or self.loop is None) and time.time() < deadline:
            time.sleep(0.01)
        if not self._server.started:
            raise RuntimeError("gateway server failed to start")
        port = self._server.servers[0].sockets[0].getsockname()[1]
        self.url = f"http://127.0.0.1:{port}"
        return self

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=10)

    def run_in_loop(self, fn, *args):
        async def call():
            return fn(*args)

        return asyncio.run_coroutine_threadsafe(call(), self.loop).result(timeout=10)

    def ingest(self, seq, at_ms, *, node_id=1, hr=80, body=36.5, ambient=27.0,
               humidity=50.0, air=100.0):
        frame = encode_frame(node_id, seq, body, ambient, humidity, air, hr)

        def push():
            self.clock.set(max(at_ms, self.clock.now_ms()))
            conn = self.service.connection_opened(f"live-{node_id}-{seq}")
            self.service.connection_bytes(conn, frame)

        self.run_in_loop(push)

    def subscriber_count(self):
        return self.run_in_loop(lambda: len(self.service.subscribers))


@pytest.fixture
def adult_profile():
    return default_profile(30)


@pytest.fixture
def manual_clock():
    return ManualClock()


@pytest.fixture
def instant_service(tmp_path, manual_clock):
    """Gateway with instantaneous alerting on a manual clock."""
    return GatewayService(tmp_path / "store", clock=manual_clock, hysteresis=INSTANT_ALERTS)
