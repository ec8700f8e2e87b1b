"""HTTP surface of the gateway: query, admin, and live-push endpoints.

Bodies are JSON. The stream endpoint is a long-lived response writing
one JSON event per line ({sample, alert_raised, alert_cleared,
profile_changed}); a client that falls more than the buffer limit
behind is disconnected rather than slowing ingestion.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .. import __version__
from ..rules import ProfileValidationError
from .service import GatewayService


class BandSideModel(BaseModel):
    moderate: float | None = None
    emergency: float | None = None
    inclusive: bool = False


class ParameterThresholdsModel(BaseModel):
    low: BandSideModel | None = None
    high: BandSideModel | None = None


class ThresholdProfileIn(BaseModel):
    parameters: dict[str, ParameterThresholdsModel]


class ThresholdProfileOut(ThresholdProfileIn):
    profile_version: int


class ParticipantModel(BaseModel):
    participant_id: int
    health_status: str
    age_range: str
    gender: str


class NodeOverviewModel(BaseModel):
    node_id: int
    connected: bool
    liveness: str
    last_received_at: int | None
    last_seq: int | None
    records: int
    gap_count: int
    profile_version: int
    participant: ParticipantModel | None = None


class SampleRecordModel(BaseModel):
    received_at: int
    node_id: int
    seq: int
    body_temp: float
    ambient_temp: float
    humidity: float
    air_quality: float
    heart_rate: int
    flags: list[str]
    severities: dict[str, str]
    overall: str
    fault_parameters: list[str]
    profile_version: int
    hyst_skipped: bool = False


class BucketModel(BaseModel):
    start: int
    count: int
    means: dict[str, float]


class HistoryResponse(BaseModel):
    node_id: int
    records: list[SampleRecordModel] | None = None
    buckets: list[BucketModel] | None = None


class AlertModel(BaseModel):
    alert_id: str
    node_id: int
    parameter: str
    severity: str
    value: float
    fault: bool
    profile_version: int
    raised_at: int
    cleared_at: int | None
    acknowledged_by: str | None
    acknowledged_at: int | None
    state: str


class AckRequest(BaseModel):
    actor: str = Field(min_length=1)


def create_app(service: GatewayService, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="vitalsgate gateway", version=__version__)
    app.state.service = service

    @app.exception_handler(ProfileValidationError)
    async def _profile_errors(_request: Request, exc: ProfileValidationError):
        return JSONResponse(status_code=422, content={"errors": exc.errors})

    @app.exception_handler(KeyError)
    async def _not_found(_request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"detail": f"not found: {exc.args[0]}"})

    @app.get("/api/v1/nodes", response_model=list[NodeOverviewModel])
    def nodes():
        return service.nodes_overview()

    @app.get("/api/v1/nodes/{node_id}/latest", response_model=SampleRecordModel)
    def latest(node_id: int):
        record = service.latest(node_id)
        if record is None:
            raise HTTPException(status_code=404, detail="no samples yet")
        return record

    @app.get(
        "/api/v1/nodes/{node_id}/history",
        response_model=HistoryResponse,
        response_model_exclude_none=True,
    )
    def history(
        node_id: int,
        from_ms: int | None = Query(default=None, alias="from"),
        to_ms: int | None = Query(default=None, alias="to"),
        step_ms: int | None = Query(default=None, alias="step", gt=0),
    ):
        return service.history(node_id, from_ms, to_ms, step_ms)

    @app.get("/api/v1/nodes/{node_id}/thresholds", response_model=ThresholdProfileOut)
    def get_thresholds(node_id: int):
        return service.get_profile(node_id)

    @app.put("/api/v1/nodes/{node_id}/thresholds", response_model=ThresholdProfileOut)
    def put_thresholds(node_id: int, body: ThresholdProfileIn):
        return service.put_profile(node_id, body.model_dump())

    @app.get("/api/v1/alerts", response_model=list[AlertModel])
    def alerts(
        state: str | None = Query(default=None, pattern="^(open|cleared|acked)$"),
        node: int | None = None,
    ):
        return service.list_alerts(state, node)

    @app.post("/api/v1/alerts/{alert_id}/ack", response_model=AlertModel)
    def ack(alert_id: str, body: AckRequest):
        return service.acknowledge(alert_id, body.actor)

    @app.get("/api/v1/diagnostics")
    def diagnostics():
        return service.diagnostics()

    @app.get("/api/v1/stream")
    async def stream(node: int | None = None):
        sub = service.subscribe(node)

        async def lines():
            try:
                while not sub.dead:
                    try:
                        event = await asyncio.wait_for(sub.queue.get(), timeout=1.0)
                    except asyncio.TimeoutError:
                        continue
                    yield json.dumps(event, separators=(",", ":")) + "\n"
            finally:
                service.unsubscribe(sub)

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
