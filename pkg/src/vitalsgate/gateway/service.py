"""The gateway core: per-node sessions, classification, fan-out, recovery.

Concurrency contract: everything here is plain synchronous code driven
from one place at a time (the asyncio event loop of the servers, or a
test). All processing for one node flows through its single session
object, so per-node ordering is structural. Live fan-out never blocks
ingestion: each subscriber owns a bounded queue and overflowing it
disconnects that subscriber, not the node.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field
from typing import Callable

from ..clock import Clock, FramePacedClock, SystemClock
from ..model import (
    PARAMETERS,
    SampleValidationError,
    Severity,
    participant,
    validate_sample,
)
from ..rules import (
    AlertEngine,
    AlertEvent,
    HysteresisConfig,
    ThresholdProfile,
    classify,
    default_profile,
    profile_from_dict,
    profile_to_dict,
)
from ..wire import FaultKind, FrameFields, StreamDecoder
from .store import Store

log = logging.getLogger("vitalsgate.gateway")

STREAM_BUFFER_EVENTS = 1000  # slow clients are cut off past this backlog


class Subscriber:
    """One live-stream client; owns a bounded event queue."""

    def __init__(self, node_filter: int | None = None):
        self.node_filter = node_filter
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=STREAM_BUFFER_EVENTS)
        self.dead = False

    def offer(self, event: dict) -> bool:
        if self.node_filter is not None and event.get("node_id") != self.node_filter:
            return True
        try:
            self.queue.put_nowait(event)
            return True
        except asyncio.QueueFull:
            self.dead = True
            return False


@dataclass
class ConnectionState:
    conn_id: str
    decoder: StreamDecoder = field(default_factory=StreamDecoder)
    bound_node: int | None = None
    close_requested: bool = False
    # Installed by the transport layer; lets the service actively close a
    # superseded connection instead of waiting for its next read.
    on_close_requested: Callable[[], None] | None = None

    def request_close(self) -> None:
        self.close_requested = True
        if self.on_close_requested is not None:
            self.on_close_requested()


def alert_from_dict(data: dict) -> AlertEvent:
    return AlertEvent(
        alert_id=data["alert_id"],
        node_id=data["node_id"],
        parameter=data["parameter"],
        severity=Severity.from_label(data["severity"]),
        value=data["value"],
        fault=data.get("fault", False),
        profile_version=data["profile_version"],
        raised_at=data["raised_at"],
        cleared_at=data.get("cleared_at"),
        acknowledged_by=data.get("acknowledged_by"),
        acknowledged_at=data.get("acknowledged_at"),
    )


class NodeSession:
    """All state the gateway keeps for one node."""

    def __init__(self, service: "GatewayService", node_id: int, profile: ThresholdProfile):
        self.service = service
        self.node_id = node_id
        self.profile = profile
        self.engine = AlertEngine(node_id, service.hysteresis)
        self.conn_id: str | None = None
        self.last_seq: int | None = None
        self.last_received_at: int | None = None
        self.last_record: dict | None = None
        self.frames_received = 0
        self.records_persisted = 0
        self.validation_failures = 0
        self.gap_count = 0
        self.out_of_order = 0
        self.decode_faults = {kind.value: 0 for kind in FaultKind}
        self.paced_clock: FramePacedClock | None = None
        if service.time_mode == "frame-paced":
            self.paced_clock = FramePacedClock(service.frame_period_ms)

    # -- stamping ---------------------------------------------------------

    def _stamp(self) -> int:
        if self.paced_clock is not None:
            now = self.paced_clock.tick()
        else:
            now = self.service.clock.now_ms()
        if self.last_received_at is not None and now <= self.last_received_at:
            now = self.last_received_at + 1  # keep per-node order strict
        return now

    # -- the per-frame pipeline --------------------------------------------

    def handle_frame(self, fields: FrameFields) -> None:
        self.frames_received += 1
        received_at = self._stamp()
        out_of_order = False
        if self.last_seq is not None:
            delta = (fields.seq - self.last_seq) % 65536
            if delta == 0 or delta >= 32768:
                out_of_order = True
                self.out_of_order += 1
            elif delta > 1:
                self.gap_count += delta - 1
        if not out_of_order:
            self.last_seq = fields.seq

        try:
            sample = validate_sample(
                node_id=fields.node_id,
                seq=fields.seq,
                body_temp=fields.body_temp,
                ambient_temp=fields.ambient_temp,
                humidity=fields.humidity,
                air_quality=fields.air_quality,
                heart_rate=fields.heart_rate,
                device_flags=fields.flags,
                received_at=received_at,
            )
        except SampleValidationError as exc:
            self.validation_failures += 1
            log.warning("node %s: invalid sample dropped: %s", self.node_id, exc)
            return

        result = classify(sample, self.profile)
        record = {
            "received_at": received_at,
            "node_id": self.node_id,
            "seq": sample.seq,
            "body_temp": sample.body_temp,
            "ambient_temp": sample.ambient_temp,
            "humidity": sample.humidity,
            "air_quality": sample.air_quality,
            "heart_rate": sample.heart_rate,
            "flags": sample.device_flags.names(),
            "severities": {p: result.severities[p].label for p in PARAMETERS},
            "overall": result.overall.label,
            "fault_parameters": sorted(result.fault_parameters),
            "profile_version": result.profile_version,
        }
        if out_of_order:
            record["hyst_skipped"] = True
        self.service.store.node(self.node_id).append_record(record)
        self.records_persisted += 1
        self.last_record = record
        self.last_received_at = received_at
        self.service._publish({"type": "sample", "node_id": self.node_id, "record": record})

        if out_of_order:
            return  # persisted, but ignored for alerting
        for transition in self.engine.step(result, sample):
            self.service._register_alert_transition(transition)

    def overview(self) -> dict:
        now = self.service.clock.now_ms() if self.paced_clock is None else (
            self.last_received_at or 0
        )
        stale_after = 3 * self.service.frame_period_ms
        if self.last_received_at is None:
            liveness = "never"
        elif self.paced_clock is not None:
            liveness = "live" if self.conn_id is not None else "stale"
        else:
            liveness = "live" if now - self.last_received_at < stale_after else "stale"
        who = participant(self.node_id)
        return {
            "node_id": self.node_id,
            "connected": self.conn_id is not None,
            "liveness": liveness,
            "last_received_at": self.last_received_at,
            "last_seq": self.last_seq,
            "records": self.records_persisted,
            "gap_count": self.gap_count,
            "profile_version": self.profile.profile_version,
            "participant": None
            if who is None
            else {
                "participant_id": who.participant_id,
                "health_status": who.health_status,
                "age_range": who.age_label,
                "gender": who.gender,
            },
        }

    def diagnostics(self) -> dict:
        return {
            "node_id": self.node_id,
            "frames_received": self.frames_received,
            "records_persisted": self.records_persisted,
            "validation_failures": self.validation_failures,
            "gap_count": self.gap_count,
            "out_of_order": self.out_of_order,
            "decode_faults": dict(self.decode_faults),
            "last_seq": self.last_seq,
        }


class GatewayService:
    """Wires decoding, sessions, storage, alerting, and fan-out together."""

    def __init__(
        self,
        store_dir,
        *,
        clock: Clock | None = None,
        hysteresis: HysteresisConfig | None = None,
        time_mode: str = "wall",
        frame_period_ms: int = 2000,
        default_age_years: int = 30,
    ):
        if time_mode not in ("wall", "frame-paced"):
            raise ValueError(f"unknown time_mode {time_mode!r}")
        self.store = Store(store_dir)
        self.clock = clock or SystemClock()
        self.hysteresis = hysteresis or HysteresisConfig()
        self.time_mode = time_mode
        self.frame_period_ms = frame_period_ms
        self.default_age_years = default_age_years
        self.sessions: dict[int, NodeSession] = {}
        self.connections: dict[str, ConnectionState] = {}
        self.subscribers: list[Subscriber] = []
        self.alerts: dict[str, AlertEvent] = {}
        self.unbound_decode_faults = {kind.value: 0 for kind in FaultKind}
        self.sessions_superseded = 0
        self._closed_discarded_bytes = 0
        self._closed_crc_failures = 0
        self._recover()

    # -- recovery --------------------------------------------------------------

    def _recover(self) -> None:
        for node_id in self.store.node_ids():
            session = self._restore_session(node_id)
            self.sessions[node_id] = session

    def _restore_session(self, node_id: int) -> NodeSession:
        node_store = self.store.node(node_id)
        entry = node_store.current_profile()
        if entry is not None:
            profile = profile_from_dict(
                {**entry["profile"], "profile_version": entry["version"]}
            )
        else:
            profile = default_profile(self.default_age_years)
        session = NodeSession(self, node_id, profile)

        for raw in node_store.alert_events():
            kind = raw["event"]
            if kind == "raised":
                alert = alert_from_dict(raw["alert"])
                self.alerts[alert.alert_id] = alert
            elif kind == "cleared" and raw["alert_id"] in self.alerts:
                self.alerts[raw["alert_id"]].cleared_at = raw["cleared_at"]
            elif kind == "acked" and raw["alert_id"] in self.alerts:
                a = self.alerts[raw["alert_id"]]
                a.acknowledged_by = raw["actor"]
                a.acknowledged_at = raw["acked_at"]
        open_alerts = [
            a for a in self.alerts.values() if a.node_id == node_id and a.cleared_at is None
        ]
        session.engine.restore(open_alerts, self._recover_counters(node_store))

        session.records_persisted = node_store.record_count()
        last = node_store.last_record()
        if last is not None:
            session.last_record = last
            session.last_received_at = last["received_at"]
            session.last_seq = last["seq"]
            session.frames_received = session.records_persisted
            if session.paced_clock is not None:
                session.paced_clock = FramePacedClock(
                    self.frame_period_ms, last["received_at"] + self.frame_period_ms
                )
        return session

    @staticmethod
    def _recover_counters(node_store) -> dict[str, tuple[int, int]]:
        """Rebuild hysteresis run lengths from the record log.

        Walking newest-first: the emergency run is the number of
        emergency samples until the first normal one, and vice versa;
        moderate samples froze the counters so they neither count nor
        stop the walk. Records skipped for hysteresis are skipped here
        too.
        """
        runs = {p: [0, 0] for p in PARAMETERS}  # [emergency_run, normal_run]
        stopped = {p: [False, False] for p in PARAMETERS}
        pending = set(PARAMETERS)
        for record in node_store.iter_records_reversed():
            if record.get("hyst_skipped"):
                continue
            for p in list(pending):
                label = record["severities"][p]
                if label == "emergency":
                    stopped[p][1] = True
                    if not stopped[p][0]:
                        runs[p][0] += 1
                elif label == "normal":
                    stopped[p][0] = True
                    if not stopped[p][1]:
                        runs[p][1] += 1
                if stopped[p][0] and stopped[p][1]:
                    pending.discard(p)
            if not pending:
                break
        return {p: (runs[p][0], runs[p][1]) for p in PARAMETERS}

    # -- session / connection plumbing --------------------------------------------

    def _session(self, node_id: int) -> NodeSession:
        if node_id not in self.sessions:
            # Unknown sender: auto-register with adult defaults.
            session = NodeSession(self, node_id, default_profile(self.default_age_years))
            self._persist_profile(session)
            self.sessions[node_id] = session
        return self.sessions[node_id]

    def connection_opened(self, conn_id: str) -> ConnectionState:
        conn = ConnectionState(conn_id=conn_id)
        self.connections[conn_id] = conn
        return conn

    def connection_bytes(self, conn: ConnectionState, chunk: bytes) -> None:
        frames, faults = conn.decoder.feed(chunk)
        for fault in faults:
            target = (
                self.sessions[conn.bound_node].decode_faults
                if conn.bound_node in self.sessions
                else self.unbound_decode_faults
            )
            target[fault.kind.value] += 1
        for fields in frames:
            session = self._session(fields.node_id)
            if session.conn_id is not None and session.conn_id != conn.conn_id:
                # Newest connection wins; ask the old one to go away.
                old = self.connections.get(session.conn_id)
                if old is not None:
                    old.request_close()
                self.sessions_superseded += 1
                log.warning(
                    "node %s: new connection %s supersedes %s",
                    fields.node_id,
                    conn.conn_id,
                    session.conn_id,
                )
            session.conn_id = conn.conn_id
            conn.bound_node = fields.node_id
            session.handle_frame(fields)

    def connection_closed(self, conn: ConnectionState) -> None:
        self.connections.pop(conn.conn_id, None)
        self._closed_discarded_bytes += conn.decoder.discarded_bytes
        self._closed_crc_failures += conn.decoder.crc_failures
        for session in self.sessions.values():
            if session.conn_id == conn.conn_id:
                session.conn_id = None

    # -- alerting ------------------------------------------------------------------

    def _register_alert_transition(self, transition) -> None:
        alert = transition.alert
        node_store = self.store.node(alert.node_id)
        if transition.kind == "raised":
            self.alerts[alert.alert_id] = alert
            node_store.append_alert_event({"event": "raised", "alert": alert.to_dict()})
            self._publish(
                {"type": "alert_raised", "node_id": alert.node_id, "alert": alert.to_dict()}
            )
        else:
            node_store.append_alert_event(
                {"event": "cleared", "alert_id": alert.alert_id, "cleared_at": alert.cleared_at}
            )
            self._publish(
                {"type": "alert_cleared", "node_id": alert.node_id, "alert": alert.to_dict()}
            )

    def list_alerts(self, state: str | None = None, node_id: int | None = None) -> list[dict]:
        out = []
        for alert in sorted(self.alerts.values(), key=lambda a: (a.raised_at, a.alert_id)):
            if node_id is not None and alert.node_id != node_id:
                continue
            if state is not None and alert.state != state:
                continue
            out.append(alert.to_dict())
        return out

    def acknowledge(self, alert_id: str, actor: str) -> dict:
        """Record an acknowledgement once; repeats return the original."""
        if alert_id not in self.alerts:
            raise KeyError(alert_id)
        alert = self.alerts[alert_id]
        if alert.acknowledged_by is None:
            alert.acknowledged_by = actor
            alert.acknowledged_at = self.clock.now_ms()
            self.store.node(alert.node_id).append_alert_event(
                {
                    "event": "acked",
                    "alert_id": alert_id,
                    "actor": actor,
                    "acked_at": alert.acknowledged_at,
                }
            )
        return alert.to_dict()

    # -- thresholds ------------------------------------------------------------------

    def get_profile(self, node_id: int) -> dict:
        return profile_to_dict(self._known_session(node_id).profile)

    def put_profile(self, node_id: int, doc: dict) -> dict:
        """Validate and install a profile; the version always increments.

        Raises:
            ProfileValidationError: invariant violations, field by
                field; the current profile and version are untouched.
        """
        session = self._session(node_id)
        new_version = session.profile.profile_version + 1
        profile = profile_from_dict({**doc, "profile_version": new_version})
        session.profile = profile  # takes effect from the next sample
        self._persist_profile(session)
        self._publish(
            {"type": "profile_changed", "node_id": node_id, "profile_version": new_version}
        )
        return profile_to_dict(profile)

    def _persist_profile(self, session: NodeSession) -> None:
        self.store.node(session.node_id).append_profile(
            session.profile.profile_version,
            profile_to_dict(session.profile),
            self.clock.now_ms(),
        )

    # -- queries ------------------------------------------------------------------------

    def _known_session(self, node_id: int) -> NodeSession:
        if node_id not in self.sessions:
            raise KeyError(node_id)
        return self.sessions[node_id]

    def nodes_overview(self) -> list[dict]:
        return [self.sessions[n].overview() for n in sorted(self.sessions)]

    def latest(self, node_id: int) -> dict | None:
        return self._known_session(node_id).last_record

    def history(
        self,
        node_id: int,
        from_ms: int | None = None,
        to_ms: int | None = None,
        step_ms: int | None = None,
    ) -> dict:
        """Inclusive-start, exclusive-end record query, optionally bucketed."""
        from .. import analytics

        self._known_session(node_id)  # unknown node -> KeyError -> 404
        records = list(self.store.node(node_id).iter_records(from_ms, to_ms))
        if step_ms is None:
            return {"node_id": node_id, "records": records}
        if not records:
            return {"node_id": node_id, "buckets": []}
        anchor = from_ms if from_ms is not None else records[0]["received_at"]
        buckets = [
            {
                "start": b.start_ms,
                "count": b.count,
                "means": {p: float(b.means[p]) for p in PARAMETERS},
            }
            for b in analytics.bucket_means(records, anchor, step_ms)
        ]
        return {"node_id": node_id, "buckets": buckets}

    def diagnostics(self) -> dict:
        sessions = {str(n): s.diagnostics() for n, s in sorted(self.sessions.items())}
        decoders = list(self.connections.values())
        return {
            "sessions": sessions,
            "unbound_decode_faults": dict(self.unbound_decode_faults),
            "open_connections": len(self.connections),
            "sessions_superseded": self.sessions_superseded,
            "decoder_totals": {
                "discarded_bytes": self._closed_discarded_bytes
                + sum(c.decoder.discarded_bytes for c in decoders),
                "crc_failures": self._closed_crc_failures
                + sum(c.decoder.crc_failures for c in decoders),
            },
            "totals": {
                "frames_received": sum(s.frames_received for s in self.sessions.values()),
                "records_persisted": sum(s.records_persisted for s in self.sessions.values()),
                "validation_failures": sum(
                    s.validation_failures for s in self.sessions.values()
                ),
                "open_alerts": sum(1 for a in self.alerts.values() if a.cleared_at is None),
            },
        }

    # -- live stream ---------------------------------------------------------------------

    def subscribe(self, node_filter: int | None = None) -> Subscriber:
        sub = Subscriber(node_filter)
        self.subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber) -> None:
        if sub in self.subscribers:
            self.subscribers.remove(sub)

    def _publish(self, event: dict) -> None:
        for sub in list(self.subscribers):
            if not sub.offer(event):
                self.subscribers.remove(sub)  # overflow: drop the client

    def close(self) -> None:
        self.store.fsync_all()
