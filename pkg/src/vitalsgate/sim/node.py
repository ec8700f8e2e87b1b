"""The virtual node: sensor reads, local alarm outputs, frame emission.

One node is one sequential loop over virtual time. Each sample period
it reads every signal source, refreshes the two 16-character display
lines, evaluates its local thresholds to drive the buzzer/LED flags,
and on each transmit period encodes the latest sample as one frame.
When its scenario runs out it emits a final all-zero frame flagged
SENSOR_FAULT and halts, so downstream can tell "done" from "dead".

Everything is deterministic in (config, scenario, seed): replaying the
same node twice yields byte-identical output streams.
"""

from __future__ import annotations

import random
import socket
import time
from dataclasses import dataclass, field as dc_field
from decimal import Decimal, ROUND_HALF_UP

from ..corpus import participant_rows
from ..model import PARAMETERS, DeviceFlag, Severity, VitalsSample
from ..rules import ThresholdProfile, classify, default_profile
from ..wire import encode_frame
from .mq135 import Mq135Fault, Mq135Model, adc_to_ppm, ppm_to_adc
from .ppg import PpgDetector, PpgWaveform
from .scenario import (
    ConstantSignal,
    PpgSignal,
    ReplaySignal,
    Scenario,
    TrackSignal,
)

# Which local outputs fire per parameter emergency: buzzer for the
# temperature sensor, LED for the environment sensors, both for pulse.
DEFAULT_ALERT_OUTPUTS = {
    "body_temp": ("buzzer",),
    "ambient_temp": ("buzzer",),
    "humidity": ("led",),
    "air_quality": ("led",),
    "heart_rate": ("buzzer", "led"),
}


@dataclass
class NodeConfig:
    node_id: int
    scenario: Scenario
    sample_period_ms: int = 1000
    transmit_period_ms: int = 2000
    rng_seed: int = 0
    age_years: int = 30
    local_thresholds: ThresholdProfile | None = None
    alert_outputs: dict = dc_field(default_factory=lambda: dict(DEFAULT_ALERT_OUTPUTS))
    mq135: Mq135Model = dc_field(default_factory=Mq135Model)

    def __post_init__(self):
        if self.sample_period_ms <= 0:
            raise ValueError("sample_period_ms must be positive")
        if (
            self.transmit_period_ms <= 0
            or self.transmit_period_ms % self.sample_period_ms != 0
        ):
            raise ValueError("transmit_period_ms must be a positive multiple of sample_period_ms")
        if self.local_thresholds is None:
            self.local_thresholds = default_profile(self.age_years)


# -- Runtime signal sources -----------------------------------------------------


class _Constant:
    def __init__(self, value: float):
        self._value = value

    def value(self, t_ms: int) -> float:
        return self._value


class _Track:
    def __init__(self, points):
        self._points = points

    def value(self, t_ms: int) -> float:
        pts = self._points
        if t_ms <= pts[0][0]:
            return pts[0][1]
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if t_ms <= t1:
                if t1 == t0:
                    return v1
                return v0 + (v1 - v0) * (t_ms - t0) / (t1 - t0)
        return pts[-1][1]


class _Replay:
    """Hour-indexed corpus values, carried at full precision.

    The wire holds humidity and ppm at deci precision, one digit short
    of the corpus. To keep the hourly stream mean exactly equal to the
    corpus value, frames cycle between the two adjacent deci values in
    a 10-frame pattern weighted by the lost centi digit.
    """

    def __init__(self, values, transmit_period_ms: int, dither: bool):
        self._values = values  # Decimal (or int for heart rate), per hour
        self._transmit_ms = transmit_period_ms
        self._dither = dither

    def value(self, t_ms: int):
        v = self._values[min(t_ms // 3_600_000, len(self._values) - 1)]
        if not self._dither:
            return int(v) if isinstance(v, int) else float(v)
        centi = int((Decimal(v) * 100).quantize(Decimal("1"), rounding=ROUND_HALF_UP))
        deci, rem = divmod(centi, 10)
        phase = (t_ms // self._transmit_ms) % 10
        return (deci + (1 if phase < rem else 0)) / 10


class _PpgRuntime:
    """Waveform generator feeding the beat detector, one window per tick."""

    def __init__(self, spec: PpgSignal, sample_period_ms: int, rng: random.Random):
        bpm_at = spec.bpm if spec.bpm_points is None else _Track(spec.bpm_points).value
        self.waveform = PpgWaveform(
            bpm_at,
            sampling_rate_hz=spec.sampling_rate_hz,
            noise_amplitude=spec.noise_amplitude,
            rng=rng,
        )
        self.detector = PpgDetector(sampling_rate_hz=spec.sampling_rate_hz)
        self._per_tick = max(1, round(spec.sampling_rate_hz * sample_period_ms / 1000.0))
        self.bpm = 0
        self.fault = False
        self.true_beats = 0

    def advance(self) -> None:
        for _ in range(self._per_tick):
            t, value, cycle_started = self.waveform.step()
            self.true_beats += cycle_started
            _, self.bpm, self.fault = self.detector.step(t, value)


def _build_source(name: str, signal, config: "NodeConfig", rng: random.Random):
    if isinstance(signal, ConstantSignal):
        return _Constant(signal.value)
    if isinstance(signal, TrackSignal):
        return _Track(signal.points)
    if isinstance(signal, ReplaySignal):
        rows = participant_rows(signal.participant)
        by_hour = {r.hour: r for r in rows}
        values = [by_hour[h].value(name) for h in signal.hours]
        dither = name in ("humidity", "air_quality")
        return _Replay(values, config.transmit_period_ms, dither)
    if isinstance(signal, PpgSignal):
        return _PpgRuntime(signal, config.sample_period_ms, rng)
    raise TypeError(f"unsupported signal for {name}: {signal!r}")


# -- The firmware loop ----------------------------------------------------------


@dataclass(frozen=True)
class TickResult:
    frame: bytes | None
    halted: bool
    display: tuple[str, str]
    flags: DeviceFlag


@dataclass
class RunReport:
    node_id: int
    data_frames: int = 0
    halt_frames: int = 0
    dropped_frames: int = 0
    corrupted_frames: int = 0
    frames_sent: int = 0
    bytes_sent: int = 0
    duration_ms: int = 0
    completed: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class SensorNode:
    def __init__(self, config: NodeConfig):
        self.config = config
        self.scenario: Scenario = config.scenario
        self._rng = random.Random(config.rng_seed)
        self._sources = {
            name: _build_source(name, signal, config, self._rng)
            for name, signal in self.scenario.signals.items()
        }
        self.seq = 0
        self.halted = False
        self.display = ("initializing".ljust(16), "".ljust(16))
        self.report = RunReport(node_id=config.node_id)

    def _read(self, t_ms: int) -> tuple[dict, bool]:
        values = {}
        fault = False
        for name in PARAMETERS:
            source = self._sources[name]
            if isinstance(source, _PpgRuntime):
                source.advance()
                values[name] = source.bpm
                fault |= source.fault
                continue
            v = source.value(t_ms)
            if name == "humidity" and self.scenario.dht11_quantization:
                v = float(int(Decimal(str(v)).quantize(Decimal("1"), rounding=ROUND_HALF_UP)))
            if name == "air_quality" and self.scenario.mq135_quantization:
                try:
                    v = adc_to_ppm(self.config.mq135, ppm_to_adc(self.config.mq135, v))
                except (Mq135Fault, ValueError):
                    fault = True
                    v = 0.0
            if name == "heart_rate":
                v = int(v)
            values[name] = v
        return values, fault

    def tick(self, t_ms: int) -> TickResult:
        """One firmware pass: read, display, local alarms, maybe transmit."""
        if self.halted:
            return TickResult(None, True, self.display, DeviceFlag(0))
        if t_ms >= self.scenario.duration_ms:
            # Out of scenario: one all-zero tombstone so downstream can
            # tell a finished node from a dead link, then halt.
            frame = self._emit(dict.fromkeys(PARAMETERS, 0), DeviceFlag.SENSOR_FAULT)
            self.halted = True
            self.report.halt_frames += 1
            self.report.duration_ms = t_ms
            self.display = (self.display[0], "node halted".ljust(16))
            return TickResult(frame, True, self.display, DeviceFlag.SENSOR_FAULT)

        values, sensor_fault = self._read(t_ms)
        sensor_fault |= self.scenario.faults.faulted_at(t_ms)
        flags = DeviceFlag.SENSOR_FAULT if sensor_fault else DeviceFlag(0)

        # Local rule check reuses the shared sample type; received_at
        # holds node-virtual time here, it never leaves this device.
        sample = VitalsSample(
            node_id=self.config.node_id,
            seq=self.seq,
            received_at=t_ms,
            device_flags=flags,
            **values,
        )
        result = classify(sample, self.config.local_thresholds)
        emergency = False
        for name, severity in result.severities.items():
            if severity is Severity.EMERGENCY:
                emergency = True
                outputs = self.config.alert_outputs.get(name, ())
                if "buzzer" in outputs:
                    flags |= DeviceFlag.BUZZER_ON
                if "led" in outputs:
                    flags |= DeviceFlag.LED_ON

        line1 = f"B{values['body_temp']:6.2f} A{values['ambient_temp']:6.2f}".ljust(16)[:16]
        line2 = (
            "!! EMERGENCY !!".ljust(16)
            if emergency
            else (
                f"H{values['humidity']:3.0f}% Q{values['air_quality']:4.0f} "
                f"P{values['heart_rate']:3d}".ljust(16)[:16]
            )
        )
        self.display = (line1, line2)

        frame = None
        if t_ms % self.config.transmit_period_ms == 0:
            self.report.data_frames += 1
            frame = self._emit(values, flags)
        return TickResult(frame, False, self.display, flags)

    def _emit(self, values: dict, flags: DeviceFlag) -> bytes | None:
        """Encode the latest sample, applying any scheduled frame fault."""
        seq = self.seq
        self.seq = (self.seq + 1) % 65536
        frame = encode_frame(
            node_id=self.config.node_id,
            seq=seq,
            body_temp=values["body_temp"],
            ambient_temp=values["ambient_temp"],
            humidity=values["humidity"],
            air_quality=values["air_quality"],
            heart_rate=values["heart_rate"],
            flags=flags,
        )
        if seq in self.scenario.faults.drop_seq:
            self.report.dropped_frames += 1
            return None
        if seq in self.scenario.faults.corrupt_seq:
            corrupted = bytearray(frame)
            corrupted[9] ^= 0xFF  # inside the CRC-covered span
            self.report.corrupted_frames += 1
            frame = bytes(corrupted)
        return frame


# -- Transports ------------------------------------------------------------------


class CollectSink:
    """In-memory sink for tests and offline assembly."""

    def __init__(self):
        self.chunks: list[bytes] = []

    def send(self, data: bytes) -> None:
        self.chunks.append(data)

    def data(self) -> bytes:
        return b"".join(self.chunks)

    def close(self) -> None:
        pass


class FileSink:
    def __init__(self, path):
        self._fh = open(path, "wb")

    def send(self, data: bytes) -> None:
        self._fh.write(data)

    def close(self) -> None:
        self._fh.close()


class SocketSink:
    def __init__(self, host: str, port: int, connect_timeout: float = 5.0):
        self._addr = (host, port)
        self._timeout = connect_timeout
        self._sock = None
        self.reconnect()

    def reconnect(self) -> None:
        self.close()
        self._sock = socket.create_connection(self._addr, timeout=self._timeout)

    def send(self, data: bytes) -> None:
        self._sock.sendall(data)

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None


def run_node(
    config: NodeConfig,
    sink,
    *,
    speed: float | None = None,
    max_send_attempts: int = 3,
) -> RunReport:
    """Drive the node over its whole scenario into a transport sink.

    ``speed`` scales virtual time onto the wall clock (3600 runs one
    virtual hour per second); ``None`` runs unpaced. Transport errors
    are retried up to ``max_send_attempts`` per frame, then the run
    aborts with a partial report.
    """
    node = SensorNode(config)
    report = node.report
    t = 0
    wall_start = time.monotonic()
    while not node.halted:
        result = node.tick(t)
        if result.frame is not None:
            if not _send_with_retry(sink, result.frame, report, max_send_attempts):
                report.duration_ms = t
                return report
        t += config.sample_period_ms
        if speed:
            target = wall_start + (t / 1000.0) / speed
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)
    report.duration_ms = node.report.duration_ms
    report.completed = report.error is None
    return report


def _send_with_retry(sink, frame: bytes, report: RunReport, attempts: int) -> bool:
    for attempt in range(attempts):
        try:
            sink.send(frame)
            report.frames_sent += 1
            report.bytes_sent += len(frame)
            report.error = None  # recovered; only a final failure aborts
            return True
        except OSError as exc:
            report.error = f"transport failure: {exc}"
            reconnect = getattr(sink, "reconnect", None)
            if attempt + 1 < attempts and reconnect is not None:
                try:
                    time.sleep(0.05 * (attempt + 1))
                    reconnect()
                except OSError:
                    continue
    return False
