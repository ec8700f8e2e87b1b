"""Scenario files: what each virtual sensor reads, and when to misbehave.

Scenarios are TOML (sections of key-value pairs). Each of the five
parameters gets a signal source: a constant, a piecewise-linear track,
corpus replay, or (heart rate only) a synthetic pulse waveform fed
through the beat detector. A fault schedule can drop or corrupt frames
by sequence number and force sensor-fault windows.

Example::

    [node]
    node_id = 1
    rng_seed = 7

    [scenario]
    replay_participant = 1      # all five signals from the corpus

    [faults]
    corrupt_seq = [5]
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..corpus import CORPUS_HOURS, CORPUS_PARTICIPANTS
from ..model import PARAMETERS

HOUR_MS = 3_600_000


class ScenarioError(ValueError):
    """Invalid scenario file; message lines carry best-effort line numbers."""

    def __init__(self, problems: list[str]):
        super().__init__("\n".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ConstantSignal:
    value: float


@dataclass(frozen=True)
class TrackSignal:
    points: tuple[tuple[int, float], ...]  # (t_ms, value), time-ordered


@dataclass(frozen=True)
class ReplaySignal:
    participant: int
    hours: tuple[int, ...] = CORPUS_HOURS


@dataclass(frozen=True)
class PpgSignal:
    bpm: float | None = None
    bpm_points: tuple[tuple[int, float], ...] | None = None
    sampling_rate_hz: float = 100.0
    noise_amplitude: float = 0.0


Signal = ConstantSignal | TrackSignal | ReplaySignal | PpgSignal


@dataclass(frozen=True)
class FaultSchedule:
    drop_seq: frozenset[int] = frozenset()
    corrupt_seq: frozenset[int] = frozenset()
    sensor_fault_windows: tuple[tuple[int, int], ...] = ()  # [start_ms, end_ms)

    def faulted_at(self, t_ms: int) -> bool:
        return any(a <= t_ms < b for a, b in self.sensor_fault_windows)


@dataclass(frozen=True)
class Scenario:
    signals: dict[str, Signal]
    duration_ms: int
    faults: FaultSchedule = FaultSchedule()
    # Realistic sensor quantization; both off for corpus replay so the
    # reference tables reproduce exactly.
    dht11_quantization: bool = True
    mq135_quantization: bool = True
    speed_hint: float | None = None  # wall-clock compression when run live


def _line_of(text: str, *needles: str) -> str:
    """Best-effort 'line N: ' prefix for a semantic error."""
    for i, line in enumerate(text.splitlines(), start=1):
        if any(n in line for n in needles):
            return f"line {i}: "
    return ""


def _parse_points(raw, where: str, problems: list[str], text: str):
    points = []
    if not isinstance(raw, list) or not raw:
        problems.append(f"{_line_of(text, 'points')}{where}: points must be a non-empty list")
        return ()
    for item in raw:
        if not (isinstance(item, list) and len(item) == 2):
            problems.append(f"{_line_of(text, 'points')}{where}: each point is [t_ms, value]")
            return ()
        points.append((int(item[0]), float(item[1])))
    if points != sorted(points, key=lambda p: p[0]):
        problems.append(f"{_line_of(text, 'points')}{where}: points must be time-ordered")
    return tuple(points)


def _parse_signal(name: str, spec, text: str, problems: list[str]) -> Signal | None:
    where = f"signals.{name}"
    if not isinstance(spec, dict):
        problems.append(f"{_line_of(text, where, name)}{where}: must be a section")
        return None
    kind = spec.get("kind")
    if kind == "constant":
        if "value" not in spec:
            problems.append(f"{_line_of(text, name)}{where}: constant needs a value")
            return None
        return ConstantSignal(value=float(spec["value"]))
    if kind == "track":
        return TrackSignal(points=_parse_points(spec.get("points"), where, problems, text))
    if kind == "replay":
        participant = spec.get("participant")
        if participant not in CORPUS_PARTICIPANTS:
            problems.append(
                f"{_line_of(text, 'participant')}{where}: participant must be one of "
                f"{list(CORPUS_PARTICIPANTS)}, got {participant!r}"
            )
            return None
        hours = tuple(spec.get("hours", CORPUS_HOURS))
        bad = [h for h in hours if h not in CORPUS_HOURS]
        if bad or not hours:
            problems.append(
                f"{_line_of(text, 'hours')}{where}: hours must be a non-empty subset of "
                f"{list(CORPUS_HOURS)}, got {list(hours)}"
            )
            return None
        return ReplaySignal(participant=int(participant), hours=hours)
    if kind == "ppg":
        if name != "heart_rate":
            problems.append(f"{_line_of(text, name)}{where}: ppg applies to heart_rate only")
            return None
        bpm_points = None
        bpm = spec.get("bpm")
        if "points" in spec:
            bpm_points = _parse_points(spec["points"], where, problems, text)
        elif bpm is None:
            problems.append(f"{_line_of(text, name)}{where}: ppg needs bpm or points")
            return None
        return PpgSignal(
            bpm=None if bpm is None else float(bpm),
            bpm_points=bpm_points,
            sampling_rate_hz=float(spec.get("sampling_rate_hz", 100.0)),
            noise_amplitude=float(spec.get("noise_amplitude", 0.0)),
        )
    problems.append(
        f"{_line_of(text, name)}{where}: unknown kind {kind!r} "
        "(constant | track | replay | ppg)"
    )
    return None


def _natural_duration(signal: Signal) -> int | None:
    if isinstance(signal, ReplaySignal):
        return len(signal.hours) * HOUR_MS
    if isinstance(signal, TrackSignal) and signal.points:
        return signal.points[-1][0]
    if isinstance(signal, PpgSignal) and signal.bpm_points:
        return signal.bpm_points[-1][0]
    return None


def parse_scenario(text: str) -> tuple[dict, Scenario]:
    """Parse scenario TOML into ([node] table, Scenario).

    Raises:
        ScenarioError: listing every problem found, with line numbers
            (exact for syntax errors, best-effort for semantic ones).
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"scenario syntax: {exc}"]) from exc
    problems: list[str] = []
    node_table = doc.get("node", {})
    if not isinstance(node_table, dict):
        problems.append(f"{_line_of(text, '[node]')}node: must be a section")
        node_table = {}
    sc = doc.get("scenario", {})

    signals: dict[str, Signal] = {}
    replay_all = sc.get("replay_participant")
    if replay_all is not None:
        if replay_all not in CORPUS_PARTICIPANTS:
            problems.append(
                f"{_line_of(text, 'replay_participant')}scenario.replay_participant: "
                f"must be one of {list(CORPUS_PARTICIPANTS)}, got {replay_all!r}"
            )
        else:
            hours = tuple(sc.get("replay_hours", CORPUS_HOURS))
            for name in PARAMETERS:
                signals[name] = ReplaySignal(participant=int(replay_all), hours=hours)

    for name, spec in doc.get("signals", {}).items():
        if name not in PARAMETERS:
            problems.append(
                f"{_line_of(text, name)}signals.{name}: unknown parameter "
                f"(expected one of {list(PARAMETERS)})"
            )
            continue
        parsed = _parse_signal(name, spec, text, problems)
        if parsed is not None:
            signals[name] = parsed

    missing = [p for p in PARAMETERS if p not in signals]
    if missing and not problems:
        problems.append(
            f"{_line_of(text, '[signals')}signals: missing sources for {missing} "
            "(or set scenario.replay_participant)"
        )

    faults_table = doc.get("faults", {})
    windows = []
    for w in faults_table.get("sensor_fault_windows", []):
        if not (isinstance(w, list) and len(w) == 2 and w[0] <= w[1]):
            problems.append(
                f"{_line_of(text, 'sensor_fault_windows')}faults.sensor_fault_windows: "
                f"each window is [start_ms, end_ms], got {w!r}"
            )
        else:
            windows.append((int(w[0]), int(w[1])))
    faults = FaultSchedule(
        drop_seq=frozenset(int(s) for s in faults_table.get("drop_seq", [])),
        corrupt_seq=frozenset(int(s) for s in faults_table.get("corrupt_seq", [])),
        sensor_fault_windows=tuple(windows),
    )

    duration = sc.get("duration_ms")
    if duration is None:
        naturals = [d for d in (_natural_duration(s) for s in signals.values()) if d is not None]
        if naturals:
            duration = max(naturals)
        elif not problems:
            problems.append(
                f"{_line_of(text, '[scenario]')}scenario: no finite duration; "
                "set scenario.duration_ms or use a replay/track source"
            )
    if duration is not None and duration < 0:
        problems.append(f"{_line_of(text, 'duration_ms')}scenario.duration_ms: must be >= 0")

    if problems:
        raise ScenarioError(problems)

    is_replay = any(isinstance(s, ReplaySignal) for s in signals.values())
    return node_table, Scenario(
        signals=signals,
        duration_ms=int(duration),
        faults=faults,
        dht11_quantization=bool(sc.get("dht11_integer_quantization", not is_replay)),
        mq135_quantization=bool(sc.get("mq135_adc_quantization", not is_replay)),
        speed_hint=float(sc["time_compression"]) if "time_compression" in sc else None,
    )


def load_scenario_file(path: str | Path) -> tuple[dict, Scenario]:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def replay_scenario(
    participant: int,
    hours: tuple[int, ...] = CORPUS_HOURS,
    faults: FaultSchedule = FaultSchedule(),
) -> Scenario:
    """Programmatic corpus-replay scenario (quantization off)."""
    return Scenario(
        signals={name: ReplaySignal(participant=participant, hours=hours) for name in PARAMETERS},
        duration_ms=len(hours) * HOUR_MS,
        faults=faults,
        dht11_quantization=False,
        mq135_quantization=False,
    )
