"""Severity classification and alert lifecycle.

Classification is a pure function of (sample, profile). Alert state is
per node and single-writer: the gateway serializes samples per node
before stepping the engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .model import PARAMETERS, DeviceFlag, Severity, VitalsSample, normal_hr_range


@dataclass(frozen=True)
class BandSide:
    """Boundaries on one side of a parameter's normal region.

    A value strictly beyond a boundary takes that boundary's severity;
    with ``inclusive`` the boundary value itself fires too. ``moderate``
    may be omitted where the emergency region starts immediately (an
    adult heart rate above 100 is an emergency with no moderate gap).
    """

    moderate: float | None = None
    emergency: float | None = None
    inclusive: bool = False


@dataclass(frozen=True)
class ParameterThresholds:
    low: BandSide | None = None
    high: BandSide | None = None


@dataclass(frozen=True)
class ThresholdProfile:
    """Per-parameter band boundaries, editable at runtime.

    ``profile_version`` is a monotone write counter managed by whoever
    stores the profile; classification records it on every result.
    """

    parameters: Mapping[str, ParameterThresholds]
    profile_version: int = 1


class ProfileValidationError(ValueError):
    """Rejected profile; ``errors`` lists field-level reasons."""

    def __init__(self, errors: list[dict]):
        super().__init__("; ".join(f"{e['field']}: {e['reason']}" for e in errors))
        self.errors = errors


def _side_to_dict(side: BandSide | None):
    if side is None:
        return None
    return {"moderate": side.moderate, "emergency": side.emergency, "inclusive": side.inclusive}


def profile_to_dict(profile: ThresholdProfile) -> dict:
    return {
        "profile_version": profile.profile_version,
        "parameters": {
            name: {"low": _side_to_dict(pt.low), "high": _side_to_dict(pt.high)}
            for name, pt in profile.parameters.items()
        },
    }


def _side_errors(path: str, data, errors: list[dict]) -> BandSide | None:
    if data is None:
        return None
    if not isinstance(data, dict):
        errors.append({"field": path, "reason": "must be an object or null"})
        return None
    side = {}
    for key in ("moderate", "emergency"):
        v = data.get(key)
        if v is not None and not isinstance(v, (int, float)):
            errors.append({"field": f"{path}.{key}", "reason": "must be a number or null"})
            v = None
        side[key] = v
    inclusive = data.get("inclusive", False)
    if not isinstance(inclusive, bool):
        errors.append({"field": f"{path}.inclusive", "reason": "must be a boolean"})
        inclusive = False
    if side["moderate"] is None and side["emergency"] is None:
        errors.append({"field": path, "reason": "enabled side needs a moderate or emergency boundary"})
    return BandSide(moderate=side["moderate"], emergency=side["emergency"], inclusive=inclusive)


def profile_from_dict(data: Mapping) -> ThresholdProfile:
    """Parse and fully validate a profile document.

    Raises:
        ProfileValidationError: with one entry per offending field; the
            profile is rejected as a whole, never partially applied.
    """
    errors: list[dict] = []
    version = data.get("profile_version", 1)
    if not isinstance(version, int) or version < 1:
        errors.append({"field": "profile_version", "reason": "must be a positive integer"})
        version = 1
    params_in = data.get("parameters")
    if not isinstance(params_in, Mapping):
        raise ProfileValidationError(
            errors + [{"field": "parameters", "reason": "missing parameters object"}]
        )
    parameters = {}
    for name in PARAMETERS:
        if name not in params_in:
            errors.append({"field": f"parameters.{name}", "reason": "missing parameter"})
            continue
        entry = params_in[name]
        if not isinstance(entry, Mapping):
            errors.append({"field": f"parameters.{name}", "reason": "must be an object"})
            continue
        low = _side_errors(f"parameters.{name}.low", entry.get("low"), errors)
        high = _side_errors(f"parameters.{name}.high", entry.get("high"), errors)
        pt = ParameterThresholds(low=low, high=high)
        errors.extend(
            {"field": f"parameters.{name}.{side_name}", "reason": reason}
            for side_name, reason in _ordering_errors(pt)
        )
        parameters[name] = pt
    for name in params_in:
        if name not in PARAMETERS:
            errors.append({"field": f"parameters.{name}", "reason": "unknown parameter"})
    if errors:
        raise ProfileValidationError(errors)
    return ThresholdProfile(parameters=parameters, profile_version=version)


def _ordering_errors(pt: ParameterThresholds) -> list[tuple[str, str]]:
    """Boundary ordering: moderate sits between normal and emergency."""
    out = []
    if pt.high and pt.high.moderate is not None and pt.high.emergency is not None:
        if not pt.high.moderate < pt.high.emergency:
            out.append(("high", "moderate boundary must lie below the emergency boundary"))
    if pt.low and pt.low.moderate is not None and pt.low.emergency is not None:
        if not pt.low.moderate > pt.low.emergency:
            out.append(("low", "moderate boundary must lie above the emergency boundary"))
    return out


def validate_profile(profile: ThresholdProfile) -> list[dict]:
    """Field-level problems with an already-built profile (empty = valid)."""
    try:
        profile_from_dict(profile_to_dict(profile))
    except ProfileValidationError as exc:
        return exc.errors
    return []


def default_profile(age_years: int = 30, profile_version: int = 1) -> ThresholdProfile:
    """Default bands anchored to the reference sources.

    Fever from 38.1 degC (moderate from 37.5); humidity moderate above
    60 %RH, emergency above 70; air quality moderate above 200 ppm,
    emergency above 400; ambient normal 24-31 degC with moderate bands
    to 20 and 35; heart rate normal per the age reference table, with
    adult emergencies above 100 bpm. Moderate boundaries are defaults
    of this artifact, not reference values, and are fully editable.
    """
    hr_min, hr_max = normal_hr_range(age_years)
    if age_years >= 17:
        hr_high = BandSide(moderate=None, emergency=100)
    else:
        hr_high = BandSide(moderate=hr_max, emergency=hr_max + 20)
    return ThresholdProfile(
        profile_version=profile_version,
        parameters={
            # Low-side body temperature ships disabled: untreated in the source.
            "body_temp": ParameterThresholds(
                high=BandSide(moderate=37.5, emergency=38.1, inclusive=True)
            ),
            "ambient_temp": ParameterThresholds(
                low=BandSide(moderate=24.0, emergency=20.0),
                high=BandSide(moderate=31.0, emergency=35.0),
            ),
            "humidity": ParameterThresholds(
                high=BandSide(moderate=60.0, emergency=70.0)
            ),
            "air_quality": ParameterThresholds(
                high=BandSide(moderate=200.0, emergency=400.0)
            ),
            "heart_rate": ParameterThresholds(
                low=BandSide(moderate=hr_min, emergency=hr_min - 10),
                high=hr_high,
            ),
        },
    )


# -- Classification -------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    severities: Mapping[str, Severity]
    overall: Severity
    fault_parameters: frozenset[str]
    profile_version: int


def _fires(value: float, boundary: float, inclusive: bool, high: bool) -> bool:
    if high:
        return value >= boundary if inclusive else value > boundary
    return value <= boundary if inclusive else value < boundary


def _band_severity(value: float, pt: ParameterThresholds) -> Severity:
    severity = Severity.NORMAL
    for side, high in ((pt.low, False), (pt.high, True)):
        if side is None:
            continue
        if side.emergency is not None and _fires(value, side.emergency, side.inclusive, high):
            severity = max(severity, Severity.EMERGENCY)
        elif side.moderate is not None and _fires(value, side.moderate, side.inclusive, high):
            severity = max(severity, Severity.MODERATE)
    return severity


def classify(sample: VitalsSample, profile: ThresholdProfile) -> Classification:
    """Map each parameter to its band; overall is the maximum severity.

    A sample carrying the sensor-fault flag classifies every parameter
    as an emergency with a fault annotation: the wire cannot say which
    sensor failed, and a fault must never read as reassuring.
    """
    faulted = DeviceFlag.SENSOR_FAULT in sample.device_flags
    severities = {}
    for name in PARAMETERS:
        if faulted:
            severities[name] = Severity.EMERGENCY
        else:
            severities[name] = _band_severity(sample.value(name), profile.parameters[name])
    return Classification(
        severities=severities,
        overall=max(severities.values()),
        fault_parameters=frozenset(PARAMETERS) if faulted else frozenset(),
        profile_version=profile.profile_version,
    )


# -- Alert lifecycle -------------------------------------------------------------


@dataclass(frozen=True)
class HysteresisConfig:
    """Consecutive-sample requirements before raising and clearing.

    raise_after = clear_after = 1 reproduces instantaneous alerting.
    """

    raise_after: int = 3
    clear_after: int = 5

    def __post_init__(self):
        if self.raise_after < 1 or self.clear_after < 1:
            raise ValueError("hysteresis counts must be >= 1")


# Raise and clear on every single sample; replay tests run with this.
INSTANT_ALERTS = HysteresisConfig(raise_after=1, clear_after=1)


@dataclass
class AlertEvent:
    """Lifecycle record of one raised emergency on one parameter."""

    alert_id: str
    node_id: int
    parameter: str
    severity: Severity
    value: float
    fault: bool
    profile_version: int
    raised_at: int
    cleared_at: int | None = None
    acknowledged_by: str | None = None
    acknowledged_at: int | None = None

    @property
    def state(self) -> str:
        if self.acknowledged_by is not None:
            return "acked"
        return "cleared" if self.cleared_at is not None else "open"

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "node_id": self.node_id,
            "parameter": self.parameter,
            "severity": self.severity.label,
            "value": self.value,
            "fault": self.fault,
            "profile_version": self.profile_version,
            "raised_at": self.raised_at,
            "cleared_at": self.cleared_at,
            "acknowledged_by": self.acknowledged_by,
            "acknowledged_at": self.acknowledged_at,
            "state": self.state,
        }


@dataclass
class _ParamAlertState:
    emergency_run: int = 0
    normal_run: int = 0
    open_alert: AlertEvent | None = None


@dataclass(frozen=True)
class AlertTransition:
    kind: str  # "raised" | "cleared"
    alert: AlertEvent


class AlertEngine:
    """Per-node hysteresis state machine over classified samples.

    An emergency run of ``raise_after`` samples raises; a normal run of
    ``clear_after`` clears. Moderate samples freeze both run counters
    so borderline oscillation can neither raise nor suppress an alert
    on its own. At most one alert is open per parameter.
    """

    def __init__(self, node_id: int, hysteresis: HysteresisConfig | None = None):
        self.node_id = node_id
        self.hysteresis = hysteresis or HysteresisConfig()
        self._params: dict[str, _ParamAlertState] = {p: _ParamAlertState() for p in PARAMETERS}

    def step(
        self, classification: Classification, sample: VitalsSample
    ) -> list[AlertTransition]:
        """Advance every parameter's state for one in-order sample."""
        transitions = []
        for name in PARAMETERS:
            st = self._params[name]
            severity = classification.severities[name]
            if severity is Severity.EMERGENCY:
                st.emergency_run += 1
                st.normal_run = 0
            elif severity is Severity.NORMAL:
                st.normal_run += 1
                st.emergency_run = 0
            # Moderate freezes both counters.
            if st.open_alert is None and st.emergency_run >= self.hysteresis.raise_after:
                alert = AlertEvent(
                    alert_id=f"{self.node_id}:{name}:{sample.received_at}",
                    node_id=self.node_id,
                    parameter=name,
                    severity=Severity.EMERGENCY,
                    value=float(sample.value(name)),
                    fault=name in classification.fault_parameters,
                    profile_version=classification.profile_version,
                    raised_at=sample.received_at,
                )
                st.open_alert = alert
                transitions.append(AlertTransition("raised", alert))
            elif st.open_alert is not None and st.normal_run >= self.hysteresis.clear_after:
                alert = st.open_alert
                alert.cleared_at = sample.received_at
                st.open_alert = None
                transitions.append(AlertTransition("cleared", alert))
        return transitions

    def open_alerts(self) -> list[AlertEvent]:
        return [st.open_alert for st in self._params.values() if st.open_alert is not None]

    def counters(self) -> dict[str, tuple[int, int]]:
        return {p: (st.emergency_run, st.normal_run) for p, st in self._params.items()}

    def restore(
        self,
        open_alerts: Iterable[AlertEvent] = (),
        counters: Mapping[str, tuple[int, int]] | None = None,
    ) -> None:
        """Reinstall recovered state (used after a gateway restart)."""
        for alert in open_alerts:
            self._params[alert.parameter].open_alert = alert
        for name, (e_run, n_run) in (counters or {}).items():
            st = self._params[name]
            st.emergency_run = e_run
            st.normal_run = n_run
