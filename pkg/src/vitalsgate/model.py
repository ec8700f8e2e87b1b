"""Shared vocabulary: measurement types, severity levels, reference bands.

The reference tables (air-quality categories, heart-rate bands by age,
participant roster) ship as CSV files under ``vitalsgate/data`` so they
can be diffed against their sources; the loaders here are the only code
that reads them.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from functools import lru_cache
from importlib import resources

# Canonical parameter keys, in wire/display order.
PARAMETERS = ("body_temp", "ambient_temp", "humidity", "air_quality", "heart_rate")

PARAMETER_UNITS = {
    "body_temp": "degC",
    "ambient_temp": "degC",
    "humidity": "%RH",
    "air_quality": "ppm",
    "heart_rate": "bpm",
}

# Physical ranges enforced on every sample.
BODY_TEMP_RANGE = (-40.0, 125.0)     # degC, sensor physical range
AMBIENT_TEMP_RANGE = (-40.0, 125.0)  # degC
HUMIDITY_RANGE = (0.0, 100.0)        # %RH
AIR_QUALITY_RANGE = (0.0, 6553.5)    # ppm, wire-representable ceiling
HEART_RATE_RANGE = (0, 255)          # bpm

SEQ_MODULUS = 65536  # sequence numbers wrap at 2^16


class Severity(enum.IntEnum):
    """Three-level severity with a total order and fixed display colors."""

    NORMAL = 0
    MODERATE = 1
    EMERGENCY = 2

    @property
    def color(self) -> str:
        return ("green", "yellow", "red")[self.value]

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Severity":
        return cls[label.upper()]


class DeviceFlag(enum.IntFlag):
    """Node-side status flags; values double as the wire bitfield."""

    BUZZER_ON = 0x01
    LED_ON = 0x02
    SENSOR_FAULT = 0x04

    def names(self) -> list[str]:
        return [f.name for f in DeviceFlag if f in self]


@dataclass(frozen=True)
class VitalsSample:
    """One timestamped reading of the five monitored parameters.

    ``received_at`` is milliseconds UTC assigned by the gateway on
    arrival; devices have no clock and never stamp time.
    """

    node_id: int
    seq: int
    body_temp: float
    ambient_temp: float
    humidity: float
    air_quality: float
    heart_rate: int
    device_flags: DeviceFlag
    received_at: int

    def value(self, parameter: str) -> float:
        return getattr(self, parameter)


class SampleValidationError(ValueError):
    """Raised with the complete list of range violations, not just the first."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def validate_sample(
    *,
    node_id: int,
    seq: int,
    body_temp: float,
    ambient_temp: float,
    humidity: float,
    air_quality: float,
    heart_rate: int,
    device_flags: DeviceFlag = DeviceFlag(0),
    received_at: int,
) -> VitalsSample:
    """Check every range invariant and build an immutable sample.

    Raises:
        SampleValidationError: carrying one named violation per
            out-of-range field (all of them, so callers can report
            everything wrong with a frame at once).
    """
    violations = []
    checks = [
        ("node_id", node_id, 0, SEQ_MODULUS - 1),
        ("seq", seq, 0, SEQ_MODULUS - 1),
        ("body_temp", body_temp, *BODY_TEMP_RANGE),
        ("ambient_temp", ambient_temp, *AMBIENT_TEMP_RANGE),
        ("humidity", humidity, *HUMIDITY_RANGE),
        ("air_quality", air_quality, *AIR_QUALITY_RANGE),
        ("heart_rate", heart_rate, *HEART_RATE_RANGE),
    ]
    for name, value, lo, hi in checks:
        if not lo <= value <= hi:
            violations.append(f"{name} out of range [{lo}, {hi}]: {value}")
    if violations:
        raise SampleValidationError(violations)
    return VitalsSample(
        node_id=node_id,
        seq=seq,
        body_temp=body_temp,
        ambient_temp=ambient_temp,
        humidity=humidity,
        air_quality=air_quality,
        heart_rate=heart_rate,
        device_flags=device_flags,
        received_at=received_at,
    )


# -- Air-quality index categories ---------------------------------------------


class AqiCategory(enum.IntEnum):
    """Six index buckets; order reflects worsening air."""

    GOOD = 0
    SATISFACTORY = 1
    MODERATE = 2
    POOR = 3
    VERY_POOR = 4
    SEVERE = 5

    @property
    def label(self) -> str:
        return {"VERY_POOR": "Very poor"}.get(self.name, self.name.capitalize())


# (category, inclusive index range); contiguous, non-overlapping.
AQI_BANDS: tuple[tuple[AqiCategory, int, int], ...] = (
    (AqiCategory.GOOD, 0, 50),
    (AqiCategory.SATISFACTORY, 51, 100),
    (AqiCategory.MODERATE, 101, 200),
    (AqiCategory.POOR, 201, 300),
    (AqiCategory.VERY_POOR, 301, 400),
    (AqiCategory.SEVERE, 401, 500),
)

AQI_SCALE_MAX = 500


def aqi_category(ppm: float) -> AqiCategory:
    """Bucket a ppm reading into its index category.

    The reading is rounded half-up to the nearest integer and looked up
    in the band table; readings beyond the 500 scale clamp to SEVERE
    (see :func:`aqi_beyond_scale` for the out-of-scale signal).

    Raises:
        ValueError: if ppm is negative.
    """
    if ppm < 0:
        raise ValueError(f"ppm must be non-negative, got {ppm}")
    index = int(Decimal(str(ppm)).quantize(Decimal("1"), rounding=ROUND_HALF_UP))
    for category, lo, hi in AQI_BANDS:
        if lo <= index <= hi:
            return category
    return AqiCategory.SEVERE


def aqi_beyond_scale(ppm: float) -> bool:
    """True when the reading exceeds the 0-500 index scale."""
    return ppm > AQI_SCALE_MAX


# -- Heart-rate reference bands ------------------------------------------------


@dataclass(frozen=True)
class HeartRateBand:
    age_label: str
    min_age_months: int
    max_age_months: int | None  # None = open-ended (">16 years")
    bpm_min: int
    bpm_max: int


def _parse_age_label(label: str) -> tuple[int, int | None]:
    """Translate a band label like '4-12 month' or '>16 years' to months."""
    label = label.strip()
    if label.startswith(">"):
        years = int(label[1:].split()[0])
        return years * 12 + 1, None
    span, unit = label.rsplit(" ", 1)
    lo, hi = (int(p) for p in span.split("-"))
    factor = 1 if unit.startswith("month") else 12
    return lo * factor, hi * factor


def _data_text(name: str) -> str:
    return resources.files("vitalsgate.data").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def heart_rate_bands() -> tuple[HeartRateBand, ...]:
    """The nine reference rows, in table order."""
    bands = []
    for row in csv.DictReader(_data_text("heart_rate_bands.csv").splitlines()):
        lo_m, hi_m = _parse_age_label(row["age_band"])
        bands.append(
            HeartRateBand(
                age_label=row["age_band"],
                min_age_months=lo_m,
                max_age_months=hi_m,
                bpm_min=int(row["bpm_min"]),
                bpm_max=int(row["bpm_max"]),
            )
        )
    return tuple(bands)


def normal_hr_range(age_years: int) -> tuple[int, int]:
    """Inclusive normal bpm range for an age in whole years.

    Band upper bounds are inclusive and lookup takes the first matching
    row top-down, which resolves the boundary overlaps between adjacent
    rows deterministically. Ages above the last bounded band fall into
    the open-ended adult row.
    """
    if age_years < 0:
        raise ValueError(f"age_years must be non-negative, got {age_years}")
    months = age_years * 12
    for band in heart_rate_bands():
        if band.max_age_months is None:
            if months >= band.min_age_months:
                return band.bpm_min, band.bpm_max
        elif band.min_age_months <= months <= band.max_age_months:
            return band.bpm_min, band.bpm_max
    # Unreachable with the shipped table (adult row is open-ended).
    raise RuntimeError(f"no heart-rate band covers age {age_years}")


# -- Participant roster ----------------------------------------------------------


@dataclass(frozen=True)
class ParticipantProfile:
    participant_id: int
    health_status: str
    age_min: int
    age_max: int | None  # None = open-ended ("50+")
    gender: str

    @property
    def age_label(self) -> str:
        return f"{self.age_min}+" if self.age_max is None else f"{self.age_min}-{self.age_max}"


@lru_cache(maxsize=None)
def participants() -> tuple[ParticipantProfile, ...]:
    """The five bundled participant profiles."""
    out = []
    for row in csv.DictReader(_data_text("participants.csv").splitlines()):
        age = row["age_range"].strip()
        if age.endswith("+"):
            age_min, age_max = int(age[:-1]), None
        else:
            lo, hi = age.split("-")
            age_min, age_max = int(lo), int(hi)
        if age_max is not None and age_min > age_max:
            raise ValueError(f"participant {row['participant']}: inverted age range {age}")
        out.append(
            ParticipantProfile(
                participant_id=int(row["participant"]),
                health_status=row["health_status"],
                age_min=age_min,
                age_max=age_max,
                gender=row["gender"],
            )
        )
    return tuple(out)


def participant(participant_id: int) -> ParticipantProfile | None:
    for p in participants():
        if p.participant_id == participant_id:
            return p
    return None
