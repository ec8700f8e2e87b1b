"""Hourly aggregation, report tables, and chart series.

All arithmetic here is exact decimal: record values arrive on a 0.01
or 0.1 grid, sums of their Decimal images are exact, and rounding
happens once, at presentation. Two of the reference averages fall
exactly on a half boundary (79.475, 355.785), so binary floats would
round them wrong.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import CORPUS_HOURS, CORPUS_PARTICIPANTS, CorpusRow, load_corpus
from .model import PARAMETERS, PARAMETER_UNITS

HOUR_MS = 3_600_000
CENT = Decimal("0.01")
UNIT = Decimal("1")

# Reference per-person averages (columns = participants 1..5) and the
# grand humidity mean; `corpus validate` recomputes against these.
EXPECTED_AVERAGES: dict[str, tuple[str, ...]] = {
    "body_temp": ("34.10", "33.21", "31.43", "36.60", "33.61"),
    "heart_rate": ("71", "85", "73", "88", "95"),
    "ambient_temp": ("30.62", "30.44", "30.53", "31.01", "30.05"),
    "humidity": ("75.81", "82.79", "84.25", "74.04", "79.48"),
    "air_quality": ("393.68", "412.70", "437.38", "355.79", "397.91"),
}
EXPECTED_GRAND_HUMIDITY_MEAN = "79.27"


def to_decimal(value) -> Decimal:
    return value if isinstance(value, Decimal) else Decimal(str(value))


def round_half_up(value: Decimal, quantum: Decimal = CENT) -> Decimal:
    return value.quantize(quantum, rounding=ROUND_HALF_UP)


def mean_decimal(values: Sequence) -> Decimal:
    if not values:
        raise ValueError("mean of empty sequence")
    return sum((to_decimal(v) for v in values), Decimal(0)) / len(values)


def _quantum(parameter: str) -> Decimal:
    return UNIT if parameter == "heart_rate" else CENT


# -- Bucketed means --------------------------------------------------------------


@dataclass(frozen=True)
class Bucket:
    start_ms: int
    count: int
    means: Mapping[str, Decimal]  # unrounded


def bucket_means(records: Iterable[Mapping], start_ms: int, step_ms: int) -> list[Bucket]:
    """Mean of every parameter per [start + k*step, start + (k+1)*step).

    Records must be time-ordered (the stores guarantee arrival order);
    unordered input raises. Buckets with no samples are omitted.
    """
    if step_ms <= 0:
        raise ValueError("step_ms must be positive")
    sums: dict[int, dict] = {}
    counts: dict[int, int] = {}
    prev_ts = None
    for record in records:
        ts = record["received_at"]
        if prev_ts is not None and ts < prev_ts:
            raise ValueError("records must be ordered by received_at")
        prev_ts = ts
        if ts < start_ms:
            continue
        k = (ts - start_ms) // step_ms
        bucket = sums.setdefault(k, {p: Decimal(0) for p in PARAMETERS})
        for p in PARAMETERS:
            bucket[p] += to_decimal(record[p])
        counts[k] = counts.get(k, 0) + 1
    return [
        Bucket(
            start_ms=start_ms + k * step_ms,
            count=counts[k],
            means={p: sums[k][p] / counts[k] for p in PARAMETERS},
        )
        for k in sorted(sums)
    ]


@dataclass(frozen=True)
class HourlyAggregate:
    node_id: int
    hour_index: int  # 1-based elapsed hour
    means: Mapping[str, Decimal]
    count: int


def aggregate_hourly(
    node_id: int, records: Iterable[Mapping], start_ms: int, hour_ms: int = HOUR_MS
) -> list[HourlyAggregate]:
    """Per-parameter hourly means, hours counted from ``start_ms``."""
    return [
        HourlyAggregate(
            node_id=node_id,
            hour_index=(b.start_ms - start_ms) // hour_ms + 1,
            means=b.means,
            count=b.count,
        )
        for b in bucket_means(records, start_ms, hour_ms)
    ]


# -- Report tables ---------------------------------------------------------------


@dataclass(frozen=True)
class TableReport:
    """Hours x persons matrix for one parameter, plus the Average row.

    Cells are rounded for presentation; the Average row is computed
    from the unrounded hourly means and then rounded. ``None`` marks a
    gap (no data for that hour).
    """

    parameter: str
    persons: tuple[int, ...]
    hours: tuple[int, ...]
    cells: Mapping[int, Mapping[int, Decimal | None]]  # hour -> person -> value
    average: Mapping[int, Decimal | None]  # person -> value
    rounding: str

    @property
    def complete(self) -> bool:
        return all(
            self.cells[h][p] is not None for h in self.hours for p in self.persons
        ) and all(self.average[p] is not None for p in self.persons)


def _build_report(
    parameter: str,
    persons: Sequence[int],
    hours: Sequence[int],
    unrounded: Mapping[int, Mapping[int, Decimal | None]],  # person -> hour -> value
) -> TableReport:
    q = _quantum(parameter)
    cells = {
        h: {p: (None if unrounded[p].get(h) is None else round_half_up(unrounded[p][h], q)) for p in persons}
        for h in hours
    }
    average = {}
    for p in persons:
        values = [unrounded[p][h] for h in hours if unrounded[p].get(h) is not None]
        average[p] = round_half_up(mean_decimal(values), q) if len(values) == len(hours) else None
    return TableReport(
        parameter=parameter,
        persons=tuple(persons),
        hours=tuple(hours),
        cells=cells,
        average=average,
        rounding="half-up to integer" if q == UNIT else "half-up to 0.01",
    )


def table_report_from_corpus(
    parameter: str, rows: Sequence[CorpusRow] | None = None
) -> TableReport:
    """The reference table, straight from the bundled corpus rows."""
    rows = list(rows) if rows is not None else load_corpus()
    unrounded: dict[int, dict[int, Decimal]] = {p: {} for p in CORPUS_PARTICIPANTS}
    for row in rows:
        unrounded[row.participant][row.hour] = to_decimal(row.value(parameter))
    return _build_report(parameter, CORPUS_PARTICIPANTS, CORPUS_HOURS, unrounded)


def table_report_from_records(
    parameter: str,
    records_by_person: Mapping[int, Iterable[Mapping]],
    hours: Sequence[int] = CORPUS_HOURS,
    hour_ms: int = HOUR_MS,
) -> TableReport:
    """Regenerate the table from stored records (elapsed-hour buckets).

    Hour 1 starts at each node's first record; missing hours appear as
    gaps, never interpolated. Heart-rate means keep full precision
    until the final rounding, so a 94.5 mean prints as 95.
    """
    persons = sorted(records_by_person)
    unrounded: dict[int, dict[int, Decimal]] = {p: {} for p in persons}
    for person in persons:
        records = list(records_by_person[person])
        if not records:
            continue
        start = records[0]["received_at"]
        for agg in aggregate_hourly(person, records, start, hour_ms):
            if agg.hour_index in hours:
                unrounded[person][agg.hour_index] = agg.means[parameter]
    return _build_report(parameter, persons, hours, unrounded)


def grand_mean(report: TableReport) -> Decimal | None:
    """Mean of the per-person Average values, rounded half-up to 0.01."""
    values = [report.average[p] for p in report.persons]
    if any(v is None for v in values):
        return None
    return round_half_up(mean_decimal(values), CENT)


def chart_series(report: TableReport) -> dict[int, list[tuple[int, Decimal]]]:
    """Plot-ready (hour, value) series per person; values = table cells."""
    return {
        p: [(h, report.cells[h][p]) for h in report.hours if report.cells[h][p] is not None]
        for p in report.persons
    }


def validate_corpus(rows: Sequence[CorpusRow] | None = None) -> list[str]:
    """Recompute every Average row and the grand humidity mean.

    Returns a list of mismatch descriptions (empty = the corpus matches
    the reference tables), naming the parameter and participant column
    of each failure.
    """
    rows = list(rows) if rows is not None else load_corpus()
    problems = []
    for parameter, expected in EXPECTED_AVERAGES.items():
        report = table_report_from_corpus(parameter, rows)
        for person, want in zip(CORPUS_PARTICIPANTS, expected):
            got = report.average[person]
            if got is None or str(got) != want:
                problems.append(
                    f"{parameter} person {person}: Average {got} != expected {want}"
                )
    humidity = table_report_from_corpus("humidity", rows)
    gm = grand_mean(humidity)
    if gm is None or str(gm) != EXPECTED_GRAND_HUMIDITY_MEAN:
        problems.append(
            f"humidity grand mean {gm} != expected {EXPECTED_GRAND_HUMIDITY_MEAN}"
        )
    return problems


# -- Exports ----------------------------------------------------------------------


def _cell_str(value: Decimal | None) -> str:
    return "" if value is None else str(value)


def write_table_csv(report: TableReport, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour"] + [f"person_{p}" for p in report.persons])
        for h in report.hours:
            writer.writerow([h] + [_cell_str(report.cells[h][p]) for p in report.persons])
        writer.writerow(["Average"] + [_cell_str(report.average[p]) for p in report.persons])


def write_series_csv(report: TableReport, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant", "hour", "value"])
        for person, points in chart_series(report).items():
            for hour, value in points:
                writer.writerow([person, hour, value])


def write_table_json(report: TableReport, path: Path | str) -> None:
    doc = {
        "parameter": report.parameter,
        "unit": PARAMETER_UNITS[report.parameter],
        "rounding": report.rounding,
        "complete": report.complete,
        "rows": [
            {"hour": h, "values": {str(p): _cell_str(report.cells[h][p]) for p in report.persons}}
            for h in report.hours
        ],
        "average": {str(p): _cell_str(report.average[p]) for p in report.persons},
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
