"""Bundled measurement corpus: 30 hourly rows, five participants x six hours.

Values are carried as strings-turned-Decimal where exactness matters;
the replayer and analytics both read through this module so there is a
single transcription of record.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import Decimal
from importlib import resources

CORPUS_RESOURCE = "corpus/tables_5_9.csv"
CORPUS_HOURS = (1, 2, 3, 4, 5, 6)
CORPUS_PARTICIPANTS = (1, 2, 3, 4, 5)

# corpus CSV column -> canonical parameter key
_COLUMNS = {
    "body_temp_c": "body_temp",
    "heart_rate_bpm": "heart_rate",
    "ambient_temp_c": "ambient_temp",
    "humidity_pct": "humidity",
    "air_ppm": "air_quality",
}


@dataclass(frozen=True)
class CorpusRow:
    participant: int
    hour: int
    body_temp: Decimal
    ambient_temp: Decimal
    humidity: Decimal
    air_quality: Decimal
    heart_rate: int

    def value(self, parameter: str) -> Decimal | int:
        return getattr(self, parameter)


def corpus_text() -> str:
    return (
        resources.files("vitalsgate.data").joinpath(CORPUS_RESOURCE).read_text(encoding="utf-8")
    )


def load_corpus(text: str | None = None) -> list[CorpusRow]:
    """Parse the corpus CSV (bundled by default) into ordered rows.

    Raises:
        ValueError: if the file does not contain exactly the expected
            30 (participant, hour) cells.
    """
    rows = []
    for raw in csv.DictReader((text or corpus_text()).splitlines()):
        rows.append(
            CorpusRow(
                participant=int(raw["participant"]),
                hour=int(raw["hour"]),
                body_temp=Decimal(raw["body_temp_c"]),
                ambient_temp=Decimal(raw["ambient_temp_c"]),
                humidity=Decimal(raw["humidity_pct"]),
                air_quality=Decimal(raw["air_ppm"]),
                heart_rate=int(raw["heart_rate_bpm"]),
            )
        )
    cells = {(r.participant, r.hour) for r in rows}
    expected = {(p, h) for p in CORPUS_PARTICIPANTS for h in CORPUS_HOURS}
    if cells != expected:
        missing = sorted(expected - cells)
        extra = sorted(cells - expected)
        raise ValueError(f"corpus cells mismatch: missing={missing} extra={extra}")
    rows.sort(key=lambda r: (r.participant, r.hour))
    return rows


def participant_rows(participant_id: int, rows: list[CorpusRow] | None = None) -> list[CorpusRow]:
    """Hour-ordered rows for one participant."""
    rows = rows if rows is not None else load_corpus()
    mine = [r for r in rows if r.participant == participant_id]
    if not mine:
        raise ValueError(f"participant {participant_id} not in corpus")
    return mine
