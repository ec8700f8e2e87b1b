"""Aggregation exactness and reproduction of the reference tables."""

import random
from decimal import Decimal
from pathlib import Path

import pytest

from vitalsgate.analytics import (
    EXPECTED_AVERAGES,
    bucket_means,
    chart_series,
    grand_mean,
    table_report_from_corpus,
    table_report_from_records,
    validate_corpus,
    write_series_csv,
    write_table_csv,
    write_table_json,
)
from vitalsgate.corpus import load_corpus, corpus_text

GOLDEN_DIR = Path(__file__).parent / "goldens"

# Hourly cells exactly as shipped, for the full-table golden check.
REFERENCE_CELLS = {
    "body_temp": [
        ("34.19", "33.33", "31.17", "36.50", "33.96"),
        ("33.20", "34.49", "30.55", "35.20", "34.23"),
        ("34.63", "34.81", "31.04", "37.89", "33.60"),
        ("34.43", "31.00", "31.64", "35.95", "33.02"),
        ("34.01", "33.00", "32.23", "36.52", "32.88"),
        ("34.12", "32.62", "31.96", "37.54", "33.97"),
    ],
    "heart_rate": [
        ("68", "81", "77", "82", "102"),
        ("71", "86", "78", "87", "95"),
        ("74", "83", "72", "92", "99"),
        ("65", "95", "71", "85", "92"),
        ("77", "83", "65", "96", "88"),
        ("72", "80", "73", "88", "91"),
    ],
    "ambient_temp": [
        ("31.17", "31.32", "30.37", "30.95", "30.23"),
        ("31.16", "31.33", "30.79", "31.01", "30.29"),
        ("31.12", "31.43", "31.16", "30.96", "30.30"),
        ("30.10", "29.39", "30.26", "30.99", "29.66"),
        ("30.04", "29.54", "30.32", "31.08", "29.85"),
        ("30.11", "29.65", "30.30", "31.08", "29.96"),
    ],
    "humidity": [
        ("73.51", "73.58", "91.16", "74.58", "78.08"),
        ("73.65", "73.51", "90.79", "73.99", "78.01"),
        ("73.48", "73.54", "89.05", "73.79", "78.01"),
        ("78.19", "92.27", "78.34", "74.02", "81.61"),
        ("78.01", "91.81", "78.02", "73.76", "81.25"),
        ("78.00", "92.03", "78.14", "74.08", "79.89"),
    ],
    "air_quality": [
        ("389.44", "357.76", "430.44", "343.20", "411.53"),
        ("387.16", "356.29", "439.98", "346.78", "403.13"),
        ("382.64", "353.10", "450.96", "346.72", "409.18"),
        ("412.36", "472.61", "433.65", "358.46", "408.13"),
        ("398.80", "474.30", "434.90", "369.87", "364.83"),
        ("391.67", "462.15", "434.34", "369.68", "390.67"),
    ],
}


def record(ts, **values):
    base = dict(received_at=ts, body_temp=36.5, ambient_temp=27.0, humidity=50.0,
                air_quality=100.0, heart_rate=80)
    base.update(values)
    return base


class TestBucketMeans:
    def test_single_record_bucket_is_that_record(self):
        [bucket] = bucket_means([record(100, humidity=61.5)], 0, 1000)
        assert bucket.means["humidity"] == Decimal("61.5")
        assert bucket.count == 1

    def test_constant_stream_reproduces_constant(self):
        records = [record(t, body_temp=36.66) for t in range(0, 10_000, 500)]
        buckets = bucket_means(records, 0, 2000)
        assert all(b.means["body_temp"] == Decimal("36.66") for b in buckets)

    def test_mean_is_permutation_invariant(self):
        values = [random.Random(5).uniform(20, 30) for _ in range(50)]
        records_a = [record(t, body_temp=v) for t, v in enumerate(values)]
        shuffled = list(values)
        random.Random(6).shuffle(shuffled)
        records_b = [record(t, body_temp=v) for t, v in enumerate(shuffled)]
        [a] = bucket_means(records_a, 0, 1000)
        [b] = bucket_means(records_b, 0, 1000)
        assert a.means["body_temp"] == b.means["body_temp"]

    def test_empty_buckets_omitted(self):
        records = [record(0), record(5000)]
        buckets = bucket_means(records, 0, 1000)
        assert [b.start_ms for b in buckets] == [0, 5000]

    def test_unordered_input_rejected(self):
        with pytest.raises(ValueError, match="ordered"):
            bucket_means([record(5000), record(0)], 0, 1000)


class TestTableFromCorpus:
    @pytest.mark.parametrize("parameter", list(EXPECTED_AVERAGES))
    def test_cells_and_average_match_reference_tables(self, parameter):
        report = table_report_from_corpus(parameter)
        assert report.complete
        for hour, row in zip(report.hours, REFERENCE_CELLS[parameter]):
            got = tuple(str(report.cells[hour][p]) for p in report.persons)
            assert got == row, f"{parameter} hour {hour}"
        averages = tuple(str(report.average[p]) for p in report.persons)
        assert averages == EXPECTED_AVERAGES[parameter]

    def test_average_computed_from_unrounded_means(self):
        # person 5 heart rate: 567/6 = 94.5, half-up to 95
        report = table_report_from_corpus("heart_rate")
        assert str(report.average[5]) == "95"

    def test_half_boundary_cells_round_half_up(self):
        # 476.85/6 = 79.475 and 2134.71/6 = 355.785: exactly on the half
        humidity = table_report_from_corpus("humidity")
        assert str(humidity.average[5]) == "79.48"
        air = table_report_from_corpus("air_quality")
        assert str(air.average[4]) == "355.79"

    def test_grand_humidity_mean(self):
        assert str(grand_mean(table_report_from_corpus("humidity"))) == "79.27"

    def test_grand_mean_is_mean_of_average_row(self):
        # ambient: mean of [30.62, 30.44, 30.53, 31.01, 30.05]
        assert str(grand_mean(table_report_from_corpus("ambient_temp"))) == "30.53"

    def test_grand_mean_single_person_is_their_average(self):
        records = {
            2: [record(t * 1000, humidity=66.5) for t in range(0, 6 * 3600, 2)]
        }
        report = table_report_from_records("humidity", records)
        assert grand_mean(report) == report.average[2] == Decimal("66.50")

    def test_chart_series_person5_heart_rate(self):
        series = chart_series(table_report_from_corpus("heart_rate"))
        assert [(h, int(v)) for h, v in series[5]] == [
            (1, 102), (2, 95), (3, 99), (4, 92), (5, 88), (6, 91),
        ]

    def test_series_values_equal_table_cells(self):
        report = table_report_from_corpus("humidity")
        series = chart_series(report)
        for person, points in series.items():
            for hour, value in points:
                assert value == report.cells[hour][person]


class TestTableFromRecords:
    def test_single_person_constant_hours(self):
        records = {
            1: [record(t * 1000, heart_rate=70 + (t // 3600)) for t in range(0, 6 * 3600, 2)]
        }
        report = table_report_from_records("heart_rate", records)
        assert [int(report.cells[h][1]) for h in report.hours] == [70, 71, 72, 73, 74, 75]
        assert report.complete

    def test_missing_hours_are_gaps_not_interpolated(self):
        records = {1: [record(t * 1000) for t in range(0, 3600, 2)]}  # one hour only
        report = table_report_from_records("humidity", records)
        assert report.cells[1][1] is not None
        assert report.cells[2][1] is None
        assert report.average[1] is None
        assert not report.complete
        assert grand_mean(report) is None


class TestCorpusValidation:
    def test_bundled_corpus_passes(self):
        assert validate_corpus() == []

    def test_mutated_cell_named(self):
        text = corpus_text().replace("37.89", "38.89")  # person 4 hour 3 body temp
        problems = validate_corpus(load_corpus(text))
        assert len(problems) == 1
        assert "body_temp person 4" in problems[0]


class TestExports:
    def test_table_csv_matches_committed_golden(self, tmp_path):
        report = table_report_from_corpus("body_temp")
        out = tmp_path / "table_body_temp.csv"
        write_table_csv(report, out)
        assert out.read_text() == (GOLDEN_DIR / "table_body_temp.csv").read_text()

    def test_series_csv_matches_committed_golden(self, tmp_path):
        report = table_report_from_corpus("body_temp")
        out = tmp_path / "series_body_temp.csv"
        write_series_csv(report, out)
        assert out.read_text() == (GOLDEN_DIR / "series_body_temp.csv").read_text()

    def test_json_export_structure(self, tmp_path):
        import json

        report = table_report_from_corpus("heart_rate")
        out = tmp_path / "table_heart_rate.json"
        write_table_json(report, out)
        doc = json.loads(out.read_text())
        assert doc["unit"] == "bpm"
        assert doc["complete"] is True
        assert doc["average"]["5"] == "95"
        assert doc["rows"][0]["values"]["1"] == "68"

    def test_gap_cells_export_empty(self, tmp_path):
        records = {1: [record(t * 1000) for t in range(0, 3600, 2)]}
        report = table_report_from_records("humidity", records)
        out = tmp_path / "t.csv"
        write_table_csv(report, out)
        lines = out.read_text().splitlines()
        assert lines[2] == "2,"  # hour 2: gap marker (empty cell)
