"""Trip CSV ingestion: hour bucketing, station indexing, conservation."""

import io
from datetime import datetime

import numpy as np
import pytest

from ipfnet import TripRecord, ValidationError, ingest_trips

HEADER = "started_at,ended_at,start_station,end_station"
DAY_START = datetime(2026, 6, 1, 0, 0)
DAY_END = datetime(2026, 6, 2, 0, 0)


def _stream(rows, header=HEADER):
    body = "\n".join(rows)
    return io.StringIO(header + "\n" + body + ("\n" if body else ""))


def _ingest(rows, start=DAY_START, end=DAY_END, header=HEADER):
    return ingest_trips(_stream(rows, header), start, end)


def _hour_of(report, label_suffix):
    for k, label in enumerate(report.hours):
        if label.endswith(label_suffix):
            return report.series.slices[k]
    raise AssertionError(f"hour {label_suffix} not in report")


class TestHourBucketing:
    def test_same_hour_trip(self):
        rep = _ingest(["2026-06-01T10:05,2026-06-01T10:20,A,B"])
        assert rep.same_hour_trips == 1 and rep.midpoint_trips == 0
        assert _hour_of(rep, "T10").total() == 1.0
        assert _hour_of(rep, "T11").total() == 0.0

    def test_midpoint_rule(self):
        # 10:50 -> 11:40 has midpoint 11:15
        rep = _ingest(["2026-06-01T10:50,2026-06-01T11:40,A,B"])
        assert rep.midpoint_trips == 1 and rep.same_hour_trips == 0
        assert _hour_of(rep, "T11").total() == 1.0
        assert _hour_of(rep, "T10").total() == 0.0

    def test_boundary_midpoint_goes_to_later_hour(self):
        # midpoint exactly 11:00; buckets are half-open [h:00, h+1:00)
        rep = _ingest(["2026-06-01T10:59,2026-06-01T11:01,A,B"])
        assert _hour_of(rep, "T11").total() == 1.0
        assert _hour_of(rep, "T10").total() == 0.0

    def test_counts_accumulate_per_cell(self):
        rep = _ingest(
            [
                "2026-06-01T09:01,2026-06-01T09:05,A,B",
                "2026-06-01T09:10,2026-06-01T09:30,A,B",
                "2026-06-01T09:15,2026-06-01T09:16,B,A",
            ]
        )
        nine = _hour_of(rep, "T09")
        dense = np.zeros((2, 2))
        dense[nine.row, nine.col] = nine.val
        np.testing.assert_array_equal(dense, [[0.0, 2.0], [1.0, 0.0]])

    def test_self_loop_trip(self):
        rep = _ingest(["2026-06-01T08:00,2026-06-01T08:10,A,A"])
        eight = _hour_of(rep, "T08")
        assert eight.row[0] == eight.col[0]
        assert eight.total() == 1.0


class TestHeaderHandling:
    def test_alias_columns(self):
        header = "starttime,stoptime,start station name,end station name"
        rep = _ingest(["2026-06-01T10:05,2026-06-01T10:20,A,B"], header=header)
        assert rep.kept_trips == 1

    def test_headers_are_case_insensitive(self):
        header = "Started_At,ENDED_AT,Start_Station,End_Station"
        rep = _ingest(["2026-06-01T10:05,2026-06-01T10:20,A,B"], header=header)
        assert rep.kept_trips == 1

    def test_missing_column_errors(self):
        header = "started_at,ended_at,start_station"
        with pytest.raises(ValidationError):
            _ingest(["2026-06-01T10:05,2026-06-01T10:20,A"], header=header)

    def test_empty_stream_errors(self):
        with pytest.raises(ValidationError):
            ingest_trips(io.StringIO(""), DAY_START, DAY_END)


class TestRowFiltering:
    def test_malformed_rows_skipped_and_counted(self):
        rep = _ingest(
            [
                "2026-06-01T10:05,2026-06-01T10:20,A,B",
                "not-a-time,2026-06-01T10:20,A,B",
                "2026-06-01T10:05,2026-06-01T10:20,,B",
                "2026-06-01T10:20,2026-06-01T10:05,A,B",  # ends before start
            ]
        )
        assert rep.kept_trips == 1
        assert rep.skipped_rows == 3

    def test_out_of_window_trips_dropped_silently(self):
        rep = _ingest(
            [
                "2026-06-01T10:05,2026-06-01T10:20,A,B",
                "2026-05-31T23:00,2026-05-31T23:10,A,B",
                "2026-06-02T00:01,2026-06-02T00:05,A,B",
            ]
        )
        assert rep.kept_trips == 1
        assert rep.skipped_rows == 0

    def test_window_bounds_are_floored(self):
        rep = _ingest(
            ["2026-06-01T10:05,2026-06-01T10:20,A,B"],
            start=datetime(2026, 6, 1, 10, 45),
            end=datetime(2026, 6, 1, 11, 30),
        )
        # the start bound floors to 10:00, so the 10:05 trip is inside
        assert rep.kept_trips == 1
        assert rep.hours == ("20260601T10",)

    def test_empty_window_errors(self):
        with pytest.raises(ValidationError):
            _ingest([], start=datetime(2026, 6, 1, 10, 10), end=datetime(2026, 6, 1, 10, 50))


class TestReportStructure:
    ROWS = [
        "2026-06-01T00:05,2026-06-01T00:25,Delta,Alpha",
        "2026-06-01T00:30,2026-06-01T00:44,Alpha,Charlie",
        "2026-06-01T05:50,2026-06-01T06:40,Charlie,Bravo",
        "2026-06-01T23:10,2026-06-01T23:30,Bravo,Delta",
        "2026-06-01T23:40,2026-06-01T23:59,Bravo,Delta",
    ]

    def test_station_union_sorted(self):
        rep = _ingest(self.ROWS)
        assert rep.stations == ("Alpha", "Bravo", "Charlie", "Delta")
        assert rep.station_index == {"Alpha": 0, "Bravo": 1, "Charlie": 2, "Delta": 3}

    def test_every_hour_present_including_empty(self):
        rep = _ingest(self.ROWS)
        assert len(rep.hours) == 24
        assert rep.hours[0] == "20260601T00"
        assert rep.hours[23] == "20260601T23"
        assert len(rep.series.slices) == 24
        assert _hour_of(rep, "T03").nnz == 0

    def test_totals_conserved(self):
        rep = _ingest(self.ROWS)
        assert rep.kept_trips == 5
        assert sum(s.total() for s in rep.series.slices) == 5.0
        assert rep.same_hour_trips + rep.midpoint_trips == rep.kept_trips
        assert rep.midpoint_trips == 1  # the 05:50 -> 06:40 trip

    def test_aggregate_is_sum_of_slices(self):
        rep = _ingest(self.ROWS)
        m = len(rep.stations)
        total = np.zeros((m, m))
        for s in rep.series.slices:
            total[s.row, s.col] += s.val
        agg = np.zeros((m, m))
        agg[rep.aggregated.row, rep.aggregated.col] = rep.aggregated.val
        np.testing.assert_array_equal(agg, total)

    def test_hourly_marginals_match_slices(self):
        rep = _ingest(self.ROWS)
        assert len(rep.hourly_marginals) == 24
        for s, marg in zip(rep.series.slices, rep.hourly_marginals):
            np.testing.assert_array_equal(marg.p, s.row_sums())
            np.testing.assert_array_equal(marg.q, s.col_sums())

    def test_repeated_trip_collapses_to_one_cell(self):
        rep = _ingest(self.ROWS)
        late = _hour_of(rep, "T23")
        assert late.nnz == 1
        assert late.val[0] == 2.0


class TestTripRecord:
    def test_rejects_negative_duration(self):
        with pytest.raises(ValidationError):
            TripRecord(
                started_at=datetime(2026, 6, 1, 10, 20),
                ended_at=datetime(2026, 6, 1, 10, 5),
                start_station="A",
                end_station="B",
            )

    def test_accepts_zero_duration(self):
        rec = TripRecord(
            started_at=datetime(2026, 6, 1, 10, 5),
            ended_at=datetime(2026, 6, 1, 10, 5),
            start_station="A",
            end_station="B",
        )
        assert rec.start_station == "A"
