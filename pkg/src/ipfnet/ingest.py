"""Trip-record ingestion into hourly origin-destination networks.

Each trip contributes one count to the cell (start station, end station) of
one hourly slice: the hour both timestamps share when they do, else the
hour of the trip's midpoint.  Hour buckets are half-open [h:00, h+1:00).
Stations are indexed by lexicographic order of their identifiers so indices
are stable across runs over the same data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .core import MarginalPair, NetworkSeries, SparseNetwork, aggregate, marginals
from .errors import ValidationError

__all__ = ["TripRecord", "IngestReport", "ingest_trips", "HEADER_ALIASES"]

#: accepted column names per field, checked in order
HEADER_ALIASES = {
    "started_at": ("started_at", "starttime", "start_time"),
    "ended_at": ("ended_at", "stoptime", "end_time"),
    "start_station": ("start_station", "start_station_name", "start station name"),
    "end_station": ("end_station", "end_station_name", "end station name"),
}


@dataclass(frozen=True)
class TripRecord:
    started_at: datetime
    ended_at: datetime
    start_station: str
    end_station: str

    def __post_init__(self):
        if self.ended_at < self.started_at:
            raise ValidationError("trip ends before it starts")


@dataclass(frozen=True)
class IngestReport:
    """Hourly slices plus the aggregate and bookkeeping counts.

    ``stations`` is sorted; ``station_index`` maps identifier -> row/column.
    ``hours`` labels every hour of the window (format %Y%m%dT%H), aligned
    with ``series.slices`` and ``hourly_marginals``.  The slice totals sum
    to ``kept_trips`` exactly (integer counts).
    """

    stations: tuple
    station_index: dict
    hours: tuple
    series: NetworkSeries
    aggregated: SparseNetwork
    hourly_marginals: tuple
    same_hour_trips: int
    midpoint_trips: int
    skipped_rows: int
    kept_trips: int


HOUR_FMT = "%Y%m%dT%H"


def _floor_hour(ts: datetime) -> datetime:
    return ts.replace(minute=0, second=0, microsecond=0)


def _parse_ts(text: str) -> datetime:
    return datetime.fromisoformat(text.strip())


def _resolve_columns(fieldnames):
    cols = {}
    lowered = {name.strip().lower(): name for name in fieldnames}
    for field, aliases in HEADER_ALIASES.items():
        for alias in aliases:
            if alias in lowered:
                cols[field] = lowered[alias]
                break
        else:
            raise ValidationError(
                f"trip CSV is missing a column for {field}; accepted names: {aliases}"
            )
    return cols


def ingest_trips(stream, window_start: datetime, window_end: datetime) -> IngestReport:
    """Read trip rows from a CSV stream and bucket them into hourly networks.

    The window is half-open: a trip is kept when its assigned hour h
    satisfies window_start <= h < window_end (both bounds are floored to
    the hour).  Malformed rows (bad timestamps, missing fields, end before
    start) are skipped and counted.
    """
    start_hour = _floor_hour(window_start)
    end_hour = _floor_hour(window_end)
    if not start_hour < end_hour:
        raise ValidationError("time window is empty after flooring to hours")
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise ValidationError("trip CSV has no header row")
    cols = _resolve_columns(reader.fieldnames)

    trips = []  # (hour datetime, start station, end station)
    same_hour = midpoint = skipped = 0
    for row in reader:
        try:
            a = _parse_ts(row[cols["started_at"]])
            b = _parse_ts(row[cols["ended_at"]])
            s = row[cols["start_station"]].strip()
            e = row[cols["end_station"]].strip()
            if not s or not e or b < a:
                raise ValueError
        except (ValueError, TypeError, AttributeError, KeyError):
            skipped += 1
            continue
        ha, hb = _floor_hour(a), _floor_hour(b)
        if ha == hb:
            hour = ha
            bucket_same = True
        else:
            hour = _floor_hour(a + (b - a) / 2)
            bucket_same = False
        if not start_hour <= hour < end_hour:
            continue
        if bucket_same:
            same_hour += 1
        else:
            midpoint += 1
        trips.append((hour, s, e))

    names = sorted({t[1] for t in trips} | {t[2] for t in trips})
    index = {name: k for k, name in enumerate(names)}
    m = len(names)

    n_hours = int((end_hour - start_hour) / timedelta(hours=1))
    hour_keys = [start_hour + timedelta(hours=k) for k in range(n_hours)]
    labels = tuple(h.strftime(HOUR_FMT) for h in hour_keys)
    hour_pos = {h: k for k, h in enumerate(hour_keys)}

    counts = [{} for _ in range(n_hours)]
    for hour, s, e in trips:
        cell = (index[s], index[e])
        bucket = counts[hour_pos[hour]]
        bucket[cell] = bucket.get(cell, 0) + 1

    slices = []
    for bucket in counts:
        if bucket:
            ij = np.array(sorted(bucket), dtype=np.int64)
            vals = np.array([bucket[tuple(c)] for c in ij], dtype=np.float64)
            slices.append(SparseNetwork(m, m, ij[:, 0], ij[:, 1], vals))
        else:
            empty = np.empty(0, dtype=np.int64)
            slices.append(SparseNetwork(m, m, empty, empty, np.empty(0)))
    series = NetworkSeries(timesteps=labels, slices=tuple(slices))
    agg = aggregate(series)
    return IngestReport(
        stations=tuple(names),
        station_index=index,
        hours=labels,
        series=series,
        aggregated=agg,
        hourly_marginals=tuple(marginals(s) for s in slices),
        same_hour_trips=same_hour,
        midpoint_trips=midpoint,
        skipped_rows=skipped,
        kept_trips=len(trips),
    )
