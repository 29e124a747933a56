"""Hourly load and price series: CSV ingestion, validation and month slicing.

Timestamps are local standard time, hour-beginning: a point stamped
``2018-01-03T13:00`` is the average MW (or the $/MWh price) for 13:00-14:00.
No daylight-saving shifts are applied, so every day has 24 hours.
"""

from __future__ import annotations

import calendar
import csv
import io
import math
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, NamedTuple, TextIO, Union

import numpy as np

MW = "MW"
USD_PER_MWH = "USD_per_MWh"

HEADERS = {
    MW: ("timestamp", "load_mw"),
    USD_PER_MWH: ("timestamp", "price_usd_per_mwh"),
}

_TIMESTAMP_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:00$")
_TIMESTAMP_FMT = "%Y-%m-%dT%H:00"
_NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class SeriesError(ValueError):
    """Base class for invalid series data."""


class MalformedRow(SeriesError):
    def __init__(self, row: int, reason: str):
        self.row = row
        self.reason = reason
        super().__init__(f"row {row}: {reason}")


class NonMonotonicTimestamps(SeriesError):
    def __init__(self, row: int, timestamp: str):
        self.row = row
        super().__init__(f"row {row}: timestamp {timestamp} is not after the previous row")


class NegativeLoad(SeriesError):
    def __init__(self, row: int, value: float):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: negative load {value!r}")


class UnitMismatch(SeriesError):
    pass


class IncompleteMonth(SeriesError):
    def __init__(self, year: int, month: int, missing: int):
        self.year = year
        self.month = month
        self.missing = missing
        super().__init__(f"{year:04d}-{month:02d} is missing {missing} hour(s)")


class EmptySlice(SeriesError):
    pass


class AlignmentError(SeriesError):
    """Two series that must cover the same hours do not."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HourlySeries:
    timestamps: np.ndarray  # datetime64[h]
    values: np.ndarray
    unit: str

    def __post_init__(self):
        if self.unit not in HEADERS:
            raise UnitMismatch(f"unknown unit {self.unit!r}")
        ts = np.asarray(self.timestamps, dtype="datetime64[h]")
        vals = np.asarray(self.values, dtype=float)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise SeriesError("timestamps and values must be 1-d and the same length")
        if len(ts) > 1 and not np.all(np.diff(ts) > np.timedelta64(0, "h")):
            bad = int(np.argmin(np.diff(ts) > np.timedelta64(0, "h"))) + 1
            raise NonMonotonicTimestamps(bad + 2, str(ts[bad]))
        if self.unit == MW and np.any(vals < 0):
            bad = int(np.argmax(vals < 0))
            raise NegativeLoad(bad + 2, float(vals[bad]))
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(vals))

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def concat(cls, parts: Iterable["HourlySeries | MonthSlice"]) -> "HourlySeries":
        parts = list(parts)
        if not parts:
            raise EmptySlice("nothing to concatenate")
        return cls(
            np.concatenate([p.timestamps for p in parts]),
            np.concatenate([p.values for p in parts]),
            parts[0].unit,
        )


@dataclass(frozen=True, eq=False)
class MonthSlice:
    """One complete calendar month of an hourly series."""

    year: int
    month: int
    timestamps: np.ndarray
    values: np.ndarray
    unit: str = MW

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _frozen(np.asarray(self.timestamps, dtype="datetime64[h]")))
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float)))
        expected = hours_in_month(self.year, self.month)
        if len(self.values) != expected:
            raise IncompleteMonth(self.year, self.month, expected - len(self.values))
        if not np.array_equal(self.timestamps, month_hours(self.year, self.month)):
            raise SeriesError(f"timestamps do not cover {self.label}")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def label(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"

    @property
    def energy(self) -> float:
        """Sum of hourly values; MWh for a load slice."""
        return math.fsum(self.values)

    def with_values(self, values) -> "MonthSlice":
        return MonthSlice(self.year, self.month, self.timestamps, values, self.unit)

    def days(self) -> list[np.ndarray]:
        """Hour indices grouped by calendar day."""
        return [np.arange(d * 24, d * 24 + 24) for d in range(len(self.values) // 24)]


class MonthGap(NamedTuple):
    year: int
    month: int
    missing: int


def hours_in_month(year: int, month: int) -> int:
    return calendar.monthrange(year, month)[1] * 24


def month_hours(year: int, month: int) -> np.ndarray:
    """Every hour-beginning timestamp of a calendar month."""
    start = np.datetime64(f"{year:04d}-{month:02d}-01T00", "h")
    return start + np.arange(hours_in_month(year, month)).astype("timedelta64[h]")


def _parse_timestamp(raw: str, row: int) -> np.datetime64:
    if not _TIMESTAMP_RE.match(raw):
        raise MalformedRow(row, f"bad timestamp {raw!r}")
    try:
        return np.datetime64(datetime.strptime(raw, _TIMESTAMP_FMT), "h")
    except ValueError:
        raise MalformedRow(row, f"bad timestamp {raw!r}") from None


def parse_series(text: Union[str, TextIO], expected_unit: str) -> HourlySeries:
    """Parse a load or price CSV.

    Row numbers in errors count the header as row 1.
    """
    if expected_unit not in HEADERS:
        raise UnitMismatch(f"unknown unit {expected_unit!r}")
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        raise MalformedRow(1, "missing header")
    header = tuple(h.strip() for h in header)
    if header != HEADERS[expected_unit]:
        for unit, cols in HEADERS.items():
            if header == cols:
                raise UnitMismatch(f"expected {expected_unit} series, file holds {unit}")
        raise MalformedRow(1, f"unexpected header {','.join(header)!r}")

    stamps: list[np.datetime64] = []
    values: list[float] = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise MalformedRow(row_no, f"expected 2 fields, got {len(row)}")
        ts = _parse_timestamp(row[0].strip(), row_no)
        raw = row[1].strip()
        if not _NUMBER_RE.match(raw):
            raise MalformedRow(row_no, f"bad number {row[1]!r}")
        value = float(raw)
        if not math.isfinite(value):
            raise MalformedRow(row_no, f"number out of range {row[1]!r}")
        if expected_unit == MW and value < 0:
            raise NegativeLoad(row_no, value)
        if stamps and ts <= stamps[-1]:
            raise NonMonotonicTimestamps(row_no, row[0].strip())
        stamps.append(ts)
        values.append(value)
    return HourlySeries(np.array(stamps, dtype="datetime64[h]"), np.array(values), expected_unit)


def format_series(series: HourlySeries) -> str:
    """Inverse of :func:`parse_series`; floats are written with ``repr`` so they round-trip."""
    out = io.StringIO()
    out.write(",".join(HEADERS[series.unit]) + "\n")
    for ts, v in zip(series.timestamps.astype(datetime), series.values.tolist()):
        out.write(f"{ts.strftime(_TIMESTAMP_FMT)},{v!r}\n")
    return out.getvalue()


def read_series(path: Union[str, Path], expected_unit: str) -> HourlySeries:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_series(fh, expected_unit)


def write_series(path: Union[str, Path], series: HourlySeries) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_series(series))


def partition_months(series: HourlySeries) -> tuple[list[MonthSlice], list[MonthGap]]:
    """Split into complete months, reporting incomplete ones instead of raising."""
    if len(series) == 0:
        return [], []
    ts = series.timestamps
    months = ts.astype("datetime64[M]")
    edges = np.flatnonzero(months[1:] != months[:-1]) + 1
    bounds = np.concatenate([[0], edges, [len(ts)]])
    slices, gaps = [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        m = months[lo].astype(object)
        year, month = m.year, m.month
        missing = hours_in_month(year, month) - (hi - lo)
        if missing:
            gaps.append(MonthGap(year, month, int(missing)))
        else:
            slices.append(MonthSlice(year, month, ts[lo:hi], series.values[lo:hi], series.unit))
    return slices, gaps


def split_months(series: HourlySeries) -> list[MonthSlice]:
    slices, gaps = partition_months(series)
    if gaps:
        raise IncompleteMonth(*gaps[0])
    return slices


def monthly_average(month: MonthSlice) -> float:
    if len(month) == 0:
        raise EmptySlice("cannot average an empty slice")
    return math.fsum(month.values) / len(month)


def check_aligned(a: MonthSlice, b: MonthSlice) -> None:
    if len(a) != len(b) or not np.array_equal(a.timestamps, b.timestamps):
        n = min(len(a), len(b))
        diff = np.flatnonzero(a.timestamps[:n] != b.timestamps[:n])
        where = str(a.timestamps[diff[0]]) if len(diff) else f"hour {n}"
        raise AlignmentError(f"series misaligned at {where} ({a.label} vs {b.label})")
