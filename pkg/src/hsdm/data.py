"""Trade-record containers and CSV ingest.

A day of trading is a strictly increasing sequence of millisecond clock
times with a buy-pressure imbalance (BPI) mark attached to each trade.
Durations are the first differences of the clock times, so the first record
of a day is an anchor that carries no duration of its own.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TradeRecord", "DaySeries", "ingest_csv", "write_csv", "abs_bpi"]

CSV_COLUMNS = ("clock_time_ms", "bpi", "duration_ms", "date")


@dataclass(frozen=True)
class TradeRecord:
    """One trade: clock time in ms, duration since the previous trade, BPI mark.

    ``duration`` and ``log_duration`` are ``None`` on the first record of a
    day.  ``log_duration`` is the plain log of the integer duration; smoothed
    versions live in :mod:`hsdm.smoothing`.
    """

    clock_time: int
    duration: int | None
    bpi: float

    @property
    def log_duration(self) -> float | None:
        if self.duration is None:
            return None
        return math.log(self.duration)


@dataclass(frozen=True)
class DaySeries:
    """A single day's ordered trades, stored as arrays.

    ``day_start``/``day_end`` default to the first/last clock time and are the
    anchors used to normalise clock time to [0, 1] for the intraday trend.
    """

    date_label: str
    clock_times: np.ndarray
    bpi: np.ndarray
    day_start: int = field(default=-1)
    day_end: int = field(default=-1)

    def __post_init__(self):
        ct = np.ascontiguousarray(self.clock_times, dtype=np.int64)
        bp = np.ascontiguousarray(self.bpi, dtype=np.float64)
        if ct.ndim != 1 or bp.shape != ct.shape:
            raise ValueError("clock_times and bpi must be 1-d arrays of equal length")
        if ct.size == 0:
            raise ValueError("a DaySeries needs at least one record")
        steps = np.diff(ct)
        bad = np.nonzero(steps < 1)[0]
        if bad.size:
            raise ValueError(
                f"clock_times must be strictly increasing; row {bad[0] + 1} "
                f"({ct[bad[0] + 1]}) does not follow {ct[bad[0]]}"
            )
        object.__setattr__(self, "clock_times", ct)
        object.__setattr__(self, "bpi", bp)
        if self.day_start < 0:
            object.__setattr__(self, "day_start", int(ct[0]))
        if self.day_end < 0:
            object.__setattr__(self, "day_end", int(ct[-1]))
        if not (self.day_start <= ct[0] and ct[-1] <= self.day_end):
            raise ValueError("all clock_times must lie within [day_start, day_end]")
        ct.setflags(write=False)
        bp.setflags(write=False)

    def __len__(self) -> int:
        return int(self.clock_times.size)

    @property
    def durations(self) -> np.ndarray:
        """Integer durations in ms, one per record after the anchor."""
        return np.diff(self.clock_times)

    @property
    def n_events(self) -> int:
        """Number of modelled events (records that carry a duration)."""
        return len(self) - 1

    @property
    def records(self) -> list[TradeRecord]:
        out = [TradeRecord(int(self.clock_times[0]), None, float(self.bpi[0]))]
        d = self.durations
        for i in range(1, len(self)):
            out.append(
                TradeRecord(int(self.clock_times[i]), int(d[i - 1]), float(self.bpi[i]))
            )
        return out

    def normalized_times(self) -> np.ndarray:
        """Clock times mapped to [0, 1] over the declared day span."""
        span = max(self.day_end - self.day_start, 1)
        return (self.clock_times - self.day_start) / span


def abs_bpi(series: DaySeries) -> np.ndarray:
    """Absolute BPI marks aligned with the records."""
    return np.abs(series.bpi)


def _parse_row(row, line_no, cols):
    try:
        t = int(row[cols["clock_time_ms"]])
        b = float(row[cols["bpi"]])
    except (ValueError, KeyError, IndexError) as exc:
        raise ValueError(f"malformed row {line_no}: {row!r}") from exc
    if not math.isfinite(b):
        raise ValueError(f"malformed row {line_no}: non-finite bpi")
    dur = None
    if "duration_ms" in cols and row.get(cols["duration_ms"], "") not in ("", None):
        dur = int(row[cols["duration_ms"]])
    return t, b, dur


def ingest_csv(path, schema=None, on_malformed="error", day_start=None, day_end=None):
    """Read one or more days of trades from a CSV file.

    The expected header is ``clock_time_ms,bpi`` with optional ``duration_ms``
    and ``date`` columns.  ``schema`` maps those logical names to the actual
    column names in the file.  When a ``date`` column is present the rows are
    split into one :class:`DaySeries` per distinct value, in file order.

    Explicit ``duration_ms`` values are checked against the clock-time
    differences and a mismatch is an error naming the row.  Malformed rows
    raise by default; ``on_malformed="skip"`` drops them with a warning.
    """
    schema = schema or {}
    cols = {k: schema.get(k, k) for k in CSV_COLUMNS}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for required in ("clock_time_ms", "bpi"):
            if cols[required] not in header:
                raise ValueError(f"missing column {cols[required]!r} in {path}")
        has_dur = cols["duration_ms"] in header
        has_date = cols["date"] in header
        days: dict[str, list] = {}
        skipped = []
        for line_no, row in enumerate(reader, start=2):
            try:
                t, b, dur = _parse_row(row, line_no, cols)
            except ValueError:
                if on_malformed == "skip":
                    skipped.append(line_no)
                    continue
                raise
            label = str(row[cols["date"]]) if has_date else ""
            days.setdefault(label, []).append((line_no, t, b, dur if has_dur else None))
    if skipped:
        warnings.warn(
            f"{path}: skipped {len(skipped)} malformed row(s), first at line {skipped[0]}"
        )
    out = []
    for label, rows in days.items():
        times = np.array([r[1] for r in rows], dtype=np.int64)
        marks = np.array([r[2] for r in rows], dtype=np.float64)
        for i in range(1, len(rows)):
            if times[i] <= times[i - 1]:
                raise ValueError(
                    f"non-monotone clock_time_ms at line {rows[i][0]}: "
                    f"{times[i]} follows {times[i - 1]}"
                )
            given = rows[i][3]
            if given is not None and given != times[i] - times[i - 1]:
                raise ValueError(
                    f"duration_ms mismatch at line {rows[i][0]}: "
                    f"{given} != {times[i] - times[i - 1]}"
                )
        out.append(
            DaySeries(
                date_label=label,
                clock_times=times,
                bpi=marks,
                day_start=-1 if day_start is None else day_start,
                day_end=-1 if day_end is None else day_end,
            )
        )
    return out


def write_csv(series: DaySeries, path, include_duration=False):
    """Write a day back to CSV; inverse of :func:`ingest_csv` for one day."""
    fields = ["clock_time_ms", "bpi"]
    if include_duration:
        fields.append("duration_ms")
    if series.date_label:
        fields.append("date")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        d = series.durations
        for i in range(len(series)):
            row = [int(series.clock_times[i]), repr(float(series.bpi[i]))]
            if include_duration:
                row.append("" if i == 0 else int(d[i - 1]))
            if series.date_label:
                row.append(series.date_label)
            writer.writerow(row)
