"""
Quote ingestion, session cleaning, diagnostics and report serialisation.

Quote files
-----------
The interchange format is a CSV file with header ``time_sec,ask_price,bid_price``:
time in seconds after midnight, prices in currency units. LOBSTER level-1
data is read from the orderbook file (ask price, ask size, bid price, bid
size; prices in units of 1e-4) with timestamps from the matching message
file.

Several records with the same timestamp collapse to the last one, the book
state at that instant. Series times are wall-clock times mapped to
``[0, 1]`` over a session window; the wall-clock times are kept alongside.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, is_dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .series import QuoteSeries, Side

__all__ = [
    "SessionCleanRules",
    "Segment",
    "INTERVAL_BOUNDS",
    "load_quotes",
    "write_quotes",
    "clean_session",
    "split_intervals",
    "acf_median_diagnostic",
    "series_to_csv",
    "series_from_csv",
    "report_to_dict",
    "events_to_jsonl",
    "hms",
]

INTERVAL_BOUNDS = tuple(h * 3600.0 for h in (9.0 + 35 / 60, 10, 11, 12, 13, 14, 15, 16))


def hms(text: str) -> float:
    """``"09:35"`` or ``"09:35:00.5"`` to seconds after midnight."""
    parts = [float(p) for p in text.split(":")]
    while len(parts) < 3:
        parts.append(0.0)
    return parts[0] * 3600.0 + parts[1] * 60.0 + parts[2]


@dataclass(frozen=True)
class SessionCleanRules:
    """Cleaning protocol; windows are ``[start, end)`` in seconds after midnight."""

    session: tuple = (hms("09:30"), hms("16:00"))
    exclude: tuple = (hms("09:30"), hms("09:35"))
    change_filter: bool = True

    def __post_init__(self):
        s0, s1 = self.session
        e0, e1 = self.exclude
        if not s0 < s1:
            raise ValueError("empty session window")
        if not (s0 <= e0 <= e1 <= s1):
            raise ValueError("exclusion window must lie inside the session window")

    @property
    def window(self) -> tuple:
        """Retained window after removing a leading exclusion."""
        s0, s1 = self.session
        e0, e1 = self.exclude
        return (e1, s1) if e0 <= s0 else (s0, s1)


def _series(wall, values, side, window, flags=None):
    a, b = window
    return QuoteSeries((wall - a) / (b - a), values, side, (a, b), wall, flags)


def _parse_csv(path: Path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        if [h.strip() for h in header] != ["time_sec", "ask_price", "bid_price"]:
            raise ValueError(f"{path}:1: expected header time_sec,ask_price,bid_price")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: cannot parse {row!r}") from None
            if len(rows[-1]) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields")
    return rows


def _parse_lobster(orderbook: Path, messages: Path):
    times = []
    with open(messages, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            try:
                times.append(float(row[0]))
            except (ValueError, IndexError):
                raise ValueError(f"{messages}:{lineno}: cannot parse time") from None
    rows = []
    with open(orderbook, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            try:
                ask, bid = float(row[0]) / 1e4, float(row[2]) / 1e4
            except (ValueError, IndexError):
                raise ValueError(f"{orderbook}:{lineno}: cannot parse prices") from None
            if lineno > len(times):
                raise ValueError(f"{orderbook}:{lineno}: no matching message record")
            rows.append([times[lineno - 1], ask, bid])
    if len(rows) != len(times):
        raise ValueError("orderbook and message files differ in length")
    return rows


def load_quotes(path, fmt: str = "csv", messages=None, session: Optional[tuple] = None):
    """Read a quote file into ``(ask, bid, mid)`` series of log-prices.

    Parameters
    ----------
    path : str or Path
        Quote CSV, or the LOBSTER orderbook file with ``fmt="lobster"``.
    fmt : {"csv", "lobster"}
    messages : str or Path, optional
        LOBSTER message file (required for ``fmt="lobster"``).
    session : (float, float), optional
        Wall-clock window mapped to ``[0, 1]``; default first to last record.

    The mid quote is the log of the average price. Crossed records
    (ask < bid) are kept, flagged and reported with a warning.
    """
    path = Path(path)
    if fmt == "csv":
        rows = _parse_csv(path)
    elif fmt == "lobster":
        if messages is None:
            raise ValueError("LOBSTER input needs the message file")
        rows = _parse_lobster(path, Path(messages))
    else:
        raise ValueError("fmt must be 'csv' or 'lobster'")
    if not rows:
        raise ValueError(f"{path}: empty file")
    data = np.array(rows, dtype=float)
    if np.any(np.diff(data[:, 0]) < 0):
        raise ValueError(f"{path}: timestamps are not sorted")
    last = np.append(np.diff(data[:, 0]) > 0, True)
    data = data[last]
    wall, ask, bid = data.T
    if np.any(ask <= 0) or np.any(bid <= 0):
        raise ValueError(f"{path}: prices must be positive")
    crossed = ask < bid
    if crossed.any():
        warnings.warn(f"{path}: {int(crossed.sum())} crossed records (ask < bid) kept and flagged")
    window = session or (float(wall[0]), float(wall[-1]))
    return (_series(wall, np.log(ask), Side.ASK, window, crossed),
            _series(wall, np.log(bid), Side.BID, window, crossed),
            _series(wall, np.log(0.5 * (ask + bid)), Side.MID, window, crossed))


def write_quotes(path, ask: QuoteSeries, bid: QuoteSeries) -> None:
    """Write aligned ask and bid series in the interchange CSV format."""
    if ask.wall_times is None or bid.wall_times is None:
        raise ValueError("series carry no wall-clock times")
    if not np.array_equal(ask.wall_times, bid.wall_times):
        raise ValueError("ask and bid must share timestamps")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_sec", "ask_price", "bid_price"])
        for t, a, b in zip(ask.wall_times, np.exp(ask.values), np.exp(bid.values)):
            w.writerow([repr(float(t)), repr(float(a)), repr(float(b))])


def clean_session(series: QuoteSeries, rules: SessionCleanRules = SessionCleanRules()) -> QuoteSeries:
    """Keep the retained window, drop repeated quotes and renormalise times.

    Windows are inclusive at the start and exclusive at the end. With the
    change filter, an observation is dropped when its value equals the
    previous retained one, so each side is filtered on its own changes.
    """
    if series.wall_times is None:
        raise ValueError("cleaning needs wall-clock times")
    a, b = rules.window
    wall = series.wall_times
    keep = (wall >= a) & (wall < b)
    if rules.change_filter:
        idx = np.flatnonzero(keep)
        values = series.values[idx]
        changed = np.append(True, values[1:] != values[:-1])
        keep = np.zeros_like(keep)
        keep[idx[changed]] = True
    if keep.sum() < 2:
        raise ValueError("empty result after cleaning")
    flags = None if series.flags is None else series.flags[keep]
    return _series(wall[keep], series.values[keep], series.side, (a, b), flags)


@dataclass(frozen=True)
class Segment:
    """One intraday interval; ``series`` is None when it holds fewer than two quotes."""

    start: float
    end: float
    count: int
    series: Optional[QuoteSeries]

    @property
    def empty(self) -> bool:
        return self.series is None


def split_intervals(series: QuoteSeries, bounds=INTERVAL_BOUNDS) -> list:
    """Split a cleaned session into ``[bounds[i], bounds[i+1])`` segments,
    each renormalised to ``[0, 1]``."""
    if series.wall_times is None:
        raise ValueError("splitting needs wall-clock times")
    out = []
    wall = series.wall_times
    for a, b in zip(bounds[:-1], bounds[1:]):
        mask = (wall >= a) & (wall < b)
        count = int(mask.sum())
        seg = None
        if count >= 2:
            flags = None if series.flags is None else series.flags[mask]
            seg = _series(wall[mask], series.values[mask], series.side, (a, b), flags)
        out.append(Segment(a, b, count, seg))
    return out


def _acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    x = x - x.mean()
    denom = np.dot(x, x)
    return np.array([np.dot(x[:-k], x[k:]) / denom for k in range(1, max_lag + 1)])


def acf_median_diagnostic(days, max_lag: int = 10) -> np.ndarray:
    """Per-lag median over days of the sample ACF of log-quote increments.

    ``days`` is a list of :class:`QuoteSeries` or arrays of log-quotes.
    Returns lags ``1..max_lag``.
    """
    if not days:
        raise ValueError("need at least one day")
    rows = []
    for day in days:
        values = day.values if isinstance(day, QuoteSeries) else np.asarray(day, dtype=float)
        dx = np.diff(values)
        if dx.size <= max_lag + 1:
            raise ValueError("day too short for max_lag")
        rows.append(_acf(dx, max_lag))
    return np.median(np.array(rows), axis=0)


def series_to_csv(series: QuoteSeries, path) -> None:
    """Write a series losslessly (``repr`` floats); see :func:`series_from_csv`."""
    wall = series.wall_times if series.wall_times is not None else np.full(series.times.shape, np.nan)
    flags = series.flags if series.flags is not None else np.zeros(series.times.shape, bool)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        session = "" if series.session is None else f"{series.session[0]!r};{series.session[1]!r}"
        w.writerow(["# side", series.side.value, "session", session])
        w.writerow(["time", "value", "wall_time", "flag"])
        for t, v, c, f in zip(series.times, series.values, wall, flags):
            w.writerow([repr(float(t)), repr(float(v)), repr(float(c)), int(f)])


def series_from_csv(path) -> QuoteSeries:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        meta = next(reader)
        next(reader)
        data = [row for row in reader if row]
    side = meta[1]
    session = tuple(float(x) for x in meta[3].split(";")) if meta[3] else None
    arr = np.array([[float(x) for x in row[:3]] for row in data])
    flags = np.array([int(row[3]) for row in data], dtype=bool)
    wall = None if np.all(np.isnan(arr[:, 2])) else arr[:, 2]
    return QuoteSeries(arr[:, 0], arr[:, 1], side, session, wall, flags if flags.any() else None)


def _plain(value):
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def report_to_dict(report) -> dict:
    """JSON-ready dictionary of a test report (NaN becomes null)."""
    if not is_dataclass(report):
        raise TypeError("expected a report dataclass")
    out = {k: getattr(report, k) for k in report.__dataclass_fields__}
    for key, value in list(out.items()):
        if is_dataclass(value) or hasattr(value, "_asdict"):
            out[key] = value._asdict() if hasattr(value, "_asdict") else asdict(value)
    if hasattr(report, "jump_size"):
        out["jump_size"] = report.jump_size
    return _plain(out)


def events_to_jsonl(events) -> str:
    """One JSON object per event with the online event schema."""
    lines = []
    for e in events:
        lines.append(json.dumps(_plain({
            "session_time": e.time,
            "wall_clock": e.wall_clock,
            "direction": e.direction,
            "size_estimate": e.size,
            "interval_lo": e.interval[0],
            "interval_hi": e.interval[1],
            "alpha": e.alpha,
        })))
    return "\n".join(lines) + ("\n" if lines else "")
