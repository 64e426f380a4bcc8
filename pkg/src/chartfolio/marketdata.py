"""5-minute OHLCV ingestion and regular-session day records.

A regular NYSE/NASDAQ session runs 9:30-16:00 ET, i.e. 78 five-minute bars
(start times 9:30 through 15:55). Only complete, valid sessions feed the
labeling pipeline; everything else is surfaced as a skip, never silently
dropped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from zoneinfo import ZoneInfo

from .errors import InputError

ET = ZoneInfo("America/New_York")

SESSION_OPEN = time(9, 30)
SESSION_LAST_BAR = time(15, 55)
BAR_MINUTES = 5
BARS_PER_SESSION = 78
FIRST_HOUR_BARS = 12

CSV_HEADER = ("ticker", "timestamp", "open", "high", "low", "close", "volume")


class IncompleteSessionError(InputError):
    """Raised when an operation requires a complete 78-bar session."""


@dataclass(frozen=True)
class OhlcvBar:
    """One 5-minute bar; timestamp is the tz-aware interval start."""

    timestamp: datetime
    open: float
    high: float
    low: float
    close: float
    volume: int

    def __post_init__(self) -> None:
        if self.timestamp.tzinfo is None:
            raise InputError("bar timestamp must be timezone-aware")
        ts = self.timestamp
        if ts.minute % BAR_MINUTES or ts.second or ts.microsecond:
            raise InputError(f"timestamp {ts.isoformat()} not on a 5-minute boundary")
        for name in ("open", "high", "low", "close"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be strictly positive")
        if self.low > self.high:
            raise InputError(f"low {self.low} > high {self.high}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise InputError("open/close outside the low..high range")
        if self.volume < 0:
            raise InputError("volume must be non-negative")

    def et_time(self) -> time:
        return self.timestamp.astimezone(ET).time()


@dataclass(frozen=True)
class TradingSession:
    """All bars of one ticker-day, ordered by timestamp."""

    ticker: str
    date: date
    bars: tuple[OhlcvBar, ...]

    def __post_init__(self) -> None:
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.timestamp <= prev.timestamp:
                raise InputError(
                    f"{self.ticker} {self.date}: bars not strictly increasing "
                    f"at {cur.timestamp.isoformat()}"
                )


def session_grid(day: date) -> tuple[datetime, ...]:
    """Expected ET bar-start instants for a complete session on `day`."""
    start = datetime.combine(day, SESSION_OPEN, tzinfo=ET)
    return tuple(start + timedelta(minutes=BAR_MINUTES * i) for i in range(BARS_PER_SESSION))


def is_complete(session: TradingSession) -> bool:
    """True iff the session covers the full 9:30-16:00 grid, bar for bar."""
    if len(session.bars) != BARS_PER_SESSION:
        return False
    grid = session_grid(session.date)
    return all(bar.timestamp == slot for bar, slot in zip(session.bars, grid))


def incomplete_reason(session: TradingSession) -> str | None:
    """Human-readable reason a session fails the completeness check."""
    if len(session.bars) != BARS_PER_SESSION:
        return f"{len(session.bars)} bars, expected {BARS_PER_SESSION}"
    grid = session_grid(session.date)
    for bar, slot in zip(session.bars, grid):
        if bar.timestamp != slot:
            return f"bar at {bar.timestamp.astimezone(ET).isoformat()} off the 5-minute grid"
    return None


def slice_first_hour(session: TradingSession) -> tuple[OhlcvBar, ...]:
    """Bars with start times 9:30 through 10:25, in order."""
    reason = incomplete_reason(session)
    if reason is not None:
        raise IncompleteSessionError(
            f"{session.ticker} {session.date}: incomplete first hour ({reason})"
        )
    return session.bars[:FIRST_HOUR_BARS]


def extract_reference_prices(session: TradingSession) -> tuple[float, float]:
    """(p0, pT): close after the first hour and close of the day."""
    reason = incomplete_reason(session)
    if reason is not None:
        raise IncompleteSessionError(f"{session.ticker} {session.date}: {reason}")
    return session.bars[FIRST_HOUR_BARS - 1].close, session.bars[-1].close


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping plus the timezone used for naive timestamps."""

    ticker: str = "ticker"
    timestamp: str = "timestamp"
    open: str = "open"
    high: str = "high"
    low: str = "low"
    close: str = "close"
    volume: str = "volume"
    tz: str | None = None


DEFAULT_SCHEMA = CsvSchema()


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class LoadResult:
    sessions: list[TradingSession]
    row_errors: list[RowError] = field(default_factory=list)
    invalid: set[tuple[str, date]] = field(default_factory=set)

    def clean_sessions(self) -> list[TradingSession]:
        """Complete sessions untouched by row-level errors."""
        return [
            s
            for s in self.sessions
            if (s.ticker, s.date) not in self.invalid and is_complete(s)
        ]

    def skipped(self) -> list[tuple[TradingSession, str]]:
        out = []
        for s in self.sessions:
            if (s.ticker, s.date) in self.invalid:
                out.append((s, "contains invalid rows"))
            else:
                reason = incomplete_reason(s)
                if reason is not None:
                    out.append((s, reason))
        return out


def _parse_timestamp(raw: str, tz: str | None) -> datetime:
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InputError(f"unparsable timestamp {raw!r}") from exc
    if ts.tzinfo is None:
        if tz is None:
            raise InputError(
                f"naive timestamp {raw!r} and no timezone configured (use --tz)"
            )
        ts = ts.replace(tzinfo=ZoneInfo(tz))
    return ts


def load_bars_csv(path: str | Path, schema: CsvSchema = DEFAULT_SCHEMA) -> LoadResult:
    """Group CSV rows into per-ticker-day sessions, reporting bad rows.

    Rows are grouped by (ticker, ET calendar date) and sorted by timestamp.
    A malformed row is recorded with its line number and taints its session
    (the session is kept but excluded from clean_sessions()).
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    groups: dict[tuple[str, date], list[OhlcvBar]] = {}
    row_errors: list[RowError] = []
    invalid: set[tuple[str, date]] = set()

    with handle:
        reader = csv.DictReader(handle)
        needed = (
            schema.ticker,
            schema.timestamp,
            schema.open,
            schema.high,
            schema.low,
            schema.close,
            schema.volume,
        )
        if reader.fieldnames is None:
            raise InputError(f"{path}: missing CSV header")
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")

        for lineno, row in enumerate(reader, start=2):
            ticker = (row.get(schema.ticker) or "").strip()
            try:
                if not ticker:
                    raise InputError("empty ticker")
                ts = _parse_timestamp(row[schema.timestamp], schema.tz)
                values = {}
                for name, col in (
                    ("open", schema.open),
                    ("high", schema.high),
                    ("low", schema.low),
                    ("close", schema.close),
                ):
                    try:
                        values[name] = float(row[col])
                    except (TypeError, ValueError):
                        raise InputError(f"non-numeric {name}: {row[col]!r}") from None
                raw_volume = row[schema.volume]
                try:
                    volume = int(float(raw_volume))
                except (TypeError, ValueError):
                    raise InputError(f"non-numeric volume: {raw_volume!r}") from None
                bar = OhlcvBar(timestamp=ts, volume=volume, **values)
            except InputError as exc:
                row_errors.append(RowError(lineno, str(exc)))
                if ticker:
                    day = _row_day(row.get(schema.timestamp), schema.tz)
                    if day is not None:
                        invalid.add((ticker, day))
                continue

            key = (ticker, ts.astimezone(ET).date())
            bucket = groups.setdefault(key, [])
            if any(existing.timestamp == bar.timestamp for existing in bucket):
                row_errors.append(
                    RowError(lineno, f"duplicate timestamp {ts.isoformat()} for {ticker}")
                )
                invalid.add(key)
                continue
            bucket.append(bar)

    sessions = [
        TradingSession(ticker=t, date=d, bars=tuple(sorted(bars, key=lambda b: b.timestamp)))
        for (t, d), bars in sorted(groups.items())
    ]
    return LoadResult(sessions=sessions, row_errors=row_errors, invalid=invalid)


def _row_day(raw_ts: str | None, tz: str | None) -> date | None:
    if raw_ts is None:
        return None
    try:
        return _parse_timestamp(raw_ts, tz).astimezone(ET).date()
    except InputError:
        return None


def write_sessions_csv(sessions: list[TradingSession], path: str | Path) -> None:
    """Canonical bar dump; load_bars_csv on the output reproduces the input."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for session in sessions:
            for bar in session.bars:
                writer.writerow(
                    (
                        session.ticker,
                        bar.timestamp.isoformat(),
                        repr(bar.open),
                        repr(bar.high),
                        repr(bar.low),
                        repr(bar.close),
                        bar.volume,
                    )
                )
