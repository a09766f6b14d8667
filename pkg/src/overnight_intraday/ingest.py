"""Daily bar ingestion: parse, back-adjust, repair opens, validate.

The usual pipeline is::

    records = parse_csv(raw_bytes)
    records = adjust_for_corporate_actions(records)
    records, n = repair_missing_opens(records, "copy_prev_close")
    series, report = validate_series(records, symbol="XIU.TO")

:func:`load_bars` runs all four steps and keeps the quality report's row
accounting exact (``rows_parsed == rows_kept + rows_dropped``).
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .exceptions import (
    BadOpenError,
    EmptyInputError,
    FormatError,
    InputError,
    InsufficientDataError,
    SchemaError,
)

__all__ = [
    "Adjustment",
    "OpenRepair",
    "ColumnSchema",
    "YAHOO_SCHEMA",
    "CANONICAL_SCHEMA",
    "RawBarRecord",
    "DailyBar",
    "BarSeries",
    "DataQualityReport",
    "detect_schema",
    "parse_csv",
    "adjust_for_corporate_actions",
    "repair_missing_opens",
    "validate_series",
    "load_bars",
    "read_bars",
    "series_to_csv",
]

MISSING_TOKENS = frozenset({"", "null", "nan", "na", "n/a", "none"})
CANONICAL_COLUMNS = ("date", "open", "close", "high", "low", "volume", "open_repaired")


class Adjustment(str, Enum):
    RAW = "raw"
    SPLIT_DIVIDEND_ADJUSTED = "split_dividend_adjusted"


class OpenRepair(str, Enum):
    DROP_DAY = "drop_day"
    COPY_PREV_CLOSE = "copy_prev_close"
    FAIL = "fail"

    @classmethod
    def coerce(cls, value: Union[str, "OpenRepair"]) -> "OpenRepair":
        if isinstance(value, cls):
            return value
        aliases = {"drop": cls.DROP_DAY, "copy": cls.COPY_PREV_CLOSE}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise InputError(f"unknown open-repair policy {value!r}") from None


@dataclass(frozen=True)
class ColumnSchema:
    """Maps logical bar fields to CSV column names.

    A field mapped to ``None`` is absent from the file. ``date``, ``open``
    and ``close`` are required.
    """

    date: str = "Date"
    open: str = "Open"
    high: Optional[str] = "High"
    low: Optional[str] = "Low"
    close: str = "Close"
    adj_close: Optional[str] = "Adj Close"
    volume: Optional[str] = "Volume"
    open_repaired: Optional[str] = None

    def mapped(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Optional[str]]) -> "ColumnSchema":
        unknown = set(mapping) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise SchemaError(f"unknown schema fields: {sorted(unknown)}")
        return cls(**mapping)


YAHOO_SCHEMA = ColumnSchema()
CANONICAL_SCHEMA = ColumnSchema(
    date="date",
    open="open",
    high="high",
    low="low",
    close="close",
    adj_close=None,
    volume="volume",
    open_repaired="open_repaired",
)


@dataclass(frozen=True)
class RawBarRecord:
    """One CSV data row. ``None`` marks a missing or unparseable cell."""

    line: int
    date: Optional[date]
    open: Optional[float] = None
    high: Optional[float] = None
    low: Optional[float] = None
    close: Optional[float] = None
    adj_close: Optional[float] = None
    volume: Optional[float] = None
    open_repaired: bool = False
    # None: adjustment not attempted; False: no adj_close on the row
    adjusted: Optional[bool] = None
    unadjustable: bool = False


@dataclass(frozen=True)
class DailyBar:
    date: date
    open: float
    close: float
    high: Optional[float] = None
    low: Optional[float] = None
    volume: Optional[float] = None
    open_repaired: bool = False

    def __post_init__(self):
        if not (self.open > 0 and self.close > 0):
            raise InputError(f"{self.date}: open and close must be positive")
        if self.high is not None and self.low is not None:
            if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
                raise InputError(f"{self.date}: open/close outside [low, high]")


@dataclass(frozen=True)
class BarSeries:
    symbol: str
    bars: tuple
    adjustment: Adjustment = Adjustment.RAW

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(self.bars))
        object.__setattr__(self, "adjustment", Adjustment(self.adjustment))
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise InputError(
                    f"{self.symbol}: dates must be strictly ascending ({prev.date} then {cur.date})"
                )

    def __len__(self):
        return len(self.bars)

    @cached_property
    def dates(self) -> list:
        return [b.date for b in self.bars]

    @cached_property
    def opens(self) -> np.ndarray:
        return np.array([b.open for b in self.bars], dtype=float)

    @cached_property
    def closes(self) -> np.ndarray:
        return np.array([b.close for b in self.bars], dtype=float)

    @classmethod
    def from_arrays(cls, symbol, dates, opens, closes, highs=None, lows=None,
                    adjustment=Adjustment.RAW) -> "BarSeries":
        n = len(dates)
        if not (len(opens) == len(closes) == n):
            raise InputError("dates, opens and closes must have equal length")
        highs = [None] * n if highs is None else highs
        lows = [None] * n if lows is None else lows
        bars = [
            DailyBar(d, float(o), float(c),
                     None if h is None else float(h),
                     None if lo is None else float(lo))
            for d, o, c, h, lo in zip(dates, opens, closes, highs, lows)
        ]
        return cls(symbol, tuple(bars), adjustment)

    def with_opens(self, opens: Sequence[float]) -> "BarSeries":
        """Copy of the series with the open prices replaced.

        High/low are dropped because substituted opens need not respect them.
        """
        if len(opens) != len(self.bars):
            raise InputError(
                f"{self.symbol}: {len(opens)} replacement opens for {len(self.bars)} bars"
            )
        bars = [
            DailyBar(b.date, float(o), b.close, volume=b.volume)
            for b, o in zip(self.bars, opens)
        ]
        return BarSeries(self.symbol, tuple(bars), self.adjustment)


@dataclass
class DataQualityReport:
    symbol: str
    rows_parsed: int
    rows_kept: int
    rows_dropped: int
    drop_reasons: dict = field(default_factory=dict)
    opens_repaired: int = 0
    zero_volume_days: int = 0
    rows_unadjusted: int = 0
    first_date: Optional[date] = None
    last_date: Optional[date] = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["drop_reasons"] = dict(sorted(self.drop_reasons.items()))
        d["first_date"] = None if self.first_date is None else self.first_date.isoformat()
        d["last_date"] = None if self.last_date is None else self.last_date.isoformat()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# parsing


def _parse_float(cell: Optional[str]) -> Optional[float]:
    if cell is None:
        return None
    cell = cell.strip()
    if cell.lower() in MISSING_TOKENS:
        return None
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _parse_date(cell: Optional[str]) -> Optional[date]:
    if cell is None:
        return None
    try:
        return date.fromisoformat(cell.strip()[:10])
    except ValueError:
        return None


def _parse_flag(cell: Optional[str]) -> bool:
    return cell is not None and cell.strip().lower() in {"1", "true", "yes", "y"}


def detect_schema(text: Union[bytes, str]) -> ColumnSchema:
    """The schema :func:`parse_csv` would pick for this file's header."""
    if isinstance(text, bytes):
        text = text.decode("utf-8-sig", errors="replace")
    for row in csv.reader(io.StringIO(text.lstrip("\ufeff"))):
        if any(cell.strip() for cell in row):
            return _schema_from_header([cell.strip() for cell in row])
    return YAHOO_SCHEMA


def _schema_from_header(header: Sequence[str]) -> ColumnSchema:
    names = set(header)
    base = CANONICAL_SCHEMA if {"date", "open", "close"} <= names else YAHOO_SCHEMA
    optional = ("high", "low", "adj_close", "volume", "open_repaired")
    # optional columns absent from the header are simply not read
    return dataclasses.replace(base, **{
        f: None for f in optional if getattr(base, f) not in names
    })


def parse_csv(text: Union[bytes, str], schema: Optional[ColumnSchema] = None, *,
              path=None) -> list:
    """Parse header-bearing CSV text into :class:`RawBarRecord` rows.

    With ``schema=None`` the layout is detected: the canonical lowercase
    ``date,open,close,...`` layout written by this package, otherwise the
    Yahoo ``Date,Open,High,Low,Close,Adj Close,Volume`` layout; optional
    columns missing from the header are skipped. An explicit ``schema``
    must match every column it maps.
    Unparseable cells become ``None``; rows are returned in file order and
    nothing is deduplicated.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise FormatError(f"not UTF-8: {exc}", path=path) from None
    elif text.startswith("\ufeff"):
        text = text[1:]

    reader = csv.reader(io.StringIO(text))
    header = None
    for row in reader:
        if any(cell.strip() for cell in row):
            header = [cell.strip() for cell in row]
            break
    if header is None:
        raise EmptyInputError("empty input", path=path)
    if _parse_date(header[0]) is not None:
        raise FormatError("missing header row (first row holds data)", path=path, line=reader.line_num)

    if schema is None:
        schema = _schema_from_header(header)
    index = {name: i for i, name in enumerate(header)}
    mapped = schema.mapped()
    missing = [col for col in mapped.values() if col not in index]
    if missing:
        raise SchemaError(f"missing column(s) {missing} in header {header}", path=path, line=reader.line_num)
    cols = {fld: index[col] for fld, col in mapped.items()}

    def cell(row, fld):
        i = cols.get(fld)
        return row[i] if i is not None and i < len(row) else None

    records = []
    for row in reader:
        if not any(c.strip() for c in row):
            continue
        records.append(RawBarRecord(
            line=reader.line_num,
            date=_parse_date(cell(row, "date")),
            open=_parse_float(cell(row, "open")),
            high=_parse_float(cell(row, "high")),
            low=_parse_float(cell(row, "low")),
            close=_parse_float(cell(row, "close")),
            adj_close=_parse_float(cell(row, "adj_close")),
            volume=_parse_float(cell(row, "volume")),
            open_repaired=_parse_flag(cell(row, "open_repaired")),
        ))
    if not records:
        raise EmptyInputError("no data rows", path=path)
    return records


# --------------------------------------------------------------------------
# adjustment and repair


def adjust_for_corporate_actions(records: Iterable[RawBarRecord]) -> list:
    """Back-adjust every price on a row by that row's ``adj_close / close``.

    Rows without both prices pass through with ``adjusted=False``. Rows with
    a non-positive close or adj_close are flagged ``unadjustable`` and are
    dropped by :func:`validate_series`.
    """
    out = []
    for r in records:
        if r.adj_close is None or r.close is None:
            out.append(dataclasses.replace(r, adjusted=False))
        elif r.close <= 0 or r.adj_close <= 0:
            out.append(dataclasses.replace(r, adjusted=False, unadjustable=True))
        else:
            f = r.adj_close / r.close
            out.append(dataclasses.replace(
                r,
                open=None if r.open is None else r.open * f,
                high=None if r.high is None else r.high * f,
                low=None if r.low is None else r.low * f,
                close=r.close * f,
                adjusted=True,
            ))
    return out


def _bad_open(r: RawBarRecord) -> bool:
    if r.open is None or r.open <= 0:
        return True
    if r.high is not None and r.low is not None:
        return not (r.low <= r.open <= r.high)
    return False


def _usable_close(r: RawBarRecord) -> bool:
    return r.date is not None and not r.unadjustable and r.close is not None and r.close > 0


def repair_missing_opens(records: Sequence[RawBarRecord],
                         policy: Union[str, OpenRepair] = OpenRepair.COPY_PREV_CLOSE):
    """Handle missing, non-positive and out-of-range opens.

    Returns ``(records, n_handled)`` where ``n_handled`` counts rows that were
    repaired or removed. Under ``copy_prev_close`` the open becomes the
    previous usable close, so that day's overnight return is exactly zero; a
    bad open with no earlier close is dropped. If the copied open falls
    outside the day's [low, high], high/low are cleared rather than widened.
    Rows that validation will reject anyway (no date, no usable close) are
    left alone.
    """
    policy = OpenRepair.coerce(policy)
    out = []
    handled = 0
    prev_close = None
    for r in records:
        if _usable_close(r) and _bad_open(r):
            if policy is OpenRepair.FAIL:
                raise BadOpenError(f"invalid open price on {r.date}", line=r.line)
            handled += 1
            if policy is OpenRepair.DROP_DAY or prev_close is None:
                continue
            fixed = dataclasses.replace(r, open=prev_close, open_repaired=True)
            if fixed.high is not None and fixed.low is not None and not (fixed.low <= prev_close <= fixed.high):
                fixed = dataclasses.replace(fixed, high=None, low=None)
            r = fixed
        out.append(r)
        if _usable_close(r):
            prev_close = r.close
    return out, handled


# --------------------------------------------------------------------------
# validation


def _order_records(records: Sequence[RawBarRecord]):
    """Drop undated rows, sort by date, keep the last occurrence of each date."""
    drops = Counter()
    latest = {}
    for r in records:
        if r.date is None:
            drops["bad_date"] += 1
            continue
        if r.date in latest:
            drops["duplicate_date"] += 1
        latest[r.date] = r
    return [latest[d] for d in sorted(latest)], drops


def _row_problem(r: RawBarRecord) -> Optional[str]:
    if r.unadjustable:
        return "unadjustable"
    if r.close is None or r.close <= 0:
        return "bad_close"
    if r.open is None or r.open <= 0:
        return "bad_open"
    if r.high is not None and r.low is not None:
        if r.low > r.high:
            return "inconsistent_range"
        if not (r.low <= r.open <= r.high):
            return "bad_open"
        if not (r.low <= r.close <= r.high):
            return "inconsistent_range"
    return None


def validate_series(records: Sequence[RawBarRecord], symbol: str = "", *,
                    adjustment: Union[str, Adjustment, None] = None,
                    prior_drops: Optional[Mapping[str, int]] = None,
                    opens_repaired: int = 0):
    """Build a :class:`BarSeries` and its :class:`DataQualityReport`.

    ``prior_drops`` carries rows removed by earlier pipeline steps so that
    the report accounts for every parsed row. Raises
    :class:`InsufficientDataError` when fewer than two bars survive.
    """
    ordered, drops = _order_records(records)
    if prior_drops:
        drops.update(prior_drops)
    bars = []
    zero_volume = 0
    unadjusted = 0
    for r in ordered:
        problem = _row_problem(r)
        if problem:
            drops[problem] += 1
            continue
        bars.append(DailyBar(r.date, r.open, r.close, r.high, r.low, r.volume, r.open_repaired))
        if r.volume is not None and r.volume == 0:
            zero_volume += 1
        if r.adjusted is False:
            unadjusted += 1

    if adjustment is None:
        adjusted = any(r.adjusted for r in ordered)
        adjustment = Adjustment.SPLIT_DIVIDEND_ADJUSTED if adjusted else Adjustment.RAW
    n_dropped = sum(drops.values())
    report = DataQualityReport(
        symbol=symbol,
        rows_parsed=len(bars) + n_dropped,
        rows_kept=len(bars),
        rows_dropped=n_dropped,
        drop_reasons={k: v for k, v in drops.items() if v},
        opens_repaired=opens_repaired,
        zero_volume_days=zero_volume,
        rows_unadjusted=unadjusted,
        first_date=bars[0].date if bars else None,
        last_date=bars[-1].date if bars else None,
    )
    if len(bars) < 2:
        raise InsufficientDataError(
            f"insufficient data: {len(bars)} valid bar(s) for {symbol or 'series'}, need at least 2"
        )
    return BarSeries(symbol, tuple(bars), Adjustment(adjustment)), report


def load_bars(text: Union[bytes, str], symbol: str = "", *,
              schema: Optional[ColumnSchema] = None,
              adjusted: bool = True,
              open_repair: Union[str, OpenRepair] = OpenRepair.COPY_PREV_CLOSE,
              path=None):
    """Parse, optionally back-adjust, repair and validate one CSV."""
    records = parse_csv(text, schema, path=path)
    if adjusted:
        records = adjust_for_corporate_actions(records)
    ordered, drops = _order_records(records)
    try:
        repaired, handled = repair_missing_opens(ordered, open_repair)
    except BadOpenError as exc:
        exc.path = path
        raise
    removed = len(ordered) - len(repaired)
    if removed:
        drops["bad_open"] += removed
    try:
        return validate_series(
            repaired, symbol,
            adjustment=None if adjusted else Adjustment.RAW,
            prior_drops=drops,
            opens_repaired=handled - removed,
        )
    except InsufficientDataError as exc:
        exc.path = path
        raise


def read_bars(path, symbol: Optional[str] = None, **kwargs):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read input: {exc.strerror}", path=path) from None
    return load_bars(data, symbol or path.stem, path=path, **kwargs)


# --------------------------------------------------------------------------
# serialization


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def series_to_csv(series: BarSeries) -> str:
    """Canonical CSV: ``date,open,close,high,low,volume,open_repaired``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CANONICAL_COLUMNS)
    for b in series.bars:
        w.writerow([b.date.isoformat(), _fmt(b.open), _fmt(b.close), _fmt(b.high),
                    _fmt(b.low), _fmt(b.volume), int(b.open_repaired)])
    return buf.getvalue()
