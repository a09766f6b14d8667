"""Overnight and intraday simple returns and their compounded curves.

For consecutive bars ``t-1`` and ``t``::

    overnight(t) = open(t) / close(t-1) - 1
    intraday(t)  = close(t) / open(t) - 1

so ``(1 + overnight) * (1 + intraday) == close(t) / close(t-1)``.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass
from datetime import date
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .exceptions import InputError, InsufficientDataError, ReturnDomainError
from .ingest import Adjustment, BarSeries

__all__ = [
    "Leg",
    "ReturnPair",
    "ReturnSeries",
    "CumulativeCurve",
    "LegStats",
    "decompose",
    "cumulate",
    "compounding_identity_check",
    "summary_stats",
    "returns_to_csv",
    "returns_to_json",
    "curves_to_csv",
    "read_curves_csv",
]


class Leg(str, Enum):
    OVERNIGHT = "overnight"
    INTRADAY = "intraday"
    CLOSE_TO_CLOSE = "close_to_close"


@dataclass(frozen=True)
class ReturnPair:
    date: date
    overnight: float
    intraday: float
    nights_spanned: int = 1
    included: bool = True

    def leg(self, leg: Union[str, Leg]) -> float:
        leg = Leg(leg)
        if leg is Leg.OVERNIGHT:
            return self.overnight
        if leg is Leg.INTRADAY:
            return self.intraday
        return (1.0 + self.overnight) * (1.0 + self.intraday) - 1.0


@dataclass(frozen=True)
class ReturnSeries:
    symbol: str
    pairs: tuple
    adjustment: Adjustment = Adjustment.RAW

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        for prev, cur in zip(self.pairs, self.pairs[1:]):
            if cur.date <= prev.date:
                raise InputError(f"{self.symbol}: return dates must be strictly ascending")

    def __len__(self):
        return len(self.pairs)

    @cached_property
    def dates(self) -> list:
        return [p.date for p in self.pairs]

    @cached_property
    def overnight(self) -> np.ndarray:
        return np.array([p.overnight for p in self.pairs], dtype=float)

    @cached_property
    def intraday(self) -> np.ndarray:
        return np.array([p.intraday for p in self.pairs], dtype=float)

    @cached_property
    def included(self) -> np.ndarray:
        return np.array([p.included for p in self.pairs], dtype=bool)

    @property
    def n_excluded(self) -> int:
        return int((~self.included).sum()) if self.pairs else 0

    def leg_values(self, leg: Union[str, Leg], *, included_only: bool = False) -> np.ndarray:
        leg = Leg(leg)
        if leg is Leg.OVERNIGHT:
            values = self.overnight
        elif leg is Leg.INTRADAY:
            values = self.intraday
        else:
            values = (1.0 + self.overnight) * (1.0 + self.intraday) - 1.0
        return values[self.included] if included_only and self.pairs else values

    def replace_pairs(self, pairs: Iterable[ReturnPair]) -> "ReturnSeries":
        return ReturnSeries(self.symbol, tuple(pairs), self.adjustment)

    def slice_dates(self, start: Optional[date] = None, end: Optional[date] = None) -> "ReturnSeries":
        """Pairs with ``start <= date < end``."""
        return self.replace_pairs(
            p for p in self.pairs
            if (start is None or p.date >= start) and (end is None or p.date < end)
        )


@dataclass(frozen=True)
class CumulativeCurve:
    leg: Leg
    points: tuple  # of (date, cumulative simple return)

    def __post_init__(self):
        object.__setattr__(self, "leg", Leg(self.leg))
        object.__setattr__(self, "points", tuple(self.points))
        for d, v in self.points:
            if not v > -1.0:
                raise ReturnDomainError(f"{d}: cumulative value {v} not above -100%")

    def __len__(self):
        return len(self.points)

    @property
    def dates(self) -> list:
        return [d for d, _ in self.points]

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=float)

    @property
    def end(self) -> Optional[float]:
        return self.points[-1][1] if self.points else None


@dataclass(frozen=True)
class LegStats:
    mean: float
    std: float  # n-1 denominator; nan when count < 2
    count: int
    end_cumulative: float

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in dataclasses.asdict(self).items()}


def decompose(series: BarSeries) -> ReturnSeries:
    """Split each close-to-close step of ``series`` into its two legs."""
    bars = series.bars
    if len(bars) < 2:
        raise InsufficientDataError(
            f"insufficient data: {series.symbol or 'series'} has {len(bars)} bar(s), need at least 2"
        )
    pairs = []
    for prev, cur in zip(bars, bars[1:]):
        pairs.append(ReturnPair(
            date=cur.date,
            overnight=cur.open / prev.close - 1.0,
            intraday=cur.close / cur.open - 1.0,
            nights_spanned=(cur.date - prev.date).days,
        ))
    return ReturnSeries(series.symbol, tuple(pairs), series.adjustment)


def cumulate(returns: ReturnSeries, leg: Union[str, Leg]) -> CumulativeCurve:
    """Compound one leg left to right; excluded days hold the curve flat."""
    leg = Leg(leg)
    growth = 1.0
    points = []
    for p in returns.pairs:
        if p.included:
            if leg is Leg.CLOSE_TO_CLOSE:
                growth *= (1.0 + p.overnight) * (1.0 + p.intraday)
            else:
                growth *= 1.0 + p.leg(leg)
        points.append((p.date, growth - 1.0))
    return CumulativeCurve(leg, tuple(points))


def compounding_identity_check(series: BarSeries, *, per_day: bool = False):
    """Largest ``|(1+overnight)(1+intraday) * close(t-1)/close(t) - 1|`` over the series.

    With ``per_day=True`` the full discrepancy array is returned instead.
    """
    if len(series) < 2:
        raise InsufficientDataError("insufficient data: need at least 2 bars")
    opens, closes = series.opens, series.closes
    overnight = opens[1:] / closes[:-1] - 1.0
    intraday = closes[1:] / opens[1:] - 1.0
    gap = np.abs((1.0 + overnight) * (1.0 + intraday) * closes[:-1] / closes[1:] - 1.0)
    return gap if per_day else float(gap.max())


def summary_stats(returns: ReturnSeries) -> dict:
    """Per-leg mean, sample standard deviation, count and end cumulative value."""
    if not returns.pairs or not returns.included.any():
        raise InsufficientDataError("insufficient data: no included return pairs")
    out = {}
    for leg in Leg:
        values = returns.leg_values(leg, included_only=True)
        n = values.size
        out[leg.value] = LegStats(
            mean=float(values.mean()),
            std=float(values.std(ddof=1)) if n > 1 else math.nan,
            count=int(n),
            end_cumulative=cumulate(returns, leg).end,
        )
    return out


# --------------------------------------------------------------------------
# serialization


def _num(x: float) -> str:
    return repr(float(x))


def returns_to_csv(returns: ReturnSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "overnight", "intraday", "nights", "included"])
    for p in returns.pairs:
        w.writerow([p.date.isoformat(), _num(p.overnight), _num(p.intraday),
                    p.nights_spanned, int(p.included)])
    return buf.getvalue()


def returns_to_json(returns: ReturnSeries) -> str:
    return json.dumps({
        "symbol": returns.symbol,
        "adjustment": returns.adjustment.value,
        "pairs": [
            {"date": p.date.isoformat(), "overnight": p.overnight, "intraday": p.intraday,
             "nights": p.nights_spanned, "included": p.included}
            for p in returns.pairs
        ],
    }, indent=2)


def curves_to_csv(curves: Sequence[CumulativeCurve]) -> str:
    """Wide CSV, one ``value`` column per leg: ``date,overnight,intraday,...``.

    All curves must share the same dates.
    """
    if not curves:
        raise InputError("no curves to write")
    dates = curves[0].dates
    for c in curves[1:]:
        if c.dates != dates:
            raise InputError("curves are not date-aligned")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date"] + [c.leg.value for c in curves])
    for i, d in enumerate(dates):
        w.writerow([d.isoformat()] + [_num(c.points[i][1]) for c in curves])
    return buf.getvalue()


def read_curves_csv(text: Union[str, bytes], *, path=None) -> dict:
    """Inverse of :func:`curves_to_csv`; returns ``{Leg: CumulativeCurve}``.

    A two-column ``date,value`` file is read as a single overnight curve.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8-sig")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        return {}
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "date":
        raise InputError("curves CSV must start with a 'date' column", path=path, line=1)
    legs = []
    for h in header[1:]:
        if h == "value":
            legs.append(Leg.OVERNIGHT)
            continue
        try:
            legs.append(Leg(h))
        except ValueError:
            raise InputError(f"unknown curve column {h!r}", path=path, line=1) from None
    points = {leg: [] for leg in legs}
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            d = date.fromisoformat(row[0].strip())
            for leg, cell in zip(legs, row[1:1 + len(legs)]):
                points[leg].append((d, float(cell)))
        except (ValueError, IndexError):
            raise InputError(f"malformed curve row {row!r}", path=path, line=lineno) from None
    return {leg: CumulativeCurve(leg, tuple(pts)) for leg, pts in points.items()}
