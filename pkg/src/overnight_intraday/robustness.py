"""Falsification checks over a :class:`ReturnSeries`.

Each check is a pure function: exclusion windows around event dates,
an overnight financing-cost deduction, a dispersion comparison between the
legs, a before/after regime split, a substituted-open recomputation and a
paired overnight-minus-intraday statistic. :class:`RobustnessReport`
collects the results for JSON output.
"""
from __future__ import annotations

import bisect
import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .decomposition import Leg, ReturnSeries, compounding_identity_check, cumulate, decompose
from .exceptions import InputError, InsufficientDataError, ReturnDomainError
from .ingest import BarSeries

__all__ = [
    "DEFAULT_CUTOFF",
    "ExclusionCalendar",
    "CostModel",
    "DispersionStats",
    "RegimeStats",
    "RegimeSplit",
    "ShiftedOpenResult",
    "DivergenceStat",
    "CheckResult",
    "RobustnessReport",
    "read_exclusion_calendars",
    "exclusion_mask",
    "apply_exclusions",
    "apply_overnight_capital_cost",
    "dispersion_compare",
    "regime_split",
    "shifted_open_sensitivity",
    "divergence_statistic",
    "end_values",
]

DEFAULT_CUTOFF = date(2008, 1, 1)


def _degenerate(std: float, scale: float) -> bool:
    # Zero up to accumulated rounding in the differences themselves.
    return std == 0.0 or std <= 64 * np.finfo(float).eps * max(scale, np.finfo(float).tiny)


@dataclass(frozen=True)
class ExclusionCalendar:
    """Event dates whose surrounding sessions are removed.

    The window counts trading sessions of the series being filtered: an
    event anchors at the first return date on or after it, and sessions
    ``anchor - days_before`` through ``anchor + days_after`` are excluded.
    """

    symbol: str
    dates: tuple = ()
    days_before: int = 1
    days_after: int = 1

    def __post_init__(self):
        if self.days_before < 0 or self.days_after < 0:
            raise InputError("exclusion window must be nonnegative")
        object.__setattr__(self, "dates", tuple(sorted(set(self.dates))))

    def union(self, other: "ExclusionCalendar") -> "ExclusionCalendar":
        if (self.days_before, self.days_after) != (other.days_before, other.days_after):
            raise InputError("cannot merge calendars with different windows")
        return dataclasses.replace(self, dates=self.dates + other.dates)


@dataclass(frozen=True)
class CostModel:
    annual_rate: float = 0.05
    day_count: int = 360

    def __post_init__(self):
        if not self.annual_rate >= 0:
            raise InputError(f"annual_rate must be >= 0, got {self.annual_rate}")
        if self.day_count <= 0:
            raise InputError(f"day_count must be > 0, got {self.day_count}")

    def charge(self, nights: int) -> float:
        return self.annual_rate * nights / self.day_count


@dataclass(frozen=True)
class DispersionStats:
    std_overnight: float
    std_intraday: float
    n_overnight: int
    n_intraday: int
    ratio: Optional[float]
    ratio_defined: bool
    f_statistic: Optional[float]
    p_value: Optional[float]  # one-sided, intraday variance > overnight variance


@dataclass(frozen=True)
class RegimeStats:
    start: date
    end: date
    count: int
    legs: dict  # leg -> {mean, end_cumulative, mean_log_growth}

    @property
    def divergence(self) -> float:
        """Overnight minus intraday mean daily log growth."""
        return self.legs["overnight"]["mean_log_growth"] - self.legs["intraday"]["mean_log_growth"]


@dataclass(frozen=True)
class RegimeSplit:
    cutoff: date
    before: RegimeStats
    after: RegimeStats


@dataclass(frozen=True)
class ShiftedOpenResult:
    evaluable: bool
    baseline: Optional[dict] = None
    shifted: Optional[dict] = None
    max_identity_gap: Optional[float] = None
    reason: Optional[str] = None


@dataclass(frozen=True)
class DivergenceStat:
    mean_difference: float
    std_difference: float
    t_statistic: Optional[float]
    n: int
    defined: bool


# --------------------------------------------------------------------------
# exclusions


def read_exclusion_calendars(text: Union[str, bytes], *, days_before: int = 1,
                             days_after: int = 1, path=None) -> dict:
    """Read a ``symbol,event_date`` CSV into ``{symbol: ExclusionCalendar}``."""
    if isinstance(text, bytes):
        text = text.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:2]] != ["symbol", "event_date"]:
        raise InputError("exclusion calendar needs a 'symbol,event_date' header", path=path, line=1)
    events = {}
    for row in reader:
        if not any(c.strip() for c in row):
            continue
        try:
            symbol, when = row[0].strip(), date.fromisoformat(row[1].strip())
        except (IndexError, ValueError):
            raise InputError(f"malformed calendar row {row!r}", path=path, line=reader.line_num) from None
        events.setdefault(symbol, []).append(when)
    return {
        sym: ExclusionCalendar(sym, tuple(ds), days_before, days_after)
        for sym, ds in events.items()
    }


def exclusion_mask(dates: Sequence[date], calendar: ExclusionCalendar) -> np.ndarray:
    """Boolean array, True where a return date falls inside an event window.

    Events before the first or after the last return date are ignored.
    """
    n = len(dates)
    mask = np.zeros(n, dtype=bool)
    if n == 0:
        return mask
    for event in calendar.dates:
        if event < dates[0] or event > dates[-1]:
            continue
        anchor = bisect.bisect_left(dates, event)
        lo = max(anchor - calendar.days_before, 0)
        hi = min(anchor + calendar.days_after, n - 1)
        mask[lo:hi + 1] = True
    return mask


def apply_exclusions(returns: ReturnSeries, calendar: ExclusionCalendar) -> ReturnSeries:
    """Mark both legs of every in-window day as excluded."""
    mask = exclusion_mask(returns.dates, calendar)
    if not mask.any():
        return returns
    return returns.replace_pairs(
        dataclasses.replace(p, included=False) if hit else p
        for p, hit in zip(returns.pairs, mask)
    )


# --------------------------------------------------------------------------
# overnight capital cost


def apply_overnight_capital_cost(returns: ReturnSeries, cost: CostModel) -> ReturnSeries:
    """Deduct ``annual_rate * nights / day_count`` from each overnight return."""
    pairs = []
    for p in returns.pairs:
        if p.nights_spanned < 1:
            raise InputError(f"{p.date}: nights_spanned must be >= 1")
        adjusted = p.overnight - cost.charge(p.nights_spanned)
        if adjusted <= -1.0:
            raise ReturnDomainError(f"{p.date}: cost-adjusted overnight return {adjusted} <= -100%")
        pairs.append(dataclasses.replace(p, overnight=adjusted))
    return returns.replace_pairs(pairs)


# --------------------------------------------------------------------------
# dispersion


def dispersion_compare(returns: ReturnSeries) -> DispersionStats:
    """Sample standard deviation of each leg and their F-ratio."""
    on = returns.leg_values(Leg.OVERNIGHT, included_only=True)
    intra = returns.leg_values(Leg.INTRADAY, included_only=True)
    if on.size < 2 or intra.size < 2:
        raise InsufficientDataError("dispersion needs at least 2 included pairs per leg")
    s_on = float(on.std(ddof=1))
    s_in = float(intra.std(ddof=1))
    if s_on > 0:
        ratio = s_in / s_on
        f_stat = ratio * ratio
        p_value = float(stats.f.sf(f_stat, intra.size - 1, on.size - 1))
    else:
        ratio = f_stat = p_value = None
    return DispersionStats(
        std_overnight=s_on,
        std_intraday=s_in,
        n_overnight=int(on.size),
        n_intraday=int(intra.size),
        ratio=ratio,
        ratio_defined=ratio is not None,
        f_statistic=f_stat,
        p_value=p_value,
    )


# --------------------------------------------------------------------------
# regimes


def _regime_stats(returns: ReturnSeries) -> RegimeStats:
    legs = {}
    for leg in (Leg.OVERNIGHT, Leg.INTRADAY, Leg.CLOSE_TO_CLOSE):
        values = returns.leg_values(leg, included_only=True)
        legs[leg.value] = {
            "mean": float(values.mean()),
            "end_cumulative": cumulate(returns, leg).end,
            "mean_log_growth": float(np.log1p(values).mean()),
        }
    return RegimeStats(returns.dates[0], returns.dates[-1], int(returns.included.sum()), legs)


def regime_split(returns: ReturnSeries, cutoff: date = DEFAULT_CUTOFF) -> RegimeSplit:
    """Statistics for returns dated before ``cutoff`` and on/after it."""
    before = returns.slice_dates(end=cutoff)
    after = returns.slice_dates(start=cutoff)
    for name, part in (("before", before), ("after", after)):
        if len(part) == 0 or part.included.sum() < 2:
            raise InsufficientDataError(
                f"regime {name} {cutoff} has fewer than 2 included return pairs"
            )
    return RegimeSplit(cutoff, _regime_stats(before), _regime_stats(after))


# --------------------------------------------------------------------------
# shifted open


def shifted_open_sensitivity(series: BarSeries,
                             alt_open: Optional[Sequence[float]] = None) -> ShiftedOpenResult:
    """End values with official opens vs. an alternative open price per bar.

    Without alternative prices the result is marked not evaluable.
    """
    if alt_open is None:
        return ShiftedOpenResult(False, reason="no alternative open prices supplied")
    alt = np.asarray(alt_open, dtype=float)
    if alt.shape != (len(series),):
        raise InputError(
            f"alternative opens misaligned: {alt.size} values for {len(series)} bars"
        )
    if not np.all(np.isfinite(alt) & (alt > 0)):
        raise InputError("alternative opens must be finite and positive")
    shifted_series = series.with_opens(alt)
    results = {}
    for name, s in (("baseline", series), ("shifted", shifted_series)):
        r = decompose(s)
        results[name] = {
            "overnight": cumulate(r, Leg.OVERNIGHT).end,
            "intraday": cumulate(r, Leg.INTRADAY).end,
        }
    return ShiftedOpenResult(
        True,
        baseline=results["baseline"],
        shifted=results["shifted"],
        max_identity_gap=compounding_identity_check(shifted_series),
    )


# --------------------------------------------------------------------------
# divergence


def divergence_statistic(returns: ReturnSeries) -> DivergenceStat:
    """Mean of overnight minus intraday over included days, with its t-value."""
    diff = (returns.leg_values(Leg.OVERNIGHT, included_only=True)
            - returns.leg_values(Leg.INTRADAY, included_only=True))
    n = int(diff.size)
    if n < 2:
        raise InsufficientDataError("divergence needs at least 2 included pairs")
    mean = float(diff.mean())
    std = float(diff.std(ddof=1))
    if _degenerate(std, float(np.abs(diff).max())):
        return DivergenceStat(mean, std, None, n, False)
    return DivergenceStat(mean, std, mean / (std / math.sqrt(n)), n, True)


# --------------------------------------------------------------------------
# report


def _jsonable(obj):
    if dataclasses.is_dataclass(obj):
        obj = {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, date):
        return obj.isoformat()
    if isinstance(obj, (np.floating, float)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class CheckResult:
    name: str
    evaluable: bool
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    reason: Optional[str] = None

    def to_dict(self) -> dict:
        return _jsonable(self)


@dataclass
class RobustnessReport:
    symbol: str
    checks: list = field(default_factory=list)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def to_dict(self) -> dict:
        return {"symbol": self.symbol, "checks": [c.to_dict() for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def end_values(returns: ReturnSeries) -> dict:
    return {
        "overnight": cumulate(returns, Leg.OVERNIGHT).end,
        "intraday": cumulate(returns, Leg.INTRADAY).end,
    }
