"""Daily expand-at-open / contract-before-close simulation under price impact.

One trading day, per asset with side ``s`` (+1 long book, -1 short book),
expansion size ``E``, permanent impact ``lam``, temporary impact ``tau`` and
contraction fraction ``c``:

1. ``open = prev_close * (1 + s*lam*E)``
2. the firm trades ``s*E`` at ``open * (1 + s*tau*E)``
3. ``mid = open * exp(sigma * z)`` with ``z ~ N(0, 1)``
4. the firm trades ``-s*c*E``, ``close = mid * (1 - s*lam*c*E)``, filled at
   ``close * (1 - s*tau*c*E)``
5. the ledger marks held units at open and close prices and charges
   commission on filled notional plus the execution slippage

Execution slippage never moves the marks; only permanent impact does.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import typing
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import InputError, SimulationAbort
from .ingest import Adjustment, BarSeries, DailyBar

__all__ = [
    "SimConfig",
    "DEFAULT_CONFIG",
    "DEFAULT_FRONTIER_GRID",
    "MarketState",
    "LedgerRow",
    "SimLedger",
    "SimOutput",
    "FrontierCell",
    "Frontier",
    "initial_state",
    "step_day",
    "run",
    "profitability_frontier",
    "read_config",
    "parse_config",
    "ledger_to_csv",
    "frontier_to_csv",
    "trading_dates",
]


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    ``initial_position`` is the book held per asset before day one (units,
    sign follows the asset's side). ``active_days`` switches the
    expansion/contraction off after that many days; ``None`` keeps it on.
    """

    n_assets: int = 2
    n_days: int = 2520
    base_price: float = 100.0
    noise_sigma: float = 0.01
    permanent_impact: float = 1e-4
    temporary_impact: float = 1e-5
    expansion_size: float = 10.0
    contraction_fraction: float = 1.0
    trading_cost_rate: float = 5e-4
    market_neutral: bool = True
    seed: int = 20200101
    initial_position: float = 0.0
    active_days: Optional[int] = None
    start_date: date = date(2000, 1, 3)

    def __post_init__(self):
        if isinstance(self.start_date, str):
            object.__setattr__(self, "start_date", date.fromisoformat(self.start_date))
        problems = []
        if self.n_assets < 1:
            problems.append("n_assets must be >= 1")
        if self.market_neutral and self.n_assets % 2:
            problems.append("n_assets must be even when market_neutral")
        if self.n_days < 1:
            problems.append("n_days must be >= 1")
        if not self.base_price > 0:
            problems.append("base_price must be > 0")
        for name in ("noise_sigma", "permanent_impact", "temporary_impact",
                     "expansion_size", "trading_cost_rate", "initial_position"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                problems.append(f"{name} must be finite and >= 0")
        if not 0 <= self.contraction_fraction <= 1:
            problems.append("contraction_fraction must lie in [0, 1]")
        if self.active_days is not None and self.active_days < 0:
            problems.append("active_days must be >= 0")
        if problems:
            raise InputError("invalid SimConfig: " + "; ".join(problems))

    @property
    def sides(self) -> np.ndarray:
        """+1 for long-book assets, -1 for short-book assets."""
        if not self.market_neutral:
            return np.ones(self.n_assets)
        half = self.n_assets // 2
        return np.concatenate([np.ones(half), -np.ones(half)])

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["start_date"] = self.start_date.isoformat()
        return d


DEFAULT_CONFIG = SimConfig()

# Noise-free, net-expanding book (10% of each morning's expansion is kept).
DEFAULT_FRONTIER_GRID = {
    "base": {"noise_sigma": 0.0, "contraction_fraction": 0.9},
    "expansion_sizes": [0.0, 5.0, 10.0, 20.0],
    "permanent_impacts": [0.0, 1e-5, 1e-4],
    "trading_cost_rates": [0.0, 5e-4, 2e-3],
}


@dataclass(frozen=True)
class MarketState:
    day: int
    prices: np.ndarray
    positions: np.ndarray
    rng_state: dict

    def __post_init__(self):
        if not np.all(self.prices > 0):
            raise InputError("market prices must be positive")


@dataclass(frozen=True)
class LedgerRow:
    day: int
    date: date
    mtm_gain: float
    commission: float
    slippage: float
    gross_position: float

    @property
    def cost(self) -> float:
        return self.commission + self.slippage

    @property
    def net(self) -> float:
        return self.mtm_gain - self.cost


@dataclass(frozen=True)
class SimLedger:
    rows: tuple

    def _running(self, attr) -> np.ndarray:
        total = 0.0
        out = []
        for r in self.rows:
            total += getattr(r, attr)
            out.append(total)
        return np.array(out)

    @property
    def cumulative_mtm(self) -> np.ndarray:
        return self._running("mtm_gain")

    @property
    def cumulative_cost(self) -> np.ndarray:
        return self._running("cost")

    @property
    def cumulative_net(self) -> np.ndarray:
        return self._running("net")

    @property
    def total_mtm(self) -> float:
        return float(self.cumulative_mtm[-1]) if self.rows else 0.0

    @property
    def total_cost(self) -> float:
        return float(self.cumulative_cost[-1]) if self.rows else 0.0

    @property
    def total_net(self) -> float:
        return float(self.cumulative_net[-1]) if self.rows else 0.0


@dataclass(frozen=True)
class SimOutput:
    config: SimConfig
    assets: tuple  # BarSeries per asset, in config order
    index: BarSeries
    ledger: SimLedger

    def long_assets(self) -> list:
        return [a for a, s in zip(self.assets, self.config.sides) if s > 0]


def trading_dates(start: date, n: int) -> list:
    """``n`` consecutive weekdays from ``start`` (rolled forward if a weekend)."""
    days = np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")
    return [d.item() for d in days]


def _asset_symbols(config: SimConfig) -> list:
    return [f"{'long' if s > 0 else 'short'}_{i:02d}" for i, s in enumerate(config.sides)]


def initial_state(config: SimConfig) -> MarketState:
    rng = np.random.Generator(np.random.PCG64(config.seed))
    return MarketState(
        day=0,
        prices=np.full(config.n_assets, float(config.base_price)),
        positions=config.sides * config.initial_position,
        rng_state=rng.bit_generator.state,
    )


def step_day(state: MarketState, config: SimConfig, when: Optional[date] = None):
    """Advance one trading day.

    Returns ``(new_state, bars, ledger_row)`` where ``bars`` holds one
    :class:`DailyBar` per asset. Raises :class:`SimulationAbort` if any
    mark or fill price would be non-positive.
    """
    day = state.day + 1
    if when is None:
        when = trading_dates(config.start_date, day + 1)[-1]
    s = config.sides
    active = config.active_days is None or day <= config.active_days
    E = config.expansion_size if active else 0.0
    lam, tau, c = config.permanent_impact, config.temporary_impact, config.contraction_fraction

    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = state.rng_state
    z = rng.standard_normal(config.n_assets)

    prev = state.prices
    held = state.positions

    open_ = prev * (1.0 + s * lam * E)
    open_fill = open_ * (1.0 + s * tau * E)
    mid = open_ * np.exp(config.noise_sigma * z)
    close = mid * (1.0 - s * lam * c * E)
    close_fill = close * (1.0 - s * tau * c * E)
    for name, px in (("open", open_), ("open fill", open_fill),
                     ("close", close), ("close fill", close_fill)):
        if not np.all(px > 0):
            raise SimulationAbort(f"non-positive {name} price on day {day}", day=day)

    after_open = held + s * E
    after_close = after_open - s * c * E

    mtm = held * (open_ - prev) + after_open * (close - open_)
    notional = E * open_fill + c * E * close_fill
    slippage = E * np.abs(open_fill - open_) + c * E * np.abs(close_fill - close)

    row = LedgerRow(
        day=day,
        date=when,
        mtm_gain=float(mtm.sum()),
        commission=float(config.trading_cost_rate * notional.sum()),
        slippage=float(slippage.sum()),
        gross_position=float(np.abs(after_close).sum()),
    )
    bars = [
        DailyBar(when, float(o), float(cl), float(max(o, m, cl)), float(min(o, m, cl)))
        for o, m, cl in zip(open_, mid, close)
    ]
    new_state = MarketState(day, close, after_close, rng.bit_generator.state)
    return new_state, bars, row


def _index_bar(when: date, bars: Sequence[DailyBar]) -> DailyBar:
    # All assets start at base_price, so the plain mean is already rebased.
    o = float(np.mean([b.open for b in bars]))
    cl = float(np.mean([b.close for b in bars]))
    return DailyBar(when, o, cl, max(o, cl), min(o, cl))


def _simulate(config: SimConfig, collect_bars: bool = True):
    dates = trading_dates(config.start_date, config.n_days + 1)
    state = initial_state(config)
    anchor = [DailyBar(dates[0], config.base_price, config.base_price,
                       config.base_price, config.base_price)] * config.n_assets
    per_asset = [[b] for b in anchor]
    index = [_index_bar(dates[0], anchor)]
    rows = []
    for when in dates[1:]:
        state, bars, row = step_day(state, config, when)
        rows.append(row)
        if collect_bars:
            for series, b in zip(per_asset, bars):
                series.append(b)
            index.append(_index_bar(when, bars))
    return per_asset, index, SimLedger(tuple(rows))


def run(config: SimConfig = DEFAULT_CONFIG) -> SimOutput:
    """Simulate ``config.n_days`` days; identical config gives identical output."""
    per_asset, index, ledger = _simulate(config)
    assets = tuple(
        BarSeries(sym, tuple(bars), Adjustment.RAW)
        for sym, bars in zip(_asset_symbols(config), per_asset)
    )
    return SimOutput(config, assets, BarSeries("index", tuple(index), Adjustment.RAW), ledger)


# --------------------------------------------------------------------------
# profitability frontier


@dataclass(frozen=True)
class FrontierCell:
    expansion_size: float
    permanent_impact: float
    trading_cost_rate: float
    mtm_gain: Optional[float]
    cost: Optional[float]
    net: Optional[float]
    aborted: bool = False
    abort_day: Optional[int] = None

    @property
    def profitable(self) -> bool:
        return not self.aborted and self.mtm_gain > self.cost


@dataclass(frozen=True)
class Frontier:
    cells: tuple
    diagnostics: dict = field(default_factory=dict)

    def cell(self, expansion_size, permanent_impact, trading_cost_rate) -> FrontierCell:
        for c in self.cells:
            if (c.expansion_size, c.permanent_impact, c.trading_cost_rate) == (
                    expansion_size, permanent_impact, trading_cost_rate):
                return c
        raise KeyError((expansion_size, permanent_impact, trading_cost_rate))


def _frontier_diagnostics(cells: Sequence[FrontierCell]) -> dict:
    ok = [c for c in cells if not c.aborted]
    no_trade_unprofitable = all(not c.profitable for c in ok if c.expansion_size == 0)
    by_key = {}
    for c in ok:
        by_key.setdefault((c.expansion_size, c.permanent_impact), []).append(c)
    cost_monotone = True
    for group in by_key.values():
        group = sorted(group, key=lambda c: c.trading_cost_rate)
        for a, b in zip(group, group[1:]):
            if b.net > a.net:
                cost_monotone = False
    return {
        "no_trade_unprofitable": no_trade_unprofitable,
        "net_nonincreasing_in_cost": cost_monotone,
        "any_profitable": any(c.profitable for c in ok),
        "aborted_cells": sum(c.aborted for c in cells),
    }


def profitability_frontier(base: SimConfig,
                           expansion_sizes: Sequence[float],
                           permanent_impacts: Sequence[float],
                           trading_cost_rates: Optional[Sequence[float]] = None) -> Frontier:
    """Cumulative mark-to-market gain vs. cost over a parameter grid.

    Cells are produced in grid order (expansion size, then impact, then
    cost rate). Aborted runs are kept and marked.
    """
    rates = [base.trading_cost_rate] if trading_cost_rates is None else list(trading_cost_rates)
    cells = []
    for size in expansion_sizes:
        for lam in permanent_impacts:
            for rate in rates:
                cfg = base.replace(expansion_size=float(size), permanent_impact=float(lam),
                                   trading_cost_rate=float(rate))
                try:
                    _, _, ledger = _simulate(cfg, collect_bars=False)
                except SimulationAbort as exc:
                    cells.append(FrontierCell(cfg.expansion_size, cfg.permanent_impact,
                                              cfg.trading_cost_rate, None, None, None,
                                              aborted=True, abort_day=exc.day))
                    continue
                cells.append(FrontierCell(cfg.expansion_size, cfg.permanent_impact,
                                          cfg.trading_cost_rate, ledger.total_mtm,
                                          ledger.total_cost, ledger.total_net))
    return Frontier(tuple(cells), _frontier_diagnostics(cells))


# --------------------------------------------------------------------------
# config and serialization


def _coerce(name: str, raw: str):
    hints = typing.get_type_hints(SimConfig)
    kind = hints[name]
    raw = raw.strip()
    if typing.get_origin(kind) is typing.Union:
        if raw.lower() in {"", "none", "null"}:
            return None
        kind = next(a for a in typing.get_args(kind) if a is not type(None))
    if kind is bool:
        if raw.lower() in {"1", "true", "yes", "on"}:
            return True
        if raw.lower() in {"0", "false", "no", "off"}:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind is date:
        return date.fromisoformat(raw)
    return raw


def read_config(path) -> SimConfig:
    """Load a :class:`SimConfig` from JSON or ``key=value`` lines."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config: {exc.strerror}", path=path) from None
    return parse_config(text, path=path)


def parse_config(text: str, *, path=None) -> SimConfig:
    known = {f.name for f in dataclasses.fields(SimConfig)}
    values = {}
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON config: {exc.msg}", path=path, line=exc.lineno) from None
        items = [(k, v, None) for k, v in data.items()]
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputError(f"expected key=value, got {line!r}", path=path, line=lineno)
            key, raw = line.split("=", 1)
            items.append((key.strip(), raw, lineno))
    for key, value, lineno in items:
        if key not in known:
            raise InputError(f"unknown config key {key!r}", path=path, line=lineno)
        try:
            values[key] = _coerce(key, value) if isinstance(value, str) else value
        except ValueError as exc:
            raise InputError(f"bad value for {key}: {exc}", path=path, line=lineno) from None
    return SimConfig(**values)


def ledger_to_csv(ledger: SimLedger) -> str:
    """``day,mtm_gain,cost,net,gross_position``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["day", "mtm_gain", "cost", "net", "gross_position"])
    for r in ledger.rows:
        w.writerow([r.day, repr(r.mtm_gain), repr(r.cost), repr(r.net), repr(r.gross_position)])
    return buf.getvalue()


def frontier_to_csv(frontier: Frontier) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["expansion_size", "permanent_impact", "trading_cost_rate",
                "mtm_gain", "cost", "net", "profitable", "aborted", "abort_day"])
    for c in frontier.cells:
        w.writerow([repr(c.expansion_size), repr(c.permanent_impact), repr(c.trading_cost_rate),
                    "" if c.mtm_gain is None else repr(c.mtm_gain),
                    "" if c.cost is None else repr(c.cost),
                    "" if c.net is None else repr(c.net),
                    int(c.profitable), int(c.aborted),
                    "" if c.abort_day is None else c.abort_day])
    return buf.getvalue()
