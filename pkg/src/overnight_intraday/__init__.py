"""Overnight/intraday return decomposition, robustness checks and an
expand-at-open / contract-intraday price-impact simulator."""

__version__ = "0.1.0"

from .decomposition import (
    CumulativeCurve,
    Leg,
    ReturnPair,
    ReturnSeries,
    compounding_identity_check,
    cumulate,
    decompose,
    summary_stats,
)
from .estimators import OvernightCostAdjuster, ReturnDecomposer
from .exceptions import InputError
from .ingest import BarSeries, DailyBar, load_bars, read_bars
from .simulator import DEFAULT_CONFIG, SimConfig, profitability_frontier, run

__all__ = [
    "BarSeries",
    "CumulativeCurve",
    "DEFAULT_CONFIG",
    "DailyBar",
    "InputError",
    "Leg",
    "OvernightCostAdjuster",
    "ReturnDecomposer",
    "ReturnPair",
    "ReturnSeries",
    "SimConfig",
    "compounding_identity_check",
    "cumulate",
    "decompose",
    "load_bars",
    "profitability_frontier",
    "read_bars",
    "run",
    "summary_stats",
]
