import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from overnight_intraday.ingest import BarSeries

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


def random_series(rng, n, symbol="RND", start=date(2001, 1, 2), with_range=False):
    """Positive random-walk bars on consecutive weekdays."""
    log_close = np.cumsum(rng.normal(0, 0.012, n)) + np.log(rng.uniform(5, 500))
    closes = np.exp(log_close)
    prev = np.concatenate([[closes[0]], closes[:-1]])
    opens = prev * np.exp(rng.normal(0.0005, 0.006, n))
    dates = []
    d = start
    while len(dates) < n:
        if d.weekday() < 5:
            dates.append(d)
        d += timedelta(days=1)
    highs = lows = None
    if with_range:
        highs = np.maximum(opens, closes) * (1 + rng.uniform(0, 0.01, n))
        lows = np.minimum(opens, closes) * (1 - rng.uniform(0, 0.01, n))
    return BarSeries.from_arrays(symbol, dates, opens, closes, highs, lows)


@st.composite
def bar_series(draw, min_size=2, max_size=60):
    n = draw(st.integers(min_size, max_size))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_series(np.random.default_rng(seed), n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def yahoo_csv():
    return (
        "Date,Open,High,Low,Close,Adj Close,Volume\n"
        "2020-01-02,100,101,99,100.5,100.5,1000\n"
        "2020-01-03,100.4,102,100,101.5,101.5,1200\n"
        "2020-01-06,101,101.8,100.2,100.9,100.9,900\n"
    )


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
