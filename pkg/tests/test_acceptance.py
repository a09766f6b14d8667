"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL/SKIP line to ``ACCEPTANCE_LINES``; the lines
are printed in the terminal summary. Real index data is read from the
path in ``OI_INDEX_CSV`` (a Yahoo-style daily CSV of the TSX 60 index);
without it the data-dependent parts are skipped.
"""
import json
import math
import os
import time
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, FIXTURES, random_series
from oracles import noise_free_totals, per_day_returns
from overnight_intraday.cli import main
from overnight_intraday.decomposition import Leg, ReturnPair, ReturnSeries, cumulate, decompose
from overnight_intraday.ingest import read_bars
from overnight_intraday.robustness import (
    CostModel,
    ExclusionCalendar,
    apply_exclusions,
    apply_overnight_capital_cost,
    dispersion_compare,
    divergence_statistic,
    regime_split,
)
from overnight_intraday.simulator import (
    DEFAULT_CONFIG,
    DEFAULT_FRONTIER_GRID,
    SimConfig,
    profitability_frontier,
    run,
)

INDEX_CSV = os.environ.get("OI_INDEX_CSV")
INDEX_END = os.environ.get("OI_INDEX_END")  # last data date, YYYY-MM-DD; default: end of file
EXTRACT = FIXTURES / "tsx60_extract.csv"


def _record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _skip(n, why):
    ACCEPTANCE_LINES.append(f"criterion {n}: SKIP  {why}")
    pytest.skip(why)


@pytest.fixture(scope="module")
def corpus():
    rng = np.random.default_rng(20240101)
    return [random_series(rng, int(n)) for n in rng.integers(2, 501, 1000)]


def test_criterion_1_compounding_identity(corpus):
    t0 = time.perf_counter()
    worst = 0.0
    for s in corpus:
        r = decompose(s)
        step = s.closes[1:] / s.closes[:-1]
        gap = np.abs((1.0 + r.overnight) * (1.0 + r.intraday) / step - 1.0)
        worst = max(worst, float(gap.max()))
    elapsed = time.perf_counter() - t0
    _record(1, worst <= 1e-12 and elapsed < 10.0,
            f"max discrepancy {worst:.3e} (<= 1e-12), {len(corpus)} series in {elapsed:.2f}s (< 10s)")


def test_criterion_2_conservation(corpus):
    worst = 0.0
    for s in corpus:
        r = decompose(s)
        lhs = (1.0 + cumulate(r, Leg.OVERNIGHT).end) * (1.0 + cumulate(r, Leg.INTRADAY).end)
        worst = max(worst, abs(lhs / (s.closes[-1] / s.closes[0]) - 1.0))
    _record(2, worst <= 1e-9, f"max relative conservation error {worst:.3e} (<= 1e-9)")


def _index_series(path, end=None):
    series, _ = read_bars(path, "TSX60", adjusted=True, open_repair="copy_prev_close")
    r = decompose(series)
    start = date(2000, 1, 1)
    stop = date.fromisoformat(end) if end else None
    r = r.slice_dates(start, None if stop is None else date.fromordinal(stop.toordinal() + 1))
    return series, r


def test_criterion_3_extract_sign_pattern():
    if not EXTRACT.exists():
        _record(3, False, f"fixture extract {EXTRACT.name} is not committed; no index data "
                          "was obtainable when the package was built")
    _, r = _index_series(EXTRACT)
    on, intra = cumulate(r, Leg.OVERNIGHT).end, cumulate(r, Leg.INTRADAY).end
    _record(3, on > 0 > intra, f"extract: overnight {on:+.4f} > 0 > intraday {intra:+.4f}")


def test_criterion_3_full_index():
    if not INDEX_CSV:
        _skip("3b", "set OI_INDEX_CSV to a TSX 60 daily CSV to evaluate the full-history targets")
    _, r = _index_series(INDEX_CSV, INDEX_END)
    on, intra = cumulate(r, Leg.OVERNIGHT).end, cumulate(r, Leg.INTRADAY).end
    ok = abs(on / 10.62 - 1.0) <= 0.25 and abs(intra - (-0.67)) <= 0.10 and on > 0 > intra
    _record("3b", ok, f"overnight {on:+.4f} (target +10.62 +/-25%), intraday {intra:+.4f} "
                      f"(target -0.67 +/-0.10), {r.dates[0]}..{r.dates[-1]}")


def test_criterion_4_synthetic_dispersion():
    out = run(DEFAULT_CONFIG.replace(expansion_size=0.0))
    stds = [dispersion_compare(decompose(s)).std_overnight for s in out.assets + (out.index,)]
    _record(4, all(v == 0.0 for v in stds), f"noise-only simulator: overnight std {stds} (== 0 exactly)")


def test_criterion_4_real_dispersion():
    if not INDEX_CSV:
        _skip("4b", "set OI_INDEX_CSV to evaluate the real-data dispersion claim")
    _, r = _index_series(INDEX_CSV, INDEX_END)
    d = dispersion_compare(r)
    _record("4b", d.std_intraday > d.std_overnight,
            f"std intraday {d.std_intraday:.5f} > std overnight {d.std_overnight:.5f}")


def test_criterion_5_mechanism():
    fx = json.loads((FIXTURES / "mechanism_default.json").read_text())
    cfg = SimConfig(**{**fx["config"], "start_date": date.fromisoformat(fx["config"]["start_date"])})
    assert cfg == DEFAULT_CONFIG, "default config drifted from the committed regression fixture"
    th, frozen = fx["thresholds"], fx["frozen"]

    def measure(config):
        out = run(config)
        asset = next(a for a in out.assets if a.symbol == fx["asset"])
        r = decompose(asset)
        return (cumulate(r, Leg.OVERNIGHT).end, cumulate(r, Leg.INTRADAY).end,
                divergence_statistic(r).t_statistic)

    on, intra, t = measure(cfg)
    ok = on > th["overnight_end_min"] and intra < th["intraday_end_max"] and t > th["t_statistic_min"]
    tol = frozen["rel_tol"]
    ok &= all(math.isclose(a, b, rel_tol=tol) for a, b in
              ((on, frozen["overnight_end"]), (intra, frozen["intraday_end"]), (t, frozen["t_statistic"])))
    # overnight carries no noise, so it must equal the noise-free closed form
    ok &= math.isclose(on, fx["noise_free_oracle"]["overnight_end"], rel_tol=1e-9)

    mc = [measure(cfg.replace(seed=s)) for s in fx["monte_carlo"]["seeds"]]
    mc_ok = all(o > th["overnight_end_min"] and i < th["intraday_end_max"] and tt > th["t_statistic_min"]
                for o, i, tt in mc)

    quiet = run(cfg.replace(expansion_size=0.0))
    se = cfg.noise_sigma * math.sqrt(cfg.n_days)
    worst = 0.0
    for s in quiet.assets:
        r = decompose(s)
        for leg in (Leg.OVERNIGHT, Leg.INTRADAY):
            worst = max(worst, abs(math.log1p(cumulate(r, leg).end)) / se)
    no_trade_ok = worst < th["no_trade_standard_errors"]

    _record(5, ok and mc_ok and no_trade_ok,
            f"overnight {on:+.4f} > 0.5, intraday {intra:+.4f} < -0.3, t {t:.2f} > 5, frozen match; "
            f"{len(mc)} seeds min t {min(m[2] for m in mc):.2f}; "
            f"no-trade max |log end| {worst:.2f} noise s.e. < 3")


def test_criterion_6_profitability():
    g = DEFAULT_FRONTIER_GRID
    base = DEFAULT_CONFIG.replace(**g["base"])
    f = profitability_frontier(base, g["expansion_sizes"], g["permanent_impacts"], g["trading_cost_rates"])
    any_profitable = any(c.profitable for c in f.cells)
    zero_never = not any(c.profitable for c in f.cells if c.expansion_size == 0)
    worst = 0.0
    for c in f.cells:
        mtm, commission, slippage = 0.0, 0.0, 0.0
        for side in base.sides:
            m, cm, sl = noise_free_totals(
                side=int(side), n_days=base.n_days, base_price=base.base_price,
                permanent_impact=c.permanent_impact, temporary_impact=base.temporary_impact,
                expansion_size=c.expansion_size, contraction_fraction=base.contraction_fraction,
                trading_cost_rate=c.trading_cost_rate, initial_position=base.initial_position)
            mtm, commission, slippage = mtm + m, commission + cm, slippage + sl
        for got, want in ((c.mtm_gain, mtm), (c.cost, commission + slippage)):
            if want != 0.0:
                worst = max(worst, abs(got / want - 1.0))
            elif got != 0.0:
                worst = math.inf
    ok = any_profitable and zero_never and worst <= 1e-9 and f.diagnostics["net_nonincreasing_in_cost"]
    best = max(f.cells, key=lambda c: c.net)
    _record(6, ok, f"{sum(c.profitable for c in f.cells)}/{len(f.cells)} cells profitable "
                   f"(best E={best.expansion_size}, lam={best.permanent_impact}, net {best.net:.1f}); "
                   f"zero-expansion never profitable: {zero_never}; max oracle rel error {worst:.2e}")


def test_criterion_7_robustness_algebra():
    rng = np.random.default_rng(7)
    failures = {"exclusion": 0, "cost": 0, "regime": 0}
    for _ in range(200):
        s = random_series(rng, int(rng.integers(6, 300)), start=date(2007, 1, 2))
        r = decompose(s)
        span = (r.dates[-1] - r.dates[0]).days

        def cal():
            k = int(rng.integers(0, 5))
            return tuple(sorted({date.fromordinal(r.dates[0].toordinal() + int(x))
                                 for x in rng.integers(-5, span + 5, k)}))
        w = (int(rng.integers(0, 3)), int(rng.integers(0, 3)))
        a, b = ExclusionCalendar("T", cal(), *w), ExclusionCalendar("T", cal(), *w)
        once = apply_exclusions(r, a)
        if apply_exclusions(once, a) != once or apply_exclusions(once, b) != apply_exclusions(r, a.union(b)):
            failures["exclusion"] += 1

        r1, r2 = (float(x) for x in rng.uniform(0, 0.2, 2))
        two = apply_overnight_capital_cost(apply_overnight_capital_cost(r, CostModel(r1)), CostModel(r2))
        one = apply_overnight_capital_cost(r, CostModel(r1 + r2))
        if not (np.allclose(two.overnight, one.overnight, rtol=1e-12, atol=1e-15)
                and np.array_equal(two.intraday, r.intraday)):
            failures["cost"] += 1

        cutoff = r.dates[int(rng.integers(2, len(r) - 2))]
        split = regime_split(r, cutoff)
        raw = per_day_returns(list(s.opens), list(s.closes))
        for part, keep in ((split.before, lambda d: d < cutoff), (split.after, lambda d: d >= cutoff)):
            sub = [x for x, d in zip(raw, r.dates) if keep(d)]
            for j, leg in enumerate(("overnight", "intraday")):
                vals = [x[j] for x in sub]
                growth = 1.0
                for v in vals:
                    growth *= 1.0 + v
                expect = {"mean": sum(vals) / len(vals), "end_cumulative": growth - 1.0,
                          "mean_log_growth": sum(math.log1p(v) for v in vals) / len(vals)}
                for key, want in expect.items():
                    if not math.isclose(part.legs[leg][key], want, rel_tol=1e-12, abs_tol=1e-15):
                        failures["regime"] += 1
    _record(7, not any(failures.values()), f"200 cases each, failures {failures} (tolerance 1e-12)")


def _all_commands(work: Path, bars: Path) -> dict:
    work.mkdir()
    (work / "cal.csv").write_text("symbol,event_date\nIDX,2001-03-05\n")
    (work / "sim.cfg").write_text("n_days = 250\nn_assets = 4\n")
    o = work / "out"
    rcs = [
        main(["decompose", "--input", str(bars), "--output-dir", str(o / "d"), "--write-bars"]),
        main(["robustness", "--input", str(bars), "--output-dir", str(o / "r"), "--exclusions",
              str(work / "cal.csv"), "--alt-open-column", "High", "--cutoff", "2001-06-01"]),
        main(["simulate", "--config", str(work / "sim.cfg"), "--output-dir", str(o / "s"),
              "--decompose", "--frontier"]),
        main(["render", "--input", str(o / "d" / "IDX_curves.csv"), str(o / "s" / "index_curves.csv"),
              "--output", str(o / "linear.svg")]),
        main(["render", "--input", str(o / "d" / "IDX_curves.csv"), "--scale", "log",
              "--output", str(o / "log.svg")]),
    ]
    assert rcs == [0] * 5, rcs
    return {p.relative_to(o).as_posix(): p.read_bytes() for p in sorted(o.rglob("*")) if p.is_file()}


def test_criterion_8_determinism(tmp_path):
    s = random_series(np.random.default_rng(8), 300, "IDX", with_range=True)
    bars = tmp_path / "IDX.csv"
    bars.write_text("Date,Open,High,Low,Close,Adj Close,Volume\n" + "".join(
        f"{b.date},{b.open!r},{b.high!r},{b.low!r},{b.close!r},{b.close!r},100\n" for b in s.bars))
    a = _all_commands(tmp_path / "a", bars)
    b = _all_commands(tmp_path / "b", bars)
    differing = sorted(k for k in a if a[k] != b.get(k))
    _record(8, a.keys() == b.keys() and not differing,
            f"{len(a)} output files from 4 commands, byte-identical on rerun (differing: {differing})")
