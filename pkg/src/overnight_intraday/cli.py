"""Command line entry point: ``overnight-intraday {decompose,robustness,simulate,render}``.

Exit codes: 0 success, 1 internal error, 2 input or validation error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import re
import sys
from datetime import date
from pathlib import Path

from . import __version__
from .decomposition import (
    Leg,
    compounding_identity_check,
    cumulate,
    curves_to_csv,
    decompose,
    read_curves_csv,
    returns_to_csv,
    summary_stats,
)
from .exceptions import InputError, InsufficientDataError
from .ingest import ColumnSchema, detect_schema, load_bars, read_bars, series_to_csv
from .render import PanelSpec, Scale, read_manifest, render_svg
from .robustness import (
    DEFAULT_CUTOFF,
    CheckResult,
    CostModel,
    ExclusionCalendar,
    RobustnessReport,
    apply_exclusions,
    apply_overnight_capital_cost,
    dispersion_compare,
    divergence_statistic,
    end_values,
    read_exclusion_calendars,
    regime_split,
    shifted_open_sensitivity,
)
from .simulator import (
    DEFAULT_CONFIG,
    DEFAULT_FRONTIER_GRID,
    frontier_to_csv,
    ledger_to_csv,
    profitability_frontier,
    read_config,
    run,
)

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2
CHECKS = ("exclusions", "capital_cost", "dispersion", "regime", "shifted_open", "divergence")
REPAIR_CHOICES = {"drop": "drop_day", "copy": "copy_prev_close", "fail": "fail"}


def _safe_name(symbol: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", symbol).strip("._") or "series"


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a YYYY-MM-DD date: {text!r}") from None


def _load_schema(path):
    if path is None:
        return None
    try:
        mapping = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read schema: {exc}", path=path) from None
    return ColumnSchema.from_mapping(mapping)


def _load_input(args):
    return read_bars(
        args.input,
        args.symbol,
        schema=_load_schema(args.schema),
        adjusted=args.adjusted,
        open_repair=REPAIR_CHOICES[args.open_repair],
    )


# --------------------------------------------------------------------------
# decompose


def decompose_file(input_path, output_dir, *, symbol=None, adjusted=True,
                   open_repair="copy", schema=None, write_bars=False) -> dict:
    """Ingest one CSV and write returns, curves and summary artifacts."""
    series, quality = read_bars(input_path, symbol, schema=schema, adjusted=adjusted,
                                open_repair=REPAIR_CHOICES.get(open_repair, open_repair))
    returns = decompose(series)
    curves = [cumulate(returns, leg) for leg in Leg]
    stats = summary_stats(returns)
    name = _safe_name(series.symbol)
    out = Path(output_dir)
    paths = {
        "returns": _write(out / f"{name}_returns.csv", returns_to_csv(returns)),
        "curves": _write(out / f"{name}_curves.csv", curves_to_csv(curves)),
    }
    if write_bars:
        paths["bars"] = _write(out / f"{name}_bars.csv", series_to_csv(series))
    summary = {
        "symbol": series.symbol,
        "adjustment": series.adjustment.value,
        "open_repair": REPAIR_CHOICES.get(open_repair, open_repair),
        "first_date": returns.dates[0].isoformat(),
        "last_date": returns.dates[-1].isoformat(),
        "n_returns": len(returns),
        "end_values": {c.leg.value: c.end for c in curves},
        "legs": {k: v.to_dict() for k, v in stats.items()},
        "max_identity_gap": compounding_identity_check(series),
        "data_quality": quality.to_dict(),
    }
    paths["summary"] = _write(out / f"{name}_summary.json", _dump(summary))
    return paths


def cmd_decompose(args) -> int:
    paths = decompose_file(args.input, args.output_dir, symbol=args.symbol,
                           adjusted=args.adjusted, open_repair=args.open_repair,
                           schema=_load_schema(args.schema), write_bars=args.write_bars)
    for p in paths.values():
        print(p)
    return EXIT_OK


# --------------------------------------------------------------------------
# robustness


def _alt_opens(args, series):
    """Alternative opens from another column of the input, cleaned like the main load."""
    raw = Path(args.input).read_bytes()
    base = _load_schema(args.schema) or detect_schema(raw)
    alt_schema = dataclasses.replace(base, open=args.alt_open_column)
    alt_series, _ = load_bars(raw, series.symbol, schema=alt_schema, adjusted=args.adjusted,
                              open_repair="fail", path=args.input)
    by_date = {b.date: b.open for b in alt_series.bars}
    missing = [d for d in series.dates if d not in by_date]
    if missing:
        raise InputError(f"alternative open column {args.alt_open_column!r} misaligned: "
                         f"no value on {missing[0]}", path=args.input)
    return [by_date[d] for d in series.dates]


def robustness_report(series, *, checks=CHECKS, calendar=None, cost=CostModel(),
                      cutoff=DEFAULT_CUTOFF, alt_open=None) -> RobustnessReport:
    returns = decompose(series)
    baseline = end_values(returns)
    report = RobustnessReport(series.symbol)

    for name in checks:
        if name == "exclusions":
            if calendar is None:
                report.add(CheckResult(name, False, reason="no exclusion calendar supplied"))
                continue
            filtered = apply_exclusions(returns, calendar)
            after = end_values(filtered)
            report.add(CheckResult(name, True, inputs={
                "events": len(calendar.dates),
                "days_before": calendar.days_before,
                "days_after": calendar.days_after,
            }, outputs={
                "excluded_days": filtered.n_excluded,
                "baseline": baseline,
                "filtered": after,
                "delta": {k: after[k] - baseline[k] for k in baseline},
            }))
        elif name == "capital_cost":
            charged = apply_overnight_capital_cost(returns, cost)
            after = end_values(charged)
            report.add(CheckResult(name, True, inputs={
                "annual_rate": cost.annual_rate, "day_count": cost.day_count,
                "nights": int(sum(p.nights_spanned for p in returns.pairs)),
            }, outputs={
                "baseline": baseline,
                "cost_adjusted": after,
                "delta": {k: after[k] - baseline[k] for k in baseline},
            }))
        elif name == "dispersion":
            try:
                report.add(CheckResult(name, True, outputs=dispersion_compare(returns)))
            except InsufficientDataError as exc:
                report.add(CheckResult(name, False, reason=str(exc)))
        elif name == "regime":
            try:
                split = regime_split(returns, cutoff)
            except InsufficientDataError as exc:
                report.add(CheckResult(name, False, inputs={"cutoff": cutoff}, reason=str(exc)))
                continue
            report.add(CheckResult(name, True, inputs={"cutoff": cutoff}, outputs={
                "before": split.before, "after": split.after,
                "divergence_before": split.before.divergence,
                "divergence_after": split.after.divergence,
            }))
        elif name == "shifted_open":
            result = shifted_open_sensitivity(series, alt_open)
            report.add(CheckResult(name, result.evaluable, outputs={
                "baseline": result.baseline, "shifted": result.shifted,
                "max_identity_gap": result.max_identity_gap,
            } if result.evaluable else {}, reason=result.reason))
        elif name == "divergence":
            try:
                report.add(CheckResult(name, True, outputs=divergence_statistic(returns)))
            except InsufficientDataError as exc:
                report.add(CheckResult(name, False, reason=str(exc)))
        else:
            raise InputError(f"unknown check {name!r}")
    return report


def cmd_robustness(args) -> int:
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    unknown = sorted(set(checks) - set(CHECKS))
    if unknown:
        raise InputError(f"unknown check(s) {unknown}; choose from {', '.join(CHECKS)}")
    series, _ = _load_input(args)

    calendar = None
    if args.exclusions:
        path = Path(args.exclusions)
        try:
            text = path.read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read calendar: {exc.strerror}", path=path) from None
        calendars = read_exclusion_calendars(text, days_before=args.window_before,
                                             days_after=args.window_after, path=path)
        calendar = calendars.get(series.symbol) or ExclusionCalendar(
            series.symbol, (), args.window_before, args.window_after)

    alt_open = _alt_opens(args, series) if args.alt_open_column else None
    report = robustness_report(
        series, checks=checks, calendar=calendar,
        cost=CostModel(args.cost_rate, args.day_count), cutoff=args.cutoff, alt_open=alt_open,
    )
    print(_write(Path(args.output_dir) / f"{_safe_name(series.symbol)}_robustness.json",
                 report.to_json()))
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def _read_grid(path):
    if path == "default":
        return DEFAULT_FRONTIER_GRID
    try:
        grid = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read frontier grid: {exc}", path=path) from None
    unknown = set(grid) - {"base", "expansion_sizes", "permanent_impacts", "trading_cost_rates"}
    if unknown:
        raise InputError(f"unknown frontier grid keys {sorted(unknown)}", path=path)
    return {**DEFAULT_FRONTIER_GRID, **grid}


def cmd_simulate(args) -> int:
    config = read_config(args.config) if args.config else DEFAULT_CONFIG
    out = Path(args.output_dir)
    output = run(config)
    written = [_write(out / "sim_config.json", _dump(config.to_dict()))]
    for series in output.assets + (output.index,):
        written.append(_write(out / f"{series.symbol}.csv", series_to_csv(series)))
    written.append(_write(out / "ledger.csv", ledger_to_csv(output.ledger)))
    if args.decompose:
        written.extend(decompose_file(out / "index.csv", out, symbol="index",
                                      adjusted=False).values())
    if args.frontier:
        grid = _read_grid(args.frontier)
        base = config.replace(**grid.get("base", {}))
        frontier = profitability_frontier(base, grid["expansion_sizes"], grid["permanent_impacts"],
                                          grid.get("trading_cost_rates"))
        written.append(_write(out / "frontier.csv", frontier_to_csv(frontier)))
        written.append(_write(out / "frontier.json", _dump({
            "base": base.to_dict(), "diagnostics": frontier.diagnostics})))
    for p in written:
        print(p)
    return EXIT_OK


# --------------------------------------------------------------------------
# render


def cmd_render(args) -> int:
    entries = []
    if args.manifest:
        entries.extend(read_manifest(args.manifest))
    for p in args.input or ():
        p = Path(p)
        name = p.stem[:-len("_curves")] if p.stem.endswith("_curves") else p.stem
        entries.append((name, p))
    if not entries:
        raise InputError("render needs --manifest or --input curves files")
    panels = []
    for symbol, path in entries:
        try:
            text = Path(path).read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read curves: {exc.strerror}", path=path) from None
        curves = read_curves_csv(text, path=path)
        spec = PanelSpec(symbol, args.start, args.end, Scale(args.scale))
        panels.append((spec, curves))
    svg = render_svg(panels, columns=args.columns, title=args.title)
    target = Path(args.output) if args.output else Path(args.output_dir) / "panels.svg"
    print(_write(target, svg))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_input_flags(p):
    p.add_argument("--input", required=True, help="daily bar CSV")
    p.add_argument("--symbol", help="series name (default: input file stem)")
    p.add_argument("--schema", help="JSON file mapping fields to column names")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--adjusted", dest="adjusted", action="store_true", default=True,
                      help="back-adjust prices by Adj Close / Close (default)")
    mode.add_argument("--raw", dest="adjusted", action="store_false",
                      help="use prices as they appear in the file")
    p.add_argument("--open-repair", choices=sorted(REPAIR_CHOICES), default="copy",
                   help="handling of missing or placeholder opens (default: copy)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overnight-intraday",
        description="Overnight vs. intraday return decomposition toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="daily returns, cumulative curves and summary")
    _add_input_flags(p)
    p.add_argument("--output-dir", default=".")
    p.add_argument("--write-bars", action="store_true", help="also write the cleaned bar series")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("robustness", help="falsification checks as a JSON report")
    _add_input_flags(p)
    p.add_argument("--output-dir", default=".")
    p.add_argument("--checks", default=",".join(CHECKS),
                   help=f"comma-separated subset of {','.join(CHECKS)}")
    p.add_argument("--exclusions", help="CSV of symbol,event_date")
    p.add_argument("--window-before", type=int, default=1)
    p.add_argument("--window-after", type=int, default=1)
    p.add_argument("--cost-rate", type=float, default=0.05, help="annual overnight rate")
    p.add_argument("--day-count", type=int, default=360)
    p.add_argument("--cutoff", type=_parse_date, default=DEFAULT_CUTOFF)
    p.add_argument("--alt-open-column",
                   help="input column holding a price shortly after the open")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("simulate", help="price-impact simulation")
    p.add_argument("--config", help="JSON or key=value SimConfig file")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--decompose", action="store_true", help="decompose the synthetic index")
    p.add_argument("--frontier", nargs="?", const="default",
                   help="write a profitability frontier (optional grid JSON)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render", help="SVG small multiples of cumulative curves")
    p.add_argument("--manifest", help="symbol,path CSV or JSON of curves files")
    p.add_argument("--input", nargs="+", help="curves CSV files")
    p.add_argument("--output", help="SVG path (default: OUTPUT_DIR/panels.svg)")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--scale", choices=[s.value for s in Scale], default="linear")
    p.add_argument("--columns", type=int, default=3)
    p.add_argument("--start", type=_parse_date)
    p.add_argument("--end", type=_parse_date)
    p.add_argument("--title")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
