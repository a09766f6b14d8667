"""Small-multiple SVG panels of cumulative overnight/intraday curves.

Each panel draws the overnight curve in blue and the intraday curve in
green. In linear mode the vertical axis runs from -100% to the largest
cumulative overnight value; in log mode it shows ``log10(1 + value)``.
Zero is marked at the left edge and the final values are labelled at the
right edge. Output is deterministic: same inputs, same bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

from .decomposition import CumulativeCurve, Leg
from .exceptions import InputError

__all__ = ["Scale", "PanelSpec", "Style", "render_svg", "format_return", "read_manifest"]

SVG_NS = "http://www.w3.org/2000/svg"


class Scale(str, Enum):
    LINEAR = "linear"
    LOG = "log"


@dataclass(frozen=True)
class PanelSpec:
    symbol: str
    start: Optional[date] = None
    end: Optional[date] = None
    scale: Scale = Scale.LINEAR
    label_end: bool = True
    label_zero: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scale", Scale(self.scale))
        if self.start is not None and self.end is not None and self.end <= self.start:
            raise InputError(f"{self.symbol}: empty date range {self.start}..{self.end}")


@dataclass(frozen=True)
class Style:
    panel_width: float = 260.0
    panel_height: float = 170.0
    margin_left: float = 30.0
    margin_right: float = 58.0
    margin_top: float = 22.0
    margin_bottom: float = 20.0
    overnight_color: str = "#1f4fd8"
    intraday_color: str = "#1a9641"
    axis_color: str = "#888888"
    font_family: str = "Helvetica, Arial, sans-serif"
    font_size: float = 10.0


def format_return(value: float) -> str:
    """``10.62 -> '+1,062%'``, ``-0.67 -> '-67%'``."""
    pct = value * 100.0
    if abs(pct) < 0.5:
        return "0%"
    return f"{pct:+,.0f}%"


def _fmt(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _window(curve: Optional[CumulativeCurve], spec: PanelSpec) -> list:
    if curve is None:
        return []
    return [
        (d, v) for d, v in curve.points
        if (spec.start is None or d >= spec.start) and (spec.end is None or d <= spec.end)
    ]


def _y_range(on: list, intra: list, scale: Scale):
    on_vals = [v for _, v in on]
    in_vals = [v for _, v in intra]
    if scale is Scale.LINEAR:
        top = max(on_vals) if on_vals else 0.0
        # keep an intraday curve that out-runs the overnight one inside the frame
        top = max([top] + in_vals)
        if top <= 0.0:
            top = 0.1
        return -1.0, top
    ys = [math.log10(1.0 + v) for v in on_vals + in_vals] + [0.0]
    lo, hi = min(ys), max(ys)
    if hi - lo < 1e-9:
        lo, hi = lo - 0.05, hi + 0.05
    return lo, hi


def _panel(out: list, spec: PanelSpec, curves: Mapping, x0: float, y0: float, style: Style):
    w = style.panel_width - style.margin_left - style.margin_right
    h = style.panel_height - style.margin_top - style.margin_bottom
    left, top = x0 + style.margin_left, y0 + style.margin_top
    fs = style.font_size

    on = _window(curves.get(Leg.OVERNIGHT), spec)
    intra = _window(curves.get(Leg.INTRADAY), spec)
    attrs = f'class="panel" data-symbol={quoteattr(spec.symbol)} data-scale="{spec.scale.value}"'
    if on or intra:
        y_lo, y_hi = _y_range(on, intra, spec.scale)
        attrs += f' data-y-min="{y_lo!r}" data-y-max="{y_hi!r}"'
    out.append(f"<g {attrs}>")
    out.append(f'<text x="{_fmt(left)}" y="{_fmt(y0 + fs + 4)}" font-size="{_fmt(fs + 1)}" '
               f'font-weight="bold">{escape(spec.symbol)}</text>')
    out.append(f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(w)}" height="{_fmt(h)}" '
               f'fill="none" stroke="{style.axis_color}" stroke-width="0.5"/>')
    if not on and not intra:
        out.append(f'<text x="{_fmt(left + w / 2)}" y="{_fmt(top + h / 2)}" text-anchor="middle" '
                   f'fill="{style.axis_color}">no data</text>')
        out.append("</g>")
        return

    dates = [d for d, _ in on + intra]
    d_lo = spec.start or min(dates)
    d_hi = spec.end or max(dates)
    span = max((d_hi - d_lo).days, 1)

    def tx(d):
        return left + w * (d - d_lo).days / span

    def ty(v):
        y = math.log10(1.0 + v) if spec.scale is Scale.LOG else v
        return top + h * (y_hi - y) / (y_hi - y_lo)

    zero_y = ty(0.0)
    out.append(f'<line class="zero" x1="{_fmt(left)}" y1="{_fmt(zero_y)}" x2="{_fmt(left + w)}" '
               f'y2="{_fmt(zero_y)}" stroke="{style.axis_color}" stroke-width="0.5" '
               f'stroke-dasharray="2,2"/>')
    if spec.label_zero:
        out.append(f'<line class="zero-tick" x1="{_fmt(left - 4)}" y1="{_fmt(zero_y)}" '
                   f'x2="{_fmt(left)}" y2="{_fmt(zero_y)}" stroke="#000000" stroke-width="1"/>')
        out.append(f'<text x="{_fmt(left - 6)}" y="{_fmt(zero_y + fs / 3)}" text-anchor="end">0</text>')
    out.append(f'<text class="axis-date" x="{_fmt(left)}" y="{_fmt(top + h + fs + 4)}" '
               f'fill="{style.axis_color}">{d_lo.year}</text>')
    out.append(f'<text class="axis-date" x="{_fmt(left + w)}" y="{_fmt(top + h + fs + 4)}" '
               f'text-anchor="end" fill="{style.axis_color}">{d_hi.year}</text>')

    labels = []
    for pts, color, leg in ((on, style.overnight_color, Leg.OVERNIGHT),
                            (intra, style.intraday_color, Leg.INTRADAY)):
        if not pts:
            continue
        coords = " L".join(f"{_fmt(tx(d))},{_fmt(ty(v))}" for d, v in pts)
        out.append(f'<path class="{leg.value}" d="M{coords}" fill="none" stroke="{color}" '
                   f'stroke-width="1" stroke-linejoin="round"/>')
        labels.append([ty(pts[-1][1]), color, pts[-1][1]])

    if spec.label_end and labels:
        if len(labels) == 2 and abs(labels[0][0] - labels[1][0]) < fs + 1:
            hi_lab, lo_lab = sorted(labels, key=lambda t: t[0])
            mid = (hi_lab[0] + lo_lab[0]) / 2
            hi_lab[0], lo_lab[0] = mid - (fs + 1) / 2, mid + (fs + 1) / 2
        for y, color, value in labels:
            out.append(f'<text class="end-label" x="{_fmt(left + w + 4)}" y="{_fmt(y + fs / 3)}" '
                       f'fill="{color}">{escape(format_return(value))}</text>')
    out.append("</g>")


def render_svg(panels: Sequence, *, columns: int = 3, style: Style = Style(),
               title: Optional[str] = None) -> str:
    """Render ``[(PanelSpec, {Leg: CumulativeCurve}), ...]`` into one SVG document."""
    if columns < 1:
        raise InputError("columns must be >= 1")
    n = len(panels)
    cols = min(columns, max(n, 1))
    rows = max(math.ceil(n / cols), 1)
    head = 24.0 if title else 0.0
    width = cols * style.panel_width
    height = rows * style.panel_height + head
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{SVG_NS}" version="1.1" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" font-family={quoteattr(style.font_family)} '
        f'font-size="{_fmt(style.font_size)}">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{_fmt(width / 2)}" y="16" text-anchor="middle" '
                   f'font-size="{_fmt(style.font_size + 3)}">{escape(title)}</text>')
    for i, (spec, curves) in enumerate(panels):
        r, c = divmod(i, cols)
        _panel(out, spec, curves, c * style.panel_width, head + r * style.panel_height, style)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def read_manifest(path) -> list:
    """Read ``symbol -> curves CSV path`` pairs, keeping file order.

    Accepts a ``symbol,path`` CSV or a JSON object/list. Relative paths are
    resolved against the manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise InputError(f"cannot read manifest: {exc.strerror}", path=path) from None
    entries = []
    if path.suffix.lower() == ".json" or text.lstrip().startswith(("{", "[")):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid manifest JSON: {exc.msg}", path=path, line=exc.lineno) from None
        if isinstance(data, dict):
            entries = list(data.items())
        else:
            entries = [(e["symbol"], e["path"]) for e in data]
    else:
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["symbol", "path"]:
            raise InputError("manifest needs a 'symbol,path' header", path=path, line=1)
        for row in reader:
            if not any(c.strip() for c in row):
                continue
            if len(row) < 2:
                raise InputError(f"malformed manifest row {row!r}", path=path, line=reader.line_num)
            entries.append((row[0].strip(), row[1].strip()))
    return [(sym, (path.parent / p) if not Path(p).is_absolute() else Path(p)) for sym, p in entries]
