import xml.etree.ElementTree as ET
from datetime import date

import numpy as np
import pytest

from conftest import random_series
from overnight_intraday.decomposition import CumulativeCurve, Leg, cumulate, decompose
from overnight_intraday.exceptions import InputError
from overnight_intraday.render import PanelSpec, format_return, read_manifest, render_svg

NS = {"s": "http://www.w3.org/2000/svg"}


def _curves(rng, n=60, symbol="A"):
    r = decompose(random_series(rng, n, symbol))
    return {leg: cumulate(r, leg) for leg in Leg}


def _panels(root):
    return root.findall("s:g[@class='panel']", NS)


class TestRender:
    def test_two_paths_per_panel(self, rng):
        svg = render_svg([(PanelSpec("A"), _curves(rng)), (PanelSpec("B"), _curves(rng))])
        root = ET.fromstring(svg.encode())
        panels = _panels(root)
        assert len(panels) == 2
        for g in panels:
            paths = g.findall("s:path", NS)
            assert [p.get("class") for p in paths] == ["overnight", "intraday"]
            assert g.find("s:line[@class='zero']", NS) is not None
            assert len(g.findall("s:text[@class='end-label']", NS)) == 2

    def test_colors(self, rng):
        root = ET.fromstring(render_svg([(PanelSpec("A"), _curves(rng))]).encode())
        on, intra = _panels(root)[0].findall("s:path", NS)
        assert on.get("stroke") == "#1f4fd8" and intra.get("stroke") == "#1a9641"

    @pytest.mark.parametrize("seed", range(10))
    def test_linear_lower_bound_is_minus_one(self, seed):
        curves = _curves(np.random.default_rng(seed), n=200)
        root = ET.fromstring(render_svg([(PanelSpec("A"), curves)]).encode())
        g = _panels(root)[0]
        assert float(g.get("data-y-min")) == -1.0
        top = float(g.get("data-y-max"))
        assert top >= curves[Leg.OVERNIGHT].values.max()

    def test_log_scale_range(self, rng):
        curves = _curves(rng)
        root = ET.fromstring(render_svg([(PanelSpec("A", scale="log"), curves)]).encode())
        g = _panels(root)[0]
        assert g.get("data-scale") == "log"
        assert float(g.get("data-y-min")) <= 0.0 <= float(g.get("data-y-max"))

    def test_deterministic(self, rng):
        panels = [(PanelSpec("A"), _curves(rng))]
        assert render_svg(panels) == render_svg(panels)

    def test_self_contained(self, rng):
        svg = render_svg([(PanelSpec("A & <B>"), _curves(rng))], title="x")
        ET.fromstring(svg.encode())
        assert "href" not in svg and "url(" not in svg and "<image" not in svg

    def test_no_data_placeholder(self):
        empty = {Leg.OVERNIGHT: CumulativeCurve(Leg.OVERNIGHT, ()), Leg.INTRADAY: CumulativeCurve(Leg.INTRADAY, ())}
        root = ET.fromstring(render_svg([(PanelSpec("E"), empty)]).encode())
        g = _panels(root)[0]
        assert not g.findall("s:path", NS)
        assert any(t.text == "no data" for t in g.findall("s:text", NS))

    def test_window_outside_data_is_no_data(self, rng):
        spec = PanelSpec("A", start=date(1990, 1, 1), end=date(1991, 1, 1))
        assert "no data" in render_svg([(spec, _curves(rng))])

    def test_empty_range_rejected(self):
        with pytest.raises(InputError):
            PanelSpec("A", start=date(2020, 1, 2), end=date(2020, 1, 2))

    def test_format_return(self):
        assert format_return(10.62) == "+1,062%"
        assert format_return(-0.67) == "-67%"
        assert format_return(0.001) == "0%"


class TestManifest:
    def test_csv_relative_paths(self, tmp_path):
        (tmp_path / "m.csv").write_text("symbol,path\nA,a_curves.csv\nB,/abs/b.csv\n")
        entries = read_manifest(tmp_path / "m.csv")
        assert [s for s, _ in entries] == ["A", "B"]
        assert entries[0][1] == tmp_path / "a_curves.csv"
        assert str(entries[1][1]) == "/abs/b.csv"

    def test_json(self, tmp_path):
        (tmp_path / "m.json").write_text('{"X": "x.csv", "Y": "y.csv"}')
        assert [s for s, _ in read_manifest(tmp_path / "m.json")] == ["X", "Y"]

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("a,b\n")
        with pytest.raises(InputError):
            read_manifest(tmp_path / "m.csv")
