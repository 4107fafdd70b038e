from __future__ import annotations

import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from geoforge.dsl import parse_program
from geoforge.render import (CanvasTransform, NotSolved, RenderConfig, blank_svg, rasterize, render_svg,
                             to_png)
from geoforge.solver import Status, solve

NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def solved_triangle():
    from conftest import TRIANGLE

    prog = parse_program(TRIANGLE)
    return prog, solve(prog)


def test_transform_corners():
    cfg = RenderConfig(width=400, height=400, margin=0.1)
    tf = CanvasTransform(cfg)
    assert tf(-1, 1) == pytest.approx((40, 40))
    assert tf(1, -1) == pytest.approx((360, 360))
    assert tf.inverse(*tf(0.3, -0.2)) == pytest.approx((0.3, -0.2))


def test_triangle_svg(solved_triangle):
    prog, res = solved_triangle
    svg = render_svg(res, prog)
    root = ET.fromstring(svg)
    assert len(root.findall(f".//{NS}line")) == 3
    assert len(root.findall(f".//{NS}circle[@class='point']")) == 3
    assert [t.text for t in root.findall(f".//{NS}text")] == ["A", "B", "C"]
    assert svg == render_svg(res, prog)


def test_circle_geometry_mapped():
    prog = parse_program('O = point(label="O")\nA = point(label="A")\ncircle_1 = circle(center=O, through=[A])')
    res = solve(prog)
    cfg = RenderConfig()
    root = ET.fromstring(render_svg(res, prog, cfg))
    circ = root.find(f".//{NS}circle[@id='circle_1']")
    tf = CanvasTransform(cfg)
    cx, cy, r = res.params.circles[0]
    assert float(circ.get("cx")) == pytest.approx(tf(cx, cy)[0], abs=1e-3)
    assert float(circ.get("cy")) == pytest.approx(tf(cx, cy)[1], abs=1e-3)
    assert float(circ.get("r")) == pytest.approx(tf.length(r), abs=1e-3)


def test_unsolved_rejected(solved_triangle):
    prog, res = solved_triangle
    res2 = type(res)(Status.UNSOLVABLE, res.params, res.losses, res.iterations)
    with pytest.raises(NotSolved):
        render_svg(res2, prog)


def test_blank_raster_is_background():
    pix = rasterize(blank_svg())
    assert pix.shape == (512, 512, 3) and pix.dtype == np.uint8
    assert (pix == 255).all()


def test_triangle_raster_has_three_strokes(solved_triangle):
    prog, res = solved_triangle
    svg = render_svg(res, prog)
    pix = rasterize(svg).astype(int)
    red = (pix[..., 0] > 150) & (pix[..., 1] < 120) & (pix[..., 2] < 120)
    hits = 0
    for m in re.finditer(r'<line id="line_\d" x1="([\d.]+)" y1="([\d.]+)" x2="([\d.]+)" y2="([\d.]+)"', svg):
        x1, y1, x2, y2 = map(float, m.groups())
        # a point a third of the way along avoids the vertex markers
        x, y = round(x1 + (x2 - x1) / 3), round(y1 + (y2 - y1) / 3)
        hits += bool(red[y - 2: y + 3, x - 2: x + 3].any())
    assert hits == 3
    png = to_png(rasterize(svg))
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_config_validation():
    with pytest.raises(ValueError):
        RenderConfig(width=10)
