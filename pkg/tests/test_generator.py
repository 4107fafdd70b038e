from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import ScriptedRng
from geoforge.dsl import (LABELS, CircleDecl, ConstraintKind, GeoProgram, PointRef, errors, parse_program,
                          serialize_program)
from geoforge.generator import (GenConfig, Inadmissible, OpKind, admissible_ops, apply, find_triangles, generate,
                                generate_with_trace, init_scene, prepare)


def test_init_triangle_when_r_small():
    p = init_scene(GenConfig(), ScriptedRng([0.1]))
    assert p.counts() == {"points": 3, "lines": 3, "circles": 0, "constraints": 0}
    assert [pt.label for pt in p.points] == ["A", "B", "C"]


def test_init_quadrilateral():
    p = init_scene(GenConfig(), ScriptedRng([0.6]))
    assert p.counts()["points"] == 4 and p.counts()["lines"] == 4


def test_init_circle_with_center():
    p = init_scene(GenConfig(), ScriptedRng([0.85, 0.3]))
    assert p.points == (PointRef.labeled("A"),)
    assert p.circles == (CircleDecl(PointRef.labeled("A"), ()),)


def test_init_circle_without_center():
    p = init_scene(GenConfig(), ScriptedRng([0.85, 0.9]))
    assert p.points == () and p.circles == (CircleDecl(None, ()),)


def test_init_frequencies_monte_carlo():
    cfg = GenConfig()
    n = 10_000
    kinds = {"tri": 0, "quad": 0, "circle": 0, "centered": 0}
    for seed in range(n):
        p = init_scene(cfg, np.random.default_rng(seed))
        if p.circles:
            kinds["circle"] += 1
            kinds["centered"] += p.circles[0].center is not None
        elif len(p.points) == 3:
            kinds["tri"] += 1
        else:
            kinds["quad"] += 1
    assert abs(kinds["tri"] / n - 0.5) < 0.02
    assert abs(kinds["quad"] / n - 0.3) < 0.02
    assert abs(kinds["circle"] / n - 0.2) < 0.02
    assert abs(kinds["centered"] / kinds["circle"] - 0.7) < 0.04


def test_prepare_bare_circle():
    p = GeoProgram(circles=(CircleDecl(None, ()),))
    assert not prepare(OpKind.ORTHOCENTRE, p)
    assert admissible_ops(p) == [OpKind.TWO_POINTS_CONNECT]


def test_prepare_triangle(triangle):
    # every pair is already joined, so only Segment is ruled out
    ops = admissible_ops(triangle)
    assert OpKind.SEGMENT not in ops
    assert len(ops) == 5


def test_prepare_label_pool_exhausted():
    pts = tuple(PointRef.labeled(x) for x in LABELS)
    p = GeoProgram(points=pts, circles=(CircleDecl(None, ()),))
    assert not prepare(OpKind.TWO_POINTS_CONNECT, p)
    assert not prepare(OpKind.POINT_CONNECT_EXISTING, p)


def test_collinear_triple_is_not_a_triangle():
    p = parse_program('A = point(label="A")\nB = point(label="B")\nC = point(label="C")\n'
                      "line_1 = line(through=[A, B, C])")
    assert find_triangles(p) == []


def test_apply_inadmissible_raises():
    with pytest.raises(Inadmissible):
        apply(OpKind.ORTHOCENTRE, GeoProgram(circles=(CircleDecl(None, ()),)), GenConfig(), ScriptedRng())


def test_orthocentre(triangle):
    p, desc = apply(OpKind.ORTHOCENTRE, triangle, GenConfig(), ScriptedRng([0.1]))
    assert len(p.points) == 4 and len(p.lines) == 6
    assert [c.kind for c in p.constraints] == [ConstraintKind.PERPENDICULAR] * 3
    # AH ⟂ BC where BC is line_2 (index 1)
    assert p.constraints[0].args == (3, 1)
    assert desc.created == ("D",)
    assert errors(p) == []


def test_circumcentre(triangle):
    p, _ = apply(OpKind.CIRCUMCENTRE, triangle, GenConfig(), ScriptedRng([0.1]))
    assert len(p.points) == 4
    assert p.circles == (CircleDecl(PointRef.labeled("D"), tuple(PointRef.labeled(x) for x in "ABC")),)
    assert p.constraints == ()


def test_incentre_all_touch_points(triangle):
    p, desc = apply(OpKind.INCENTRE, triangle, GenConfig(), ScriptedRng([0.1, 0.0, 0.0, 0.0]))
    assert len(p.circles) == 1
    assert [c.kind for c in p.constraints] == [ConstraintKind.LINE_CIRCLE_TANGENT] * 3
    assert len(p.points) == 3 + 4
    touch = set(p.circles[0].through)
    assert len(touch) == 3
    for li in range(3):
        assert len(touch & set(p.lines[li].through)) == 1
    assert errors(p) == []


def test_incentre_through_vertices_option(triangle):
    cfg = GenConfig(incircle_through_vertices=True)
    p, _ = apply(OpKind.INCENTRE, triangle, cfg, ScriptedRng([0.9, 0.9, 0.9, 0.9]))
    assert p.circles[0].center is None
    assert p.circles[0].through == triangle.points


def test_segment_and_connect_ops():
    quad = init_scene(GenConfig(), ScriptedRng([0.6]))
    p, _ = apply(OpKind.SEGMENT, quad, GenConfig(), ScriptedRng())
    assert len(p.lines) == 5
    p, desc = apply(OpKind.TWO_POINTS_CONNECT, quad, GenConfig(), ScriptedRng(ints=[0, 0]))
    assert len(p.points) == 6 and len(p.lines) == 5 and len(desc.created) == 2
    assert errors(p) == []
    p, desc = apply(OpKind.POINT_CONNECT_EXISTING, quad, GenConfig(), ScriptedRng())
    assert len(p.points) == 5 and len(p.lines) == 5 and errors(p) == []


def test_extra_steps_zero_is_init_only():
    cfg = GenConfig(extra_steps=0, seed=11)
    assert generate(cfg) == init_scene(cfg, np.random.default_rng(11))


def test_determinism():
    cfg = GenConfig(extra_steps=4, seed=1234)
    assert serialize_program(generate(cfg)) == serialize_program(generate(cfg))


def test_corpus_validates_and_grows_linearly():
    means = []
    for steps in range(6):
        total = 0
        for seed in range(1000 if steps == 3 else 200):
            g = generate_with_trace(GenConfig(extra_steps=steps, seed=seed))
            assert errors(g.program) == [], serialize_program(g.program)
            assert len(g.steps) <= steps
            total += g.program.literal_count
        means.append(total / (1000 if steps == 3 else 200))
    assert all(b > a for a, b in zip(means, means[1:]))
    slope, intercept = np.polyfit(range(6), means, 1)
    resid = np.array(means) - (slope * np.arange(6) + intercept)
    assert np.max(np.abs(resid)) < 0.1 * slope * 5


def test_config_validation_and_json(tmp_path):
    with pytest.raises(ValueError):
        GenConfig(extra_steps=-1)
    with pytest.raises(ValueError):
        GenConfig(init_probs=(0.5, 0.5, 0.5))
    cfg = GenConfig(extra_steps=2, touch_point_prob=0.2)
    path = tmp_path / "g.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert GenConfig.from_json(path) == cfg
