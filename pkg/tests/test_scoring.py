from __future__ import annotations

import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoforge.dsl import (CircleDecl, ConstraintDecl, ConstraintKind, GeoProgram, LineDecl, PointRef,
                          parse_program)
from geoforge.generator import GenConfig, generate
from geoforge.pairgen import corrupt
from geoforge.scoring import (CategoryMismatch, category_f1, constraint_score, element_similarity,
                              optimal_assignment, score, weighted_overall)

A, B, C, D, O = (PointRef.labeled(x) for x in "ABCDO")
PAR, PERP = ConstraintKind.PARALLEL, ConstraintKind.PERPENDICULAR


# ------------------------------------------------------------ oracles

def brute_force_max(s) -> float:
    s = np.asarray(s, dtype=float)
    m, n = s.shape
    if m == 0 or n == 0:
        return 0.0
    if m > n:
        s, m, n = s.T, n, m
    return max(sum(s[i, p[i]] for i in range(m)) for p in itertools.permutations(range(n), m))


def _bf_mass(sim) -> Fraction:
    m = len(sim)
    n = len(sim[0]) if m else 0
    if m == 0 or n == 0:
        return Fraction(0)
    if m <= n:
        return max(sum((sim[i][p[i]] for i in range(m)), Fraction(0)) for p in itertools.permutations(range(n), m))
    return max(sum((sim[p[j]][j] for j in range(n)), Fraction(0)) for p in itertools.permutations(range(m), n))


def _bf_f1(sim, m, n, empty_is_one=False) -> Fraction:
    if empty_is_one and m == 0 and n == 0:
        return Fraction(1)
    s = _bf_mass(sim)
    p = s / n if n else Fraction(0)
    r = s / m if m else Fraction(0)
    return Fraction(0) if p * r == 0 else 2 * p * r / (p + r)


def naive_score(g: GeoProgram, h: GeoProgram) -> Fraction:
    """Direct transcription of the recursive similarity with exhaustive matching."""
    def pt(a, b):
        if a is None or b is None:
            return Fraction(a is None and b is None)
        return Fraction(a.label == b.label)

    def pset(xs, ys):
        return _bf_f1([[pt(x, y) for y in ys] for x in xs], len(xs), len(ys), empty_is_one=True)

    def line(a, b):
        return pset(a.through, b.through)

    def circ(a, b):
        return (pt(a.center, b.center) + pset(a.through, b.through)) / 2

    def cons(a, b):
        if a.kind is not b.kind:
            return Fraction(0)
        (a1, a2), (b1, b2) = a.args, b.args
        if a.kind in (PAR, PERP):
            t = [[line(g.lines[x], h.lines[y]) for y in (b1, b2)] for x in (a1, a2)]
            return _bf_f1(t, 2, 2)
        if a.kind is ConstraintKind.CIRCLE_CIRCLE_TANGENT:
            t = [[circ(g.circles[x], h.circles[y]) for y in (b1, b2)] for x in (a1, a2)]
            return _bf_f1(t, 2, 2)
        if a.kind is ConstraintKind.LINE_CIRCLE_TANGENT:
            return (line(g.lines[a1], h.lines[b1]) + circ(g.circles[a2], h.circles[b2])) / 2
        return max(pset(a1, b1) + pset(a2, b2), pset(a1, b2) + pset(a2, b1)) / 2

    total = Fraction(0)
    for xs, ys, f in ((g.points, h.points, pt), (g.lines, h.lines, line), (g.circles, h.circles, circ),
                      (g.constraints, h.constraints, cons)):
        total += _bf_f1([[f(x, y) for y in ys] for x in xs], len(xs), len(ys)) / 4
    return total


# ------------------------------------------------------------ assignment

def test_assignment_examples():
    assert optimal_assignment([[0.7]]) == ([(0, 0)], 0.7)
    assert optimal_assignment(np.eye(3))[1] == 3.0
    assert optimal_assignment(np.zeros((0, 4))) == ([], 0.0)


def test_assignment_matches_brute_force_rectangular():
    rng = np.random.default_rng(1)
    for _ in range(200):
        s = rng.random((5, 6))
        match, total = optimal_assignment(s)
        assert abs(total - brute_force_max(s)) <= 1e-12
        assert len(match) == 5
        assert len({j for _, j in match}) == 5


def test_assignment_tall_matrix_and_tie_break():
    s = np.ones((3, 2))
    match, total = optimal_assignment(s)
    assert total == 2.0
    assert match == [(0, 0), (1, 1)]
    assert optimal_assignment(np.ones((2, 2)))[0] == [(0, 0), (1, 1)]


# ------------------------------------------------------------ similarities

def test_point_similarity():
    assert element_similarity(A, A, "points") == 1.0
    assert element_similarity(A, B, "points") == 0.0


def test_line_similarity_partial():
    assert element_similarity(LineDecl((A, B, C)), LineDecl((A, B)), "lines") == pytest.approx(0.8, abs=1e-15)


def test_circle_similarity():
    assert element_similarity(CircleDecl(O, (A, B)), CircleDecl(O, (A, B)), "circles") == 1.0
    assert element_similarity(CircleDecl(O, (A, B)), CircleDecl(None, (A, B)), "circles") == 0.5


def test_category_mismatch():
    with pytest.raises(CategoryMismatch):
        element_similarity(A, LineDecl((A, B)), "points")


def test_constraint_scores(full):
    ctx = (full, full)
    perp = full.constraints[0]
    assert constraint_score(perp, perp, ctx) == 1.0
    assert constraint_score(perp, ConstraintDecl(PAR, perp.args), ctx) == 0.0
    assert constraint_score(ConstraintDecl(PERP, perp.args[::-1]), perp, ctx) == 1.0
    e1 = ConstraintDecl(ConstraintKind.EQUAL_DISTANCE, ((A, B), (C, D)))
    e2 = ConstraintDecl(ConstraintKind.EQUAL_DISTANCE, ((C, D), (A, B)))
    assert constraint_score(e1, e2, None) == 1.0
    e3 = ConstraintDecl(ConstraintKind.EQUAL_DISTANCE, ((A, B), (C, O)))
    # pairing (AB,AB)+(CD,CO) = 1 + 1/2
    assert constraint_score(e1, e3, None) == 0.75


def test_category_f1_examples():
    s = category_f1([A, B, C], [A, B, D], "points")
    assert (s.precision, s.recall, s.f1) == (2 / 3, 2 / 3, 2 / 3)
    assert category_f1([A, B], [A, B], "points").f1 == 1.0
    empty = category_f1([A], [], "points")
    assert (empty.precision, empty.recall, empty.f1) == (0.0, 0.0, 0.0)
    both = category_f1([], [], "points")
    assert both.f1 == 0.0 and both.both_empty


def test_weighted_overall_spot_value():
    assert weighted_overall((1, 0.8, 0.5, 0.6)) == 0.725


def test_score_identity_and_empty(full):
    assert score(full, full).overall == 1.0
    assert score(full, GeoProgram()).overall == 0.0


def test_both_empty_categories_count_zero(triangle):
    # no circles and no constraints on either side: only half the weight can be earned
    rep = score(triangle, triangle)
    assert rep.overall == 0.5
    assert rep.both_empty == {"points": False, "lines": False, "circles": True, "constraints": True}


def test_weights_validated(full):
    with pytest.raises(ValueError):
        score(full, full, (0.5, 0.5, 0.5, 0.5))
    rep = score(full, full, (1, 0, 0, 0))
    assert rep.overall == 1.0


def test_report_json_keys(full):
    d = json.loads(score(full, full).to_json())
    assert list(d) == ["overall", "points", "lines", "circles", "constraints", "weights"]
    assert set(d["lines"]) == {"p", "r", "f1"}


def test_score_matches_naive_oracle():
    rng = np.random.default_rng(7)
    checked = 0
    for seed in range(400):
        g = generate(GenConfig(extra_steps=int(seed % 3), seed=seed))
        if max(g.counts().values()) > 6:
            continue
        h = corrupt(g, int(rng.integers(4)), rng)
        if max(h.counts().values()) > 6:
            continue
        assert score(g, h).overall == float(naive_score(g, h))
        assert score(h, g).overall == float(naive_score(h, g))
        checked += 1
    assert checked > 100


def test_relabel_lowers_score(triangle):
    pred = parse_program(
        'Z = point(label="Z")\nB = point(label="B")\nC = point(label="C")\n'
        "line_1 = line(through=[Z, B])\nline_2 = line(through=[B, C])\nline_3 = line(through=[C, Z])"
    )
    rep = score(triangle, pred)
    assert rep.points.f1 == pytest.approx(2 / 3)
    # two lines each keep one of two points, one line is intact
    assert rep.lines.f1 == pytest.approx((1 + 0.5 + 0.5) / 3)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4), st.integers(0, 6))
def test_property_range_and_symmetric_identity(seed, steps, level):
    g = generate(GenConfig(extra_steps=steps, seed=seed))
    h = corrupt(g, level, np.random.default_rng(seed))
    rep = score(g, h)
    for cs in rep.categories.values():
        for v in (cs.precision, cs.recall, cs.f1):
            assert 0.0 <= v <= 1.0
    assert 0.0 <= rep.overall <= 1.0
    # F1 is symmetric in its arguments
    assert score(h, g).overall == rep.overall
