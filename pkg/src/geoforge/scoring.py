"""Program similarity: recursive element similarity, optimal assignment, weighted F1.

Similarities are computed as exact fractions and converted to floats only at
the boundary, so a report does not depend on declaration order down to the
last bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dsl import CircleDecl, ConstraintDecl, ConstraintKind, GeoProgram, LineDecl, PointRef

CATEGORIES = ("points", "lines", "circles", "constraints")
DEFAULT_WEIGHTS = (0.25, 0.25, 0.25, 0.25)

_ZERO = Fraction(0)
_ONE = Fraction(1)
_HALF = Fraction(1, 2)


class CategoryMismatch(TypeError):
    pass


# ------------------------------------------------------------- assignment


def _max_total(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if s.size == 0:
        return np.empty(0, dtype=int), np.empty(0, dtype=int)
    return linear_sum_assignment(s, maximize=True)


def optimal_assignment(s, tol: float = 1e-12) -> tuple[list[tuple[int, int]], float]:
    """Maximum-weight one-to-one matching of a rectangular similarity matrix.

    Every row (or column, whichever is fewer) is matched. Among optimal
    matchings, the one whose (i, j) pairs sorted by row form the
    lexicographically smallest sequence is returned.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2:
        raise ValueError("similarity matrix must be 2-D")
    m, n = s.shape
    if m == 0 or n == 0:
        return [], 0.0
    transposed = m > n
    work = s.T if transposed else s
    rows, cols = _max_total(work)
    best = float(work[rows, cols].sum())

    # Fix rows in order, taking the smallest column that keeps the optimum.
    free_cols = list(range(work.shape[1]))
    fixed: list[tuple[int, int]] = []
    gained = 0.0
    for i in range(work.shape[0]):
        for j in free_cols:
            rest_rows = np.arange(i + 1, work.shape[0])
            rest_cols = np.array([c for c in free_cols if c != j], dtype=int)
            sub = work[np.ix_(rest_rows, rest_cols)]
            r, c = _max_total(sub)
            total = gained + work[i, j] + float(sub[r, c].sum())
            if total >= best - tol:
                fixed.append((i, j))
                gained += float(work[i, j])
                free_cols.remove(j)
                break
    if transposed:
        fixed = sorted((j, i) for i, j in fixed)
    total = float(sum(s[i, j] for i, j in fixed))
    return fixed, total


def _matched_mass(sim: list[list[Fraction]]) -> Fraction:
    m = len(sim)
    n = len(sim[0]) if m else 0
    if m == 0 or n == 0:
        return _ZERO
    arr = np.array([[float(v) for v in row] for row in sim])
    rows, cols = _max_total(arr)
    return sum((sim[i][j] for i, j in zip(rows, cols)), _ZERO)


# -------------------------------------------------------------------- F1


@dataclass(frozen=True)
class CategoryScore:
    precision: float
    recall: float
    f1: float
    matched_mass: float
    m: int
    n: int

    @property
    def both_empty(self) -> bool:
        return self.m == 0 and self.n == 0

    def as_dict(self) -> dict:
        return {"p": self.precision, "r": self.recall, "f1": self.f1}


def _f1_parts(mass: Fraction, m: int, n: int) -> tuple[Fraction, Fraction, Fraction]:
    p = _ZERO if n == 0 else mass / n
    r = _ZERO if m == 0 else mass / m
    if p * r == 0:
        return p, r, _ZERO
    return p, r, 2 * p * r / (p + r)


def _category(sim: list[list[Fraction]], m: int, n: int) -> tuple[CategoryScore, Fraction]:
    mass = _matched_mass(sim)
    p, r, f1 = _f1_parts(mass, m, n)
    return CategoryScore(float(p), float(r), float(f1), float(mass), m, n), f1


# ------------------------------------------------------ element similarity


def _point_sim(a: PointRef | None, b: PointRef | None) -> Fraction:
    if a is None or b is None:
        return _ONE if a is None and b is None else _ZERO
    if a.label is None or b.label is None:
        return _ONE if a.label is None and b.label is None else _ZERO
    return _ONE if a.label == b.label else _ZERO


def _point_set_f1(xs: Sequence[PointRef], ys: Sequence[PointRef]) -> Fraction:
    # Label-indicator matrices have an exact closed-form matched mass.
    if not xs and not ys:
        return _ONE
    xl = {p.label for p in xs if p.label is not None}
    yl = {p.label for p in ys if p.label is not None}
    xa = sum(1 for p in xs if p.label is None)
    ya = sum(1 for p in ys if p.label is None)
    mass = Fraction(len(xl & yl) + min(xa, ya))
    return _f1_parts(mass, len(xs), len(ys))[2]


def _line_sim(a: LineDecl, b: LineDecl) -> Fraction:
    return _point_set_f1(a.through, b.through)


def _circle_sim(a: CircleDecl, b: CircleDecl) -> Fraction:
    return _HALF * (_point_sim(a.center, b.center) + _point_set_f1(a.through, b.through))


def _pair_f1(sim: list[list[Fraction]]) -> Fraction:
    return _f1_parts(_matched_mass(sim), len(sim), len(sim[0]))[2]


class _Context:
    """Caches line and circle similarity tables for one (truth, prediction) pair."""

    def __init__(self, truth: GeoProgram, pred: GeoProgram):
        self.truth = truth
        self.pred = pred
        self.lines = [[_line_sim(a, b) for b in pred.lines] for a in truth.lines]
        self.circles = [[_circle_sim(a, b) for b in pred.circles] for a in truth.circles]

    def constraint(self, a: ConstraintDecl, b: ConstraintDecl) -> Fraction:
        if a.kind is not b.kind:
            return _ZERO
        (a1, a2), (b1, b2) = a.args, b.args
        kind = a.kind
        if kind in (ConstraintKind.PARALLEL, ConstraintKind.PERPENDICULAR):
            t = self.lines
            return _pair_f1([[t[a1][b1], t[a1][b2]], [t[a2][b1], t[a2][b2]]])
        if kind is ConstraintKind.CIRCLE_CIRCLE_TANGENT:
            t = self.circles
            return _pair_f1([[t[a1][b1], t[a1][b2]], [t[a2][b1], t[a2][b2]]])
        if kind is ConstraintKind.LINE_CIRCLE_TANGENT:
            return _HALF * (self.lines[a1][b1] + self.circles[a2][b2])
        straight = _point_set_f1(a1, b1) + _point_set_f1(a2, b2)
        crossed = _point_set_f1(a1, b2) + _point_set_f1(a2, b1)
        return _HALF * max(straight, crossed)


def element_similarity(a, b, category: str, ctx: tuple[GeoProgram, GeoProgram] | None = None) -> float:
    """Similarity of two elements of one category, in [0, 1].

    Constraints reference lines/circles by index, so comparing them needs
    ``ctx = (program_of_a, program_of_b)``.
    """
    if category == "points":
        if not (isinstance(a, PointRef) and isinstance(b, PointRef)):
            raise CategoryMismatch("points category expects two PointRef")
        return float(_point_sim(a, b))
    if category == "lines":
        if not (isinstance(a, LineDecl) and isinstance(b, LineDecl)):
            raise CategoryMismatch("lines category expects two LineDecl")
        return float(_line_sim(a, b))
    if category == "circles":
        if not (isinstance(a, CircleDecl) and isinstance(b, CircleDecl)):
            raise CategoryMismatch("circles category expects two CircleDecl")
        return float(_circle_sim(a, b))
    if category == "constraints":
        if not (isinstance(a, ConstraintDecl) and isinstance(b, ConstraintDecl)):
            raise CategoryMismatch("constraints category expects two ConstraintDecl")
        return constraint_score(a, b, ctx)
    raise CategoryMismatch(f"unknown category {category!r}")


def constraint_score(a: ConstraintDecl, b: ConstraintDecl, ctx: tuple[GeoProgram, GeoProgram] | None) -> float:
    if a.kind is not b.kind:
        return 0.0
    if ctx is None:
        if a.kind is not ConstraintKind.EQUAL_DISTANCE:
            raise ValueError("line/circle constraints need the owning programs as ctx")
        ctx = (GeoProgram(), GeoProgram())
    return float(_Context(*ctx).constraint(a, b))


def category_f1(truth: Sequence, pred: Sequence, category: str,
                ctx: tuple[GeoProgram, GeoProgram] | None = None) -> CategoryScore:
    """Per-category precision/recall/F1 from the optimal matching."""
    if category == "constraints":
        c = _Context(*ctx) if ctx is not None else None
        if c is None and any(x.kind is not ConstraintKind.EQUAL_DISTANCE for x in [*truth, *pred]):
            raise ValueError("line/circle constraints need the owning programs as ctx")
        c = c or _Context(GeoProgram(), GeoProgram())
        sim = [[c.constraint(a, b) for b in pred] for a in truth]
    else:
        fn = {"points": _point_sim, "lines": _line_sim, "circles": _circle_sim}[category]
        sim = [[fn(a, b) for b in pred] for a in truth]
    return _category(sim, len(truth), len(pred))[0]


# ------------------------------------------------------------------ score


@dataclass(frozen=True)
class ScoreReport:
    points: CategoryScore
    lines: CategoryScore
    circles: CategoryScore
    constraints: CategoryScore
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS
    overall: float = 0.0

    @property
    def categories(self) -> dict[str, CategoryScore]:
        return {"points": self.points, "lines": self.lines, "circles": self.circles, "constraints": self.constraints}

    @property
    def both_empty(self) -> dict[str, bool]:
        return {k: v.both_empty for k, v in self.categories.items()}

    def as_dict(self) -> dict:
        d: dict = {"overall": self.overall}
        for k, v in self.categories.items():
            d[k] = v.as_dict()
        d["weights"] = dict(zip(CATEGORIES, self.weights))
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


def weighted_overall(f1s: Sequence[float], weights: Sequence[float] = DEFAULT_WEIGHTS) -> float:
    return float(sum((Fraction(w) * Fraction(f) for w, f in zip(weights, f1s)), _ZERO))


def score(truth: GeoProgram, pred: GeoProgram, weights: Sequence[float] = DEFAULT_WEIGHTS) -> ScoreReport:
    weights = tuple(float(w) for w in weights)
    if len(weights) != 4 or any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("need four non-negative weights summing to 1")
    ctx = _Context(truth, pred)
    results = []
    sims = (
        [[_point_sim(a, b) for b in pred.points] for a in truth.points],
        ctx.lines,
        ctx.circles,
        [[ctx.constraint(a, b) for b in pred.constraints] for a in truth.constraints],
    )
    exact = []
    for sim, cat in zip(sims, CATEGORIES):
        m, n = len(getattr(truth, cat)), len(getattr(pred, cat))
        cs, f1 = _category(sim, m, n)
        results.append(cs)
        exact.append(f1)
    overall = float(sum((Fraction(w) * f for w, f in zip(weights, exact)), _ZERO))
    return ScoreReport(*results, weights=weights, overall=overall)
