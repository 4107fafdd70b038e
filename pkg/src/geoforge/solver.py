"""Numeric instantiation of GeoDSL programs by gradient descent.

Every primitive gets free parameters: points (x, y), lines (a, b, c) with
a*x + b*y + c = 0, circles (cx, cy, s) with radius softplus(s). Incidences
and explicit constraints become squared-residual loss terms. Layout
penalties keep the picture readable. Their weighted sum is minimized with
Adam until all hard terms drop below ``eps`` or the iteration budget runs
out.

The term evaluation and the optimizer loop are compiled with numba.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np
from numba import njit

from .dsl import ConstraintKind, GeoProgram


class TermKind(enum.IntEnum):
    POINT_LINE = 0
    LINE_NORM = 1
    POINT_CIRCLE = 2
    FIXED_CENTER = 3
    EQUAL_LENGTH = 4
    PERPENDICULAR = 5
    PARALLEL = 6
    LINE_CIRCLE_TANGENT = 7
    CIRCLE_CIRCLE_TANGENT = 8
    PRESCRIBED_LENGTH = 9
    PRESCRIBED_ANGLE = 10
    DENSITY = 11
    SPREAD = 12
    SCALE = 13
    BOUNDARY = 14

    @property
    def hard(self) -> bool:
        return self < TermKind.DENSITY


# numba sees these as compile-time constants
_PL, _NORM, _PC, _CENTER, _EQ, _PERP, _PAR, _TLC, _TCC, _LEN, _ANG, _DENS, _SPREAD, _SCALE, _BOUND = range(15)
_FIRST_SOFT = 11
_ABS_DELTA = 1e-8
_COS_CLAMP = 1e-7


class DegenerateArm(ValueError):
    pass


@dataclass
class SolveConfig:
    max_iters: int = 10_000
    lr_initial: float = 0.05
    lr_decay_factor: float = 0.5
    lr_decay_every: int = 2_000
    eps: float = 1e-6
    penalty_weight: float = 0.1
    density_tau: float = 0.15
    spread_rho: float = 0.8
    min_distance: float = 0.05
    constraint_weight: float = 1.0
    density_weight: float = 1.0
    spread_weight: float = 1.0
    scale_weight: float = 1.0
    boundary_weight: float = 1.0
    point_init: float = 0.8
    line_offset_init: float = 0.5
    center_init: float = 0.5
    radius_init: tuple[float, float] = (0.2, 0.6)
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        self.radius_init = tuple(float(r) for r in self.radius_init)
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for name in ("eps", "density_tau", "spread_rho", "lr_initial", "penalty_weight"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.restarts < 0 or self.lr_decay_every < 1:
            raise ValueError("restarts must be >= 0 and lr_decay_every >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SolveConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown solver options: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radius_init"] = list(self.radius_init)
        return d


# ----------------------------------------------------------------- params


def softplus(s: float) -> float:
    return max(s, 0.0) + math.log1p(math.exp(-abs(s)))


def inverse_softplus(r: float) -> float:
    return r + math.log(-math.expm1(-r))


@dataclass
class SceneParams:
    """Flat optimizer vector plus the counts needed to slice it.

    Circle radii are stored as softplus pre-images; use ``circles`` for
    (cx, cy, r).
    """

    n_points: int
    n_lines: int
    n_circles: int
    vector: np.ndarray

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if self.vector.shape != (self.size(self.n_points, self.n_lines, self.n_circles),):
            raise ValueError("parameter vector length does not match the program")

    @staticmethod
    def size(n_points: int, n_lines: int, n_circles: int) -> int:
        return 2 * n_points + 3 * n_lines + 3 * n_circles

    @classmethod
    def for_program(cls, program: GeoProgram, vector=None) -> "SceneParams":
        n = (len(program.points), len(program.lines), len(program.circles))
        if vector is None:
            vector = np.zeros(cls.size(*n))
        return cls(*n, vector)

    def point_offset(self, i: int) -> int:
        return 2 * i

    def line_offset(self, j: int) -> int:
        return 2 * self.n_points + 3 * j

    def circle_offset(self, k: int) -> int:
        return 2 * self.n_points + 3 * self.n_lines + 3 * k

    @property
    def points(self) -> np.ndarray:
        return self.vector[: 2 * self.n_points].reshape(-1, 2)

    @property
    def lines(self) -> np.ndarray:
        o = 2 * self.n_points
        return self.vector[o: o + 3 * self.n_lines].reshape(-1, 3)

    @property
    def circles(self) -> np.ndarray:
        o = 2 * self.n_points + 3 * self.n_lines
        raw = self.vector[o: o + 3 * self.n_circles].reshape(-1, 3).copy()
        raw[:, 2] = [softplus(s) for s in raw[:, 2]]
        return raw

    def set_radius(self, k: int, r: float) -> None:
        self.vector[self.circle_offset(k) + 2] = inverse_softplus(r)


# ----------------------------------------------------------------- terms


@dataclass(frozen=True)
class LossTerm:
    """One loss or penalty.

    ``refs`` are primitive indices whose meaning depends on ``kind``:
    point/line/circle indices in the order the formula reads them.
    Global penalties (spread, scale, boundary) read every point and circle
    and carry no refs. ``weight`` already includes the penalty factor.
    """

    kind: TermKind
    weight: float
    refs: tuple[int, ...] = ()
    const: float = 0.0
    name: str = ""

    @property
    def hard(self) -> bool:
        return self.kind.hard


_REF_TYPES = {
    TermKind.POINT_LINE: "pl",
    TermKind.LINE_NORM: "l",
    TermKind.POINT_CIRCLE: "pc",
    TermKind.FIXED_CENTER: "cp",
    TermKind.EQUAL_LENGTH: "pppp",
    TermKind.PERPENDICULAR: "ll",
    TermKind.PARALLEL: "ll",
    TermKind.LINE_CIRCLE_TANGENT: "lc",
    TermKind.CIRCLE_CIRCLE_TANGENT: "cc",
    TermKind.PRESCRIBED_LENGTH: "pp",
    TermKind.PRESCRIBED_ANGLE: "ppp",
    TermKind.DENSITY: "pp",
    TermKind.SPREAD: "",
    TermKind.SCALE: "",
    TermKind.BOUNDARY: "",
}


def build_losses(program: GeoProgram, cfg: SolveConfig | None = None) -> list[LossTerm]:
    cfg = cfg or SolveConfig()
    w = cfg.constraint_weight
    lam = cfg.penalty_weight
    idx = program.point_index()
    names = [p.name for p in program.points]
    terms: list[LossTerm] = []

    for j, line in enumerate(program.lines):
        for p in dict.fromkeys(line.through):
            terms.append(LossTerm(TermKind.POINT_LINE, w, (idx[p], j), name=f"on_line({p.name},line_{j + 1})"))
    for j in range(len(program.lines)):
        terms.append(LossTerm(TermKind.LINE_NORM, w, (j,), name=f"norm(line_{j + 1})"))
    for k, circle in enumerate(program.circles):
        for p in dict.fromkeys(circle.through):
            terms.append(LossTerm(TermKind.POINT_CIRCLE, w, (idx[p], k), name=f"on_circle({p.name},circle_{k + 1})"))
        if circle.center is not None:
            terms.append(LossTerm(TermKind.FIXED_CENTER, w, (k, idx[circle.center]),
                                  name=f"center(circle_{k + 1},{circle.center.name})"))

    for n, c in enumerate(program.constraints):
        a, b = c.args
        if c.kind is ConstraintKind.PERPENDICULAR:
            terms.append(LossTerm(TermKind.PERPENDICULAR, w, (a, b), name=f"perpendicular(line_{a + 1},line_{b + 1})"))
        elif c.kind is ConstraintKind.PARALLEL:
            terms.append(LossTerm(TermKind.PARALLEL, w, (a, b), name=f"parallel(line_{a + 1},line_{b + 1})"))
        elif c.kind is ConstraintKind.LINE_CIRCLE_TANGENT:
            terms.append(LossTerm(TermKind.LINE_CIRCLE_TANGENT, w, (a, b),
                                  name=f"tangent(line_{a + 1},circle_{b + 1})"))
        elif c.kind is ConstraintKind.CIRCLE_CIRCLE_TANGENT:
            terms.append(LossTerm(TermKind.CIRCLE_CIRCLE_TANGENT, w, (a, b),
                                  name=f"tangent(circle_{a + 1},circle_{b + 1})"))
        else:
            refs = (idx[a[0]], idx[a[1]], idx[b[0]], idx[b[1]])
            label = ",".join(names[r] for r in refs)
            terms.append(LossTerm(TermKind.EQUAL_LENGTH, w, refs, name=f"equal({label})"))

    n_pts = len(program.points)
    for i in range(n_pts):
        for j in range(i + 1, n_pts):
            terms.append(LossTerm(TermKind.DENSITY, lam * cfg.density_weight, (i, j),
                                  cfg.density_tau, name=f"density({names[i]},{names[j]})"))
    if n_pts:
        terms.append(LossTerm(TermKind.SPREAD, lam * cfg.spread_weight, (), cfg.spread_rho, name="spread"))
    if n_pts >= 2:
        terms.append(LossTerm(TermKind.SCALE, lam * cfg.scale_weight, (), cfg.min_distance, name="scale"))
    if n_pts or program.circles:
        terms.append(LossTerm(TermKind.BOUNDARY, lam * cfg.boundary_weight, (), name="boundary"))

    seen: dict[str, int] = {}
    out = []
    for t in terms:
        if t.name in seen:
            seen[t.name] += 1
            t = LossTerm(t.kind, t.weight, t.refs, t.const, f"{t.name}#{seen[t.name]}")
        else:
            seen[t.name] = 1
        out.append(t)
    return out


def prescribed_length_term(p1: int, p2: int, length: float, weight: float = 1.0) -> LossTerm:
    return LossTerm(TermKind.PRESCRIBED_LENGTH, weight, (p1, p2), length, name=f"length({p1},{p2})")


def prescribed_angle_term(vertex: int, p1: int, p2: int, theta: float, weight: float = 1.0) -> LossTerm:
    return LossTerm(TermKind.PRESCRIBED_ANGLE, weight, (vertex, p1, p2), theta, name=f"angle({p1},{vertex},{p2})")


def prescribed_length_loss(p1, p2, length: float) -> float:
    d = math.dist(p1, p2)
    return (d - length) ** 2


def prescribed_angle_loss(vertex, p1, p2, theta: float) -> float:
    u = np.subtract(p1, vertex, dtype=float)
    v = np.subtract(p2, vertex, dtype=float)
    nu, nv = float(np.hypot(*u)), float(np.hypot(*v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateArm("angle arm has zero length")
    cos = min(max(float(u @ v) / (nu * nv), -1.0 + _COS_CLAMP), 1.0 - _COS_CLAMP)
    return (math.acos(cos) - theta) ** 2


# --------------------------------------------------------------- compile


@dataclass
class Problem:
    """Terms packed into arrays for the compiled kernel."""

    terms: list[LossTerm]
    kinds: np.ndarray
    refs: np.ndarray
    consts: np.ndarray
    weights: np.ndarray
    point_offsets: np.ndarray
    circle_offsets: np.ndarray
    n_params: int

    @classmethod
    def compile(cls, terms: Sequence[LossTerm], params: SceneParams) -> "Problem":
        refs = np.full((len(terms), 4), -1, dtype=np.int64)
        for t, term in enumerate(terms):
            types = _REF_TYPES[term.kind]
            if len(term.refs) != len(types):
                raise ValueError(f"{term.kind.name} expects {len(types)} refs, got {len(term.refs)}")
            for s, (typ, r) in enumerate(zip(types, term.refs)):
                bound = {"p": params.n_points, "l": params.n_lines, "c": params.n_circles}[typ]
                if not 0 <= r < bound:
                    raise IndexError(f"{term.name or term.kind.name}: reference {r} out of range")
                off = {"p": params.point_offset, "l": params.line_offset, "c": params.circle_offset}[typ]
                refs[t, s] = off(r)
        return cls(
            list(terms),
            np.array([int(t.kind) for t in terms], dtype=np.int64),
            refs,
            np.array([t.const for t in terms], dtype=np.float64),
            np.array([t.weight for t in terms], dtype=np.float64),
            np.array([params.point_offset(i) for i in range(params.n_points)], dtype=np.int64),
            np.array([params.circle_offset(k) for k in range(params.n_circles)], dtype=np.int64),
            params.vector.size,
        )

    def evaluate(self, x: np.ndarray, want_grad: bool = True):
        vals = np.zeros(len(self.terms))
        checks = np.zeros(len(self.terms))
        grad = np.zeros(self.n_params)
        total = _evaluate(np.asarray(x, dtype=np.float64), self.kinds, self.refs, self.consts, self.weights,
                          self.point_offsets, self.circle_offsets, vals, checks, grad, want_grad)
        return total, vals, checks, grad


def eval_objective(terms: Sequence[LossTerm], params: SceneParams) -> tuple[float, np.ndarray]:
    """Weighted total and the raw (unweighted) value of each term."""
    total, vals, _, _ = Problem.compile(terms, params).evaluate(params.vector, want_grad=False)
    return total, vals


def gradient(terms: Sequence[LossTerm], params: SceneParams) -> np.ndarray:
    """Analytic gradient of the weighted total w.r.t. ``params.vector``."""
    return Problem.compile(terms, params).evaluate(params.vector)[3]


# ------------------------------------------------------------------ kernel


@njit(cache=True)
def _softplus(s):
    if s > 0.0:
        return s + math.log1p(math.exp(-s))
    return math.log1p(math.exp(s))


@njit(cache=True)
def _sigmoid(s):
    if s >= 0.0:
        return 1.0 / (1.0 + math.exp(-s))
    e = math.exp(s)
    return e / (1.0 + e)


@njit(cache=True)
def _evaluate(x, kinds, refs, consts, weights, pts, circs, vals, checks, grad, want_grad):
    """Fill raw term values, scale-free check values and the gradient.

    ``checks`` holds the residual used for the stopping test: identical to
    the raw value except for terms whose raw form depends on the line
    normal's length, which are divided by the squared normal length(s).
    """
    if want_grad:
        grad[:] = 0.0
    total = 0.0
    n_terms = kinds.shape[0]
    for t in range(n_terms):
        k = kinds[t]
        w = weights[t]
        v = 0.0
        chk = 0.0
        if k == _PL:
            p = refs[t, 0]
            l = refs[t, 1]
            px = x[p]
            py = x[p + 1]
            a = x[l]
            b = x[l + 1]
            c = x[l + 2]
            u = a * px + b * py + c
            v = u * u
            n2 = a * a + b * b
            chk = v / n2 if n2 > 0.0 else np.inf
            if want_grad:
                g = 2.0 * w * u
                grad[p] += g * a
                grad[p + 1] += g * b
                grad[l] += g * px
                grad[l + 1] += g * py
                grad[l + 2] += g
        elif k == _NORM:
            l = refs[t, 0]
            a = x[l]
            b = x[l + 1]
            nn = math.sqrt(a * a + b * b)
            e = nn - 1.0
            v = e * e
            chk = v
            if want_grad and nn > 0.0:
                g = 2.0 * w * e / nn
                grad[l] += g * a
                grad[l + 1] += g * b
        elif k == _PC:
            p = refs[t, 0]
            c = refs[t, 1]
            dx = x[p] - x[c]
            dy = x[p + 1] - x[c + 1]
            d = math.sqrt(dx * dx + dy * dy)
            r = _softplus(x[c + 2])
            e = d - r
            v = e * e
            chk = v
            if want_grad:
                g = 2.0 * w * e
                if d > 0.0:
                    grad[p] += g * dx / d
                    grad[p + 1] += g * dy / d
                    grad[c] -= g * dx / d
                    grad[c + 1] -= g * dy / d
                grad[c + 2] -= g * _sigmoid(x[c + 2])
        elif k == _CENTER:
            c = refs[t, 0]
            p = refs[t, 1]
            dx = x[c] - x[p]
            dy = x[c + 1] - x[p + 1]
            v = dx * dx + dy * dy
            chk = v
            if want_grad:
                grad[c] += 2.0 * w * dx
                grad[c + 1] += 2.0 * w * dy
                grad[p] -= 2.0 * w * dx
                grad[p + 1] -= 2.0 * w * dy
        elif k == _EQ or k == _LEN:
            p1 = refs[t, 0]
            p2 = refs[t, 1]
            ax = x[p1] - x[p2]
            ay = x[p1 + 1] - x[p2 + 1]
            d1 = math.sqrt(ax * ax + ay * ay)
            if k == _EQ:
                p3 = refs[t, 2]
                p4 = refs[t, 3]
                bx = x[p3] - x[p4]
                by = x[p3 + 1] - x[p4 + 1]
                d2 = math.sqrt(bx * bx + by * by)
            else:
                d2 = consts[t]
            e = d1 - d2
            v = e * e
            chk = v
            if want_grad:
                g = 2.0 * w * e
                if d1 > 0.0:
                    grad[p1] += g * ax / d1
                    grad[p1 + 1] += g * ay / d1
                    grad[p2] -= g * ax / d1
                    grad[p2 + 1] -= g * ay / d1
                if k == _EQ and d2 > 0.0:
                    grad[p3] -= g * bx / d2
                    grad[p3 + 1] -= g * by / d2
                    grad[p4] += g * bx / d2
                    grad[p4 + 1] += g * by / d2
        elif k == _PERP or k == _PAR:
            l1 = refs[t, 0]
            l2 = refs[t, 1]
            a1 = x[l1]
            b1 = x[l1 + 1]
            a2 = x[l2]
            b2 = x[l2 + 1]
            if k == _PERP:
                u = a1 * a2 + b1 * b2
            else:
                u = a1 * b2 - a2 * b1
            v = u * u
            n = (a1 * a1 + b1 * b1) * (a2 * a2 + b2 * b2)
            chk = v / n if n > 0.0 else np.inf
            if want_grad:
                g = 2.0 * w * u
                if k == _PERP:
                    grad[l1] += g * a2
                    grad[l1 + 1] += g * b2
                    grad[l2] += g * a1
                    grad[l2 + 1] += g * b1
                else:
                    grad[l1] += g * b2
                    grad[l1 + 1] -= g * a2
                    grad[l2] -= g * b1
                    grad[l2 + 1] += g * a1
        elif k == _TLC:
            l = refs[t, 0]
            c = refs[t, 1]
            a = x[l]
            b = x[l + 1]
            cc = x[l + 2]
            cx = x[c]
            cy = x[c + 1]
            r = _softplus(x[c + 2])
            u = a * cx + b * cy + cc
            su = math.sqrt(u * u + _ABS_DELTA * _ABS_DELTA)
            n2 = a * a + b * b
            nn = math.sqrt(n2)
            dist = su / nn
            e = dist - r
            v = e * e
            chk = v
            if want_grad:
                g = 2.0 * w * e
                dsu = u / su
                # d dist / d(a, b, c, cx, cy)
                grad[l] += g * (dsu * cx / nn - su * a / (nn * n2))
                grad[l + 1] += g * (dsu * cy / nn - su * b / (nn * n2))
                grad[l + 2] += g * dsu / nn
                grad[c] += g * dsu * a / nn
                grad[c + 1] += g * dsu * b / nn
                grad[c + 2] -= g * _sigmoid(x[c + 2])
        elif k == _TCC:
            c1 = refs[t, 0]
            c2 = refs[t, 1]
            dx = x[c1] - x[c2]
            dy = x[c1 + 1] - x[c2 + 1]
            d = math.sqrt(dx * dx + dy * dy)
            e = d - _softplus(x[c1 + 2]) - _softplus(x[c2 + 2])
            v = e * e
            chk = v
            if want_grad:
                g = 2.0 * w * e
                if d > 0.0:
                    grad[c1] += g * dx / d
                    grad[c1 + 1] += g * dy / d
                    grad[c2] -= g * dx / d
                    grad[c2 + 1] -= g * dy / d
                grad[c1 + 2] -= g * _sigmoid(x[c1 + 2])
                grad[c2 + 2] -= g * _sigmoid(x[c2 + 2])
        elif k == _ANG:
            q = refs[t, 0]
            p1 = refs[t, 1]
            p2 = refs[t, 2]
            ux = x[p1] - x[q]
            uy = x[p1 + 1] - x[q + 1]
            wx = x[p2] - x[q]
            wy = x[p2 + 1] - x[q + 1]
            nu = math.sqrt(ux * ux + uy * uy)
            nw = math.sqrt(wx * wx + wy * wy)
            if nu == 0.0 or nw == 0.0:
                v = np.inf
                chk = v
            else:
                cs = (ux * wx + uy * wy) / (nu * nw)
                clamped = False
                if cs > 1.0 - _COS_CLAMP:
                    cs = 1.0 - _COS_CLAMP
                    clamped = True
                elif cs < -1.0 + _COS_CLAMP:
                    cs = -1.0 + _COS_CLAMP
                    clamped = True
                e = math.acos(cs) - consts[t]
                v = e * e
                chk = v
                if want_grad and not clamped:
                    g = 2.0 * w * e * (-1.0 / math.sqrt(1.0 - cs * cs))
                    dux = wx / (nu * nw) - cs * ux / (nu * nu)
                    duy = wy / (nu * nw) - cs * uy / (nu * nu)
                    dwx = ux / (nu * nw) - cs * wx / (nw * nw)
                    dwy = uy / (nu * nw) - cs * wy / (nw * nw)
                    grad[p1] += g * dux
                    grad[p1 + 1] += g * duy
                    grad[p2] += g * dwx
                    grad[p2 + 1] += g * dwy
                    grad[q] -= g * (dux + dwx)
                    grad[q + 1] -= g * (duy + dwy)
        elif k == _DENS:
            p1 = refs[t, 0]
            p2 = refs[t, 1]
            tau = consts[t]
            dx = x[p1] - x[p2]
            dy = x[p1 + 1] - x[p2 + 1]
            d2 = dx * dx + dy * dy
            if d2 < tau * tau:
                d2 = max(d2, 1e-24)
                v = 1.0 / d2 - 1.0 / (tau * tau)
                if want_grad:
                    g = -2.0 * w / (d2 * d2)
                    grad[p1] += g * dx
                    grad[p1 + 1] += g * dy
                    grad[p2] -= g * dx
                    grad[p2 + 1] -= g * dy
            chk = v
        elif k == _SPREAD:
            rho = consts[t]
            n = pts.shape[0]
            mx = 0.0
            my = 0.0
            for i in range(n):
                mx += x[pts[i]]
                my += x[pts[i] + 1]
            mx /= n
            my /= n
            sgx = 0.0
            sgy = 0.0
            for i in range(n):
                dx = x[pts[i]] - mx
                dy = x[pts[i] + 1] - my
                d = math.sqrt(dx * dx + dy * dy)
                e = d - rho
                if e > 0.0:
                    v += e * e
                    if want_grad:
                        gx = 2.0 * w * e * dx / d
                        gy = 2.0 * w * e * dy / d
                        grad[pts[i]] += gx
                        grad[pts[i] + 1] += gy
                        sgx += gx
                        sgy += gy
            if want_grad:
                for i in range(n):
                    grad[pts[i]] -= sgx / n
                    grad[pts[i] + 1] -= sgy / n
            chk = v
        elif k == _SCALE:
            n = pts.shape[0]
            best = np.inf
            bi = -1
            bj = -1
            for i in range(n):
                for j in range(i + 1, n):
                    dx = x[pts[i]] - x[pts[j]]
                    dy = x[pts[i] + 1] - x[pts[j] + 1]
                    d2 = dx * dx + dy * dy
                    if d2 < best:
                        best = d2
                        bi = pts[i]
                        bj = pts[j]
            if bi >= 0:
                d = math.sqrt(best)
                e = consts[t] - d
                if e > 0.0:
                    v = e * e
                    if want_grad and d > 0.0:
                        g = -2.0 * w * e / d
                        dx = x[bi] - x[bj]
                        dy = x[bi + 1] - x[bj + 1]
                        grad[bi] += g * dx
                        grad[bi + 1] += g * dy
                        grad[bj] -= g * dx
                        grad[bj + 1] -= g * dy
            chk = v
        elif k == _BOUND:
            for i in range(pts.shape[0]):
                for s in range(2):
                    q = x[pts[i] + s]
                    e = abs(q) - 1.0
                    if e > 0.0:
                        v += e * e
                        if want_grad:
                            grad[pts[i] + s] += 2.0 * w * e * (1.0 if q > 0.0 else -1.0)
            for i in range(circs.shape[0]):
                c = circs[i]
                r = _softplus(x[c + 2])
                for s in range(2):
                    q = x[c + s]
                    e = abs(q) + r - 1.0
                    if e > 0.0:
                        v += e * e
                        if want_grad:
                            grad[c + s] += 2.0 * w * e * (1.0 if q > 0.0 else -1.0)
                            grad[c + 2] += 2.0 * w * e * _sigmoid(x[c + 2])
            chk = v
        vals[t] = v
        checks[t] = chk
        total += w * v
    return total


@njit(cache=True)
def _hard_ok(kinds, vals, checks, eps):
    for t in range(kinds.shape[0]):
        if kinds[t] < _FIRST_SOFT and (vals[t] > eps or checks[t] > eps):
            return False
    return True


@njit(cache=True)
def _adam(x, kinds, refs, consts, weights, pts, circs, max_iters, lr0, decay, every, eps, history):
    n = x.shape[0]
    m = np.zeros(n)
    s = np.zeros(n)
    grad = np.zeros(n)
    vals = np.zeros(kinds.shape[0])
    checks = np.zeros(kinds.shape[0])
    beta1 = 0.9
    beta2 = 0.999
    b1t = 1.0
    b2t = 1.0
    for it in range(max_iters):
        total = _evaluate(x, kinds, refs, consts, weights, pts, circs, vals, checks, grad, True)
        history[it] = total
        if _hard_ok(kinds, vals, checks, eps):
            return it, True
        lr = lr0 * decay ** (it // every)
        b1t *= beta1
        b2t *= beta2
        for i in range(n):
            gi = grad[i]
            if not np.isfinite(gi):
                gi = 0.0
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi
            s[i] = beta2 * s[i] + (1.0 - beta2) * gi * gi
            x[i] -= lr * (m[i] / (1.0 - b1t)) / (math.sqrt(s[i] / (1.0 - b2t)) + 1e-8)
    _evaluate(x, kinds, refs, consts, weights, pts, circs, vals, checks, grad, False)
    return max_iters, _hard_ok(kinds, vals, checks, eps)


# ------------------------------------------------------------------- solve


class Status(str, enum.Enum):
    SOLVED = "Solved"
    UNSOLVABLE = "Unsolvable"


@dataclass
class SolveResult:
    status: Status
    params: SceneParams
    losses: dict[str, float]
    iterations: int
    attempts: int = 1
    point_names: list[str] = field(default_factory=list)
    history: np.ndarray | None = None

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLVED

    def as_dict(self) -> dict:
        return {
            "status": self.status.value,
            "points": {n: [float(v) for v in xy] for n, xy in zip(self.point_names, self.params.points)},
            "lines": {f"line_{j + 1}": [float(v) for v in abc] for j, abc in enumerate(self.params.lines)},
            "circles": {f"circle_{k + 1}": [float(v) for v in c] for k, c in enumerate(self.params.circles)},
            "losses": {k: float(v) for k, v in self.losses.items()},
            "iterations": self.iterations,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "SolveResult":
        pts = data["points"]
        lines = data["lines"]
        circles = data["circles"]
        vec = [v for xy in pts.values() for v in xy] + [v for abc in lines.values() for v in abc]
        for cx, cy, r in circles.values():
            vec += [cx, cy, inverse_softplus(r)]
        params = SceneParams(len(pts), len(lines), len(circles), np.array(vec, dtype=float))
        return cls(Status(data["status"]), params, dict(data.get("losses", {})), int(data["iterations"]),
                   point_names=list(pts))


def initial_params(program: GeoProgram, cfg: SolveConfig, rng: np.random.Generator) -> SceneParams:
    params = SceneParams.for_program(program)
    nP, nL, nC = params.n_points, params.n_lines, params.n_circles
    params.vector[: 2 * nP] = rng.uniform(-cfg.point_init, cfg.point_init, 2 * nP)
    for j in range(nL):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        o = params.line_offset(j)
        params.vector[o: o + 3] = (math.cos(theta), math.sin(theta),
                                   rng.uniform(-cfg.line_offset_init, cfg.line_offset_init))
    for k in range(nC):
        o = params.circle_offset(k)
        params.vector[o: o + 2] = rng.uniform(-cfg.center_init, cfg.center_init, 2)
        params.set_radius(k, rng.uniform(*cfg.radius_init))
    return params


def solve(program: GeoProgram, cfg: SolveConfig | None = None, record_history: bool = False) -> SolveResult:
    """Optimize until every hard term is <= eps, restarting from fresh random
    starts up to ``cfg.restarts`` times before giving up."""
    cfg = cfg or SolveConfig()
    terms = build_losses(program, cfg)
    template = SceneParams.for_program(program)
    problem = Problem.compile(terms, template)
    names = [p.name for p in program.points]
    iters_total = 0
    result = None
    for attempt in range(cfg.restarts + 1):
        rng = np.random.default_rng([cfg.seed, attempt])
        params = initial_params(program, cfg, rng)
        history = np.zeros(cfg.max_iters)
        iters, ok = _adam(params.vector, problem.kinds, problem.refs, problem.consts, problem.weights,
                          problem.point_offsets, problem.circle_offsets, cfg.max_iters, cfg.lr_initial,
                          cfg.lr_decay_factor, cfg.lr_decay_every, cfg.eps, history)
        iters_total += iters
        _, vals, _, _ = problem.evaluate(params.vector, want_grad=False)
        result = SolveResult(
            Status.SOLVED if ok else Status.UNSOLVABLE,
            params,
            {t.name: float(v) for t, v in zip(terms, vals)},
            int(iters),
            attempt + 1,
            names,
            history[:iters].copy() if record_history else None,
        )
        if ok:
            break
    return result
