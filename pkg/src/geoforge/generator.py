"""Procedural GeoDSL program sampler.

Generation seeds the scene with one primitive (triangle, quadrilateral or
circle) and then runs ``extra_steps`` construction steps. Each step keeps
the operation kinds whose preconditions hold on the current scene, picks one
uniformly, and applies it with its concrete arguments drawn uniformly from
the admissible choices.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .dsl import LABELS, CircleDecl, ConstraintDecl, ConstraintKind, GeoProgram, LineDecl, PointRef


class Inadmissible(RuntimeError):
    pass


class OpKind(enum.Enum):
    ORTHOCENTRE = "orthocentre"
    CIRCUMCENTRE = "circumcentre"
    INCENTRE = "incentre"
    SEGMENT = "segment"
    TWO_POINTS_CONNECT = "two_points_connect"
    POINT_CONNECT_EXISTING = "point_connect_existing"


@dataclass
class GenConfig:
    extra_steps: int = 1
    seed: int = 0
    init_probs: tuple[float, float, float] = (0.5, 0.3, 0.2)
    center_prob: float = 0.7
    orthocentre_label_prob: float = 0.5
    circumcentre_center_prob: float = 0.5
    incentre_center_prob: float = 0.5
    touch_point_prob: float = 0.4
    # Also list the triangle's vertices on the incircle. Off by default: a
    # circle through the vertices cannot be tangent to the sides.
    incircle_through_vertices: bool = False

    def __post_init__(self):
        self.init_probs = tuple(float(p) for p in self.init_probs)
        if self.extra_steps < 0:
            raise ValueError("extra_steps must be non-negative")
        if len(self.init_probs) != 3 or abs(sum(self.init_probs) - 1.0) > 1e-9:
            raise ValueError("init_probs must be three probabilities summing to 1")
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.endswith("_prob") and not 0.0 <= v <= 1.0:
                raise ValueError(f"{f.name} must lie in [0, 1]")
        if any(not 0.0 <= p <= 1.0 for p in self.init_probs):
            raise ValueError("init_probs must lie in [0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "GenConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown generator options: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "GenConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["init_probs"] = list(self.init_probs)
        return d


@dataclass(frozen=True)
class ConstructionDescription:
    kind: str
    text: str
    created: tuple[str, ...] = ()


class _Scene:
    """Mutable working copy of a program while an operation is applied."""

    def __init__(self, program: GeoProgram):
        self.points = list(program.points)
        self.lines = [list(l.through) for l in program.lines]
        self.circles = [[c.center, list(c.through)] for c in program.circles]
        self.constraints = list(program.constraints)

    def freeze(self) -> GeoProgram:
        return GeoProgram(
            tuple(self.points),
            tuple(LineDecl(tuple(l)) for l in self.lines),
            tuple(CircleDecl(c, tuple(t)) for c, t in self.circles),
            tuple(self.constraints),
        )

    def fresh_label(self) -> str | None:
        used = {p.label for p in self.points}
        for ch in LABELS:
            if ch not in used:
                return ch
        return None

    def new_point(self, labeled: bool = True) -> PointRef:
        label = self.fresh_label() if labeled else None
        if label is not None:
            p = PointRef.labeled(label)
        else:
            p = PointRef.anonymous(sum(1 for q in self.points if q.label is None) + 1)
        self.points.append(p)
        return p

    def add_line(self, *pts: PointRef) -> int:
        self.lines.append(list(pts))
        return len(self.lines) - 1

    def add_circle(self, center: PointRef | None, through=()) -> int:
        self.circles.append([center, list(through)])
        return len(self.circles) - 1


# ----------------------------------------------------------------- queries


def _fresh_labels(program: GeoProgram) -> int:
    return len(LABELS) - len({p.label for p in program.points if p.label is not None})


def _joined(program: GeoProgram) -> dict[frozenset, list[int]]:
    """Map each unordered point pair to the lines containing both points."""
    out: dict[frozenset, list[int]] = {}
    for li, line in enumerate(program.lines):
        for a, b in itertools.combinations(dict.fromkeys(line.through), 2):
            out.setdefault(frozenset((a, b)), []).append(li)
    return out


def find_triangles(program: GeoProgram) -> list[tuple[PointRef, PointRef, PointRef, int, int, int]]:
    """Triangles as (A, B, C, line BC, line AC, line AB).

    Three points form a triangle when each pair lies on a common declared
    line and the three points are not all on one line.
    """
    joined = _joined(program)
    pts = [p for p in dict.fromkeys(program.points) if any(p in k for k in joined)]
    tris = []
    for a, b, c in itertools.combinations(pts, 3):
        ab = joined.get(frozenset((a, b)))
        bc = joined.get(frozenset((b, c)))
        ac = joined.get(frozenset((a, c)))
        if not (ab and bc and ac):
            continue
        if set(ab) & set(bc) & set(ac):
            continue
        tris.append((a, b, c, bc[0], ac[0], ab[0]))
    return tris


def _unjoined_pairs(program: GeoProgram) -> list[tuple[PointRef, PointRef]]:
    joined = _joined(program)
    pts = list(dict.fromkeys(program.points))
    return [(a, b) for a, b in itertools.combinations(pts, 2) if frozenset((a, b)) not in joined]


def _curves(program: GeoProgram) -> list[tuple[str, int]]:
    return [("line", i) for i in range(len(program.lines))] + [("circle", i) for i in range(len(program.circles))]


def _on_curve(program: GeoProgram, p: PointRef, curve: tuple[str, int]) -> bool:
    kind, i = curve
    if kind == "line":
        return p in program.lines[i].through
    return p in program.circles[i].through


def _point_curve_pairs(program: GeoProgram) -> list[tuple[PointRef, tuple[str, int]]]:
    return [
        (p, c)
        for p in dict.fromkeys(program.points)
        for c in _curves(program)
        if not _on_curve(program, p, c)
    ]


def prepare(kind: OpKind, program: GeoProgram) -> bool:
    """Whether ``kind`` can be applied to ``program``."""
    if kind in (OpKind.ORTHOCENTRE, OpKind.CIRCUMCENTRE, OpKind.INCENTRE):
        return bool(find_triangles(program))
    if kind is OpKind.SEGMENT:
        return bool(_unjoined_pairs(program))
    if kind is OpKind.TWO_POINTS_CONNECT:
        return bool(_curves(program)) and _fresh_labels(program) >= 2
    if kind is OpKind.POINT_CONNECT_EXISTING:
        return _fresh_labels(program) >= 1 and bool(_point_curve_pairs(program))
    raise ValueError(kind)


def admissible_ops(program: GeoProgram) -> list[OpKind]:
    return [k for k in OpKind if prepare(k, program)]


# -------------------------------------------------------------------- init


def init_scene(cfg: GenConfig, rng: np.random.Generator) -> GeoProgram:
    scene = _Scene(GeoProgram())
    r = rng.random()
    p_tri, p_quad, _ = cfg.init_probs
    if r < p_tri:
        a, b, c = (scene.new_point() for _ in range(3))
        scene.add_line(a, b)
        scene.add_line(b, c)
        scene.add_line(c, a)
    elif r < p_tri + p_quad:
        a, b, c, d = (scene.new_point() for _ in range(4))
        scene.add_line(a, b)
        scene.add_line(b, c)
        scene.add_line(c, d)
        scene.add_line(d, a)
    else:
        center = scene.new_point() if rng.random() < cfg.center_prob else None
        scene.add_circle(center)
    return scene.freeze()


# ------------------------------------------------------------------- apply


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _curve_name(curve: tuple[str, int]) -> str:
    return f"{curve[0]}_{curve[1] + 1}"


def _new_point_on(scene: _Scene, curve: tuple[str, int]) -> PointRef:
    p = scene.new_point()
    kind, i = curve
    if kind == "line":
        scene.lines[i].append(p)
    else:
        scene.circles[i][1].append(p)
    return p


def apply(kind: OpKind, program: GeoProgram, cfg: GenConfig, rng: np.random.Generator
          ) -> tuple[GeoProgram, ConstructionDescription]:
    if not prepare(kind, program):
        raise Inadmissible(f"{kind.value} is not admissible on this scene")
    scene = _Scene(program)

    if kind is OpKind.ORTHOCENTRE:
        a, b, c, bc, ac, ab = _pick(rng, find_triangles(program))
        h = scene.new_point(labeled=rng.random() < cfg.orthocentre_label_prob)
        ah, bh, ch = scene.add_line(a, h), scene.add_line(b, h), scene.add_line(c, h)
        perp = ConstraintKind.PERPENDICULAR
        scene.constraints += [
            ConstraintDecl(perp, (ah, bc)),
            ConstraintDecl(perp, (bh, ac)),
            ConstraintDecl(perp, (ch, ab)),
        ]
        desc = ConstructionDescription(kind.value, f"orthocentre {h} of triangle {a}{b}{c}", (h.name,))

    elif kind is OpKind.CIRCUMCENTRE:
        a, b, c, *_ = _pick(rng, find_triangles(program))
        o = None
        if rng.random() < cfg.circumcentre_center_prob and scene.fresh_label() is not None:
            o = scene.new_point()
        scene.add_circle(o, (a, b, c))
        created = (o.name,) if o else ()
        desc = ConstructionDescription(kind.value, f"circumcircle of triangle {a}{b}{c}", created)

    elif kind is OpKind.INCENTRE:
        a, b, c, bc, ac, ab = _pick(rng, find_triangles(program))
        i = None
        if rng.random() < cfg.incentre_center_prob and scene.fresh_label() is not None:
            i = scene.new_point()
        through = [a, b, c] if cfg.incircle_through_vertices else []
        ci = scene.add_circle(i, through)
        tan = ConstraintKind.LINE_CIRCLE_TANGENT
        scene.constraints += [ConstraintDecl(tan, (ab, ci)), ConstraintDecl(tan, (bc, ci)), ConstraintDecl(tan, (ac, ci))]
        created = [i.name] if i else []
        for side in (ab, bc, ac):
            if rng.random() < cfg.touch_point_prob:
                t = scene.new_point()
                scene.lines[side].append(t)
                scene.circles[ci][1].append(t)
                created.append(t.name)
        desc = ConstructionDescription(kind.value, f"incircle of triangle {a}{b}{c}", tuple(created))

    elif kind is OpKind.SEGMENT:
        a, b = _pick(rng, _unjoined_pairs(program))
        scene.add_line(a, b)
        desc = ConstructionDescription(kind.value, f"segment {a}{b}")

    elif kind is OpKind.TWO_POINTS_CONNECT:
        curves = _curves(program)
        c1 = _pick(rng, curves)
        # Two fresh points on one line would redeclare that line.
        c2 = _pick(rng, [c for c in curves if c[0] == "circle" or c != c1] or [c1])
        a = _new_point_on(scene, c1)
        b = _new_point_on(scene, c2)
        scene.add_line(a, b)
        desc = ConstructionDescription(
            kind.value, f"points {a} on {_curve_name(c1)} and {b} on {_curve_name(c2)}, joined", (a.name, b.name)
        )

    else:
        p, curve = _pick(rng, _point_curve_pairs(program))
        a = _new_point_on(scene, curve)
        scene.add_line(a, p)
        desc = ConstructionDescription(kind.value, f"point {a} on {_curve_name(curve)} joined to {p}", (a.name,))

    return scene.freeze(), desc


# ---------------------------------------------------------------- generate


@dataclass
class Generation:
    program: GeoProgram
    steps: list[ConstructionDescription] = field(default_factory=list)


def generate_with_trace(cfg: GenConfig) -> Generation:
    rng = np.random.default_rng(cfg.seed)
    program = init_scene(cfg, rng)
    out = Generation(program)
    for _ in range(cfg.extra_steps):
        ops = admissible_ops(out.program)
        if not ops:
            break
        kind = _pick(rng, ops)
        out.program, desc = apply(kind, out.program, cfg, rng)
        out.steps.append(desc)
    return out


def generate(cfg: GenConfig) -> GeoProgram:
    return generate_with_trace(cfg).program
