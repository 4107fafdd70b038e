"""GeoDSL programs: data model, text parser, canonical serializer, validation.

A program is four ordered sections (points, lines, circles, constraints).
Lines and circles reference points; constraints reference lines and circles
by their 0-based position in the owning program, or points directly for
equal-distance constraints.

Text format::

    A = point(label="A")
    unlabeled_point_1 = point()
    line_1 = line(through=[A, unlabeled_point_1])
    circle_1 = circle(center=A, through=[B])
    perpendicular(line_1, line_2)
    equal_distance((A, B), (C, D))
"""

from __future__ import annotations

import ast
import enum
import re
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

LABELS = string.ascii_uppercase
_LABEL_RE = re.compile(r"^[A-Z]$")


class DSLError(ValueError):
    """Base class for GeoDSL parse errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class DSLSyntaxError(DSLError):
    pass


class UndefinedReferenceError(DSLError):
    pass


class DuplicateLabelError(DSLError):
    pass


class ArityError(DSLError):
    pass


class DanglingReference(LookupError):
    pass


@dataclass(frozen=True, order=True)
class PointRef:
    label: str | None = None
    anon_index: int | None = None

    @classmethod
    def labeled(cls, label: str) -> "PointRef":
        return cls(label=label)

    @classmethod
    def anonymous(cls, index: int) -> "PointRef":
        return cls(anon_index=index)

    @property
    def is_anonymous(self) -> bool:
        return self.label is None

    @property
    def name(self) -> str:
        if self.label is not None:
            return self.label
        return f"unlabeled_point_{self.anon_index}"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class LineDecl:
    through: tuple[PointRef, ...]


@dataclass(frozen=True)
class CircleDecl:
    center: PointRef | None = None
    through: tuple[PointRef, ...] = ()


class ConstraintKind(enum.Enum):
    PARALLEL = "parallel"
    PERPENDICULAR = "perpendicular"
    LINE_CIRCLE_TANGENT = "tangent_line_circle"
    CIRCLE_CIRCLE_TANGENT = "tangent_circle_circle"
    EQUAL_DISTANCE = "equal_distance"

    @property
    def keyword(self) -> str:
        return self.value


Segment = tuple[PointRef, PointRef]
ConstraintArg = Union[int, Segment]


@dataclass(frozen=True)
class ConstraintDecl:
    """One constraint literal.

    ``args`` holds two line indices (parallel/perpendicular), a line index
    and a circle index (line-circle tangency), two circle indices
    (circle-circle tangency), or two point pairs (equal distance).
    """

    kind: ConstraintKind
    args: tuple[ConstraintArg, ConstraintArg]


@dataclass(frozen=True)
class GeoProgram:
    points: tuple[PointRef, ...] = ()
    lines: tuple[LineDecl, ...] = ()
    circles: tuple[CircleDecl, ...] = ()
    constraints: tuple[ConstraintDecl, ...] = ()

    def point_index(self) -> dict[PointRef, int]:
        index: dict[PointRef, int] = {}
        for i, p in enumerate(self.points):
            index.setdefault(p, i)
        return index

    @property
    def literal_count(self) -> int:
        return len(self.points) + len(self.lines) + len(self.circles) + len(self.constraints)

    def counts(self) -> dict[str, int]:
        return {
            "points": len(self.points),
            "lines": len(self.lines),
            "circles": len(self.circles),
            "constraints": len(self.constraints),
        }


# ---------------------------------------------------------------- queries


@dataclass(frozen=True)
class CurveRef:
    kind: str  # "line" or "circle"
    index: int


def incident_points(program: GeoProgram, curve: CurveRef) -> frozenset[PointRef]:
    """Points lying on a line or circle; a circle's center is not included."""
    if curve.kind == "line":
        items: Sequence = program.lines
    elif curve.kind == "circle":
        items = program.circles
    else:
        raise DanglingReference(f"unknown curve kind {curve.kind!r}")
    if not 0 <= curve.index < len(items):
        raise DanglingReference(f"{curve.kind} index {curve.index} out of range")
    return frozenset(items[curve.index].through)


# ------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    code: str
    where: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.code}({self.where}): {self.message}"


_CONSTRAINT_SIGNATURE = {
    ConstraintKind.PARALLEL: ("line", "line"),
    ConstraintKind.PERPENDICULAR: ("line", "line"),
    ConstraintKind.LINE_CIRCLE_TANGENT: ("line", "circle"),
    ConstraintKind.CIRCLE_CIRCLE_TANGENT: ("circle", "circle"),
    ConstraintKind.EQUAL_DISTANCE: ("segment", "segment"),
}


def validate(program: GeoProgram) -> list[Violation]:
    """Check program invariants. Returns violations instead of raising.

    Duplicate line/circle/constraint declarations and bare circles (no
    center, nothing on them) are reported with severity ``"warning"``.
    """
    out: list[Violation] = []
    seen_labels: set[str] = set()
    seen_anon: set[int] = set()
    for i, p in enumerate(program.points):
        where = f"point {i}"
        if (p.label is None) == (p.anon_index is None):
            out.append(Violation("MalformedPoint", where, "exactly one of label/anon_index must be set"))
            continue
        if p.label is not None:
            if not _LABEL_RE.match(p.label):
                out.append(Violation("BadLabel", where, f"label {p.label!r} is not a single uppercase letter"))
            if p.label in seen_labels:
                out.append(Violation("DuplicateLabel", p.label, f"label {p.label!r} declared twice"))
            seen_labels.add(p.label)
        else:
            if p.anon_index < 1:
                out.append(Violation("BadAnonIndex", where, "anonymous index must be positive"))
            if p.anon_index in seen_anon:
                out.append(Violation("DuplicateAnonIndex", where, f"anonymous index {p.anon_index} declared twice"))
            elif p.anon_index != len(seen_anon) + 1:
                out.append(Violation("AnonOrder", where, "anonymous points must be numbered 1, 2, ... in order"))
            seen_anon.add(p.anon_index)

    declared = set(program.points)

    def check_point(p: PointRef, where: str) -> None:
        if p not in declared:
            out.append(Violation("UndeclaredPoint", where, f"point {p.name} is not declared"))

    for i, line in enumerate(program.lines):
        where = f"line_{i + 1}"
        if len(line.through) < 2:
            out.append(Violation("LineTooShort", where, "a line needs at least two points"))
        if len(set(line.through)) != len(line.through):
            out.append(Violation("DuplicateThroughPoint", where, "point listed twice"))
        for p in line.through:
            check_point(p, where)

    for i, circle in enumerate(program.circles):
        where = f"circle_{i + 1}"
        if circle.center is not None:
            check_point(circle.center, where)
            if circle.center in circle.through:
                out.append(Violation("CenterOnCircle", where, "center listed in through"))
        if len(set(circle.through)) != len(circle.through):
            out.append(Violation("DuplicateThroughPoint", where, "point listed twice"))
        for p in circle.through:
            check_point(p, where)
        if circle.center is None and not circle.through:
            out.append(Violation("BareCircle", where, "circle has neither center nor points", "warning"))

    n_lines, n_circles = len(program.lines), len(program.circles)
    for i, c in enumerate(program.constraints):
        where = f"constraint {i} ({c.kind.keyword})"
        sig = _CONSTRAINT_SIGNATURE[c.kind]
        if len(c.args) != 2:
            out.append(Violation("WrongArity", where, "constraints take exactly two arguments"))
            continue
        ok = True
        for arg, want in zip(c.args, sig):
            if want == "segment":
                if not (isinstance(arg, tuple) and len(arg) == 2 and all(isinstance(p, PointRef) for p in arg)):
                    out.append(Violation("WrongArity", where, "expected a pair of points"))
                    ok = False
                    continue
                for p in arg:
                    check_point(p, where)
                if arg[0] == arg[1]:
                    out.append(Violation("DegenerateSegment", where, "segment endpoints coincide"))
            else:
                if isinstance(arg, bool) or not isinstance(arg, int):
                    out.append(Violation("WrongArity", where, f"expected a {want} index"))
                    ok = False
                    continue
                bound = n_lines if want == "line" else n_circles
                if not 0 <= arg < bound:
                    out.append(Violation("DanglingReference", where, f"{want} index {arg} out of range"))
                    ok = False
        if ok and c.kind in (
            ConstraintKind.PARALLEL,
            ConstraintKind.PERPENDICULAR,
            ConstraintKind.CIRCLE_CIRCLE_TANGENT,
        ) and c.args[0] == c.args[1]:
            out.append(Violation("SameObject", where, "both arguments refer to the same object"))

    for section, items in (("line", program.lines), ("circle", program.circles), ("constraint", program.constraints)):
        seen: set = set()
        for i, item in enumerate(items):
            if item in seen:
                out.append(Violation("DuplicateDeclaration", f"{section} {i}", "repeated declaration", "warning"))
            seen.add(item)
    return out


def errors(program: GeoProgram) -> list[Violation]:
    return [v for v in validate(program) if v.severity == "error"]


# ------------------------------------------------------------ serializing


def _fmt_points(points: Iterable[PointRef]) -> str:
    return "[" + ", ".join(p.name for p in points) + "]"


def serialize_program(program: GeoProgram) -> str:
    """Canonical text. Sections are separated by one blank line."""
    sections: list[list[str]] = []
    pts = []
    for p in program.points:
        if p.label is not None:
            pts.append(f'{p.label} = point(label="{p.label}")')
        else:
            pts.append(f"{p.name} = point()")
    sections.append(pts)
    sections.append(
        [f"line_{i + 1} = line(through={_fmt_points(l.through)})" for i, l in enumerate(program.lines)]
    )
    circles = []
    for i, c in enumerate(program.circles):
        parts = []
        if c.center is not None:
            parts.append(f"center={c.center.name}")
        parts.append(f"through={_fmt_points(c.through)}")
        circles.append(f"circle_{i + 1} = circle({', '.join(parts)})")
    sections.append(circles)
    cons = []
    for c in program.constraints:
        a, b = c.args
        if c.kind is ConstraintKind.EQUAL_DISTANCE:
            cons.append(f"equal_distance(({a[0].name}, {a[1].name}), ({b[0].name}, {b[1].name}))")
        else:
            kinds = _CONSTRAINT_SIGNATURE[c.kind]
            cons.append(f"{c.kind.keyword}({kinds[0]}_{a + 1}, {kinds[1]}_{b + 1})")
    sections.append(cons)
    blocks = ["\n".join(s) + "\n" for s in sections if s]
    return "\n".join(blocks)


# ---------------------------------------------------------------- parsing

_KEYWORDS = {k.keyword: k for k in ConstraintKind}


@dataclass
class _Symbols:
    points: dict[str, PointRef] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)
    circles: dict[str, int] = field(default_factory=dict)

    def taken(self, name: str) -> bool:
        return name in self.points or name in self.lines or name in self.circles


def _pos(node: ast.AST) -> tuple[int, int]:
    return getattr(node, "lineno", 0), getattr(node, "col_offset", 0) + 1


def _syntax(node: ast.AST, msg: str) -> DSLSyntaxError:
    return DSLSyntaxError(msg, *_pos(node))


def _call_parts(call: ast.Call, allowed: set[str]) -> dict[str, ast.expr]:
    if call.args:
        raise _syntax(call, "arguments must be passed by keyword")
    kw: dict[str, ast.expr] = {}
    for k in call.keywords:
        if k.arg is None or k.arg not in allowed:
            raise _syntax(k.value, f"unexpected keyword {k.arg!r}")
        if k.arg in kw:
            raise _syntax(k.value, f"keyword {k.arg!r} repeated")
        kw[k.arg] = k.value
    return kw


def _point_name(node: ast.expr, syms: _Symbols) -> PointRef:
    if not isinstance(node, ast.Name):
        raise _syntax(node, "expected a point name")
    if node.id not in syms.points:
        if node.id in syms.lines or node.id in syms.circles:
            raise ArityError(f"{node.id!r} is not a point", *_pos(node))
        raise UndefinedReferenceError(f"undeclared point {node.id!r}", *_pos(node))
    return syms.points[node.id]


def _point_list(node: ast.expr, syms: _Symbols) -> tuple[PointRef, ...]:
    if not isinstance(node, ast.List):
        raise _syntax(node, "expected a list of points")
    return tuple(_point_name(e, syms) for e in node.elts)


def parse_program(text: str) -> GeoProgram:
    """Parse GeoDSL text. Unlabeled points are numbered in textual order."""
    try:
        module = ast.parse(text, mode="exec")
    except SyntaxError as exc:
        raise DSLSyntaxError(exc.msg or "invalid syntax", exc.lineno, exc.offset) from None

    syms = _Symbols()
    points: list[PointRef] = []
    lines: list[LineDecl] = []
    circles: list[CircleDecl] = []
    constraints: list[ConstraintDecl] = []
    anon = 0

    for stmt in module.body:
        if isinstance(stmt, ast.Assign):
            if len(stmt.targets) != 1 or not isinstance(stmt.targets[0], ast.Name):
                raise _syntax(stmt, "expected NAME = ...")
            name = stmt.targets[0].id
            call = stmt.value
            if not (isinstance(call, ast.Call) and isinstance(call.func, ast.Name)):
                raise _syntax(call, "expected point(...), line(...) or circle(...)")
            if syms.taken(name):
                raise DuplicateLabelError(f"name {name!r} declared twice", *_pos(stmt))
            ctor = call.func.id
            if ctor == "point":
                kw = _call_parts(call, {"label"})
                label_node = kw.get("label")
                if label_node is None or (isinstance(label_node, ast.Constant) and label_node.value is None):
                    anon += 1
                    ref = PointRef.anonymous(anon)
                else:
                    if not (isinstance(label_node, ast.Constant) and isinstance(label_node.value, str)):
                        raise _syntax(label_node, "label must be a string literal")
                    label = label_node.value
                    if not _LABEL_RE.match(label):
                        raise _syntax(label_node, f"label {label!r} must be one uppercase letter")
                    ref = PointRef.labeled(label)
                    if ref in points:
                        raise DuplicateLabelError(f"label {label!r} declared twice", *_pos(stmt))
                syms.points[name] = ref
                points.append(ref)
            elif ctor == "line":
                kw = _call_parts(call, {"through"})
                if "through" not in kw:
                    raise _syntax(call, "line() requires through=[...]")
                through = _point_list(kw["through"], syms)
                if len(through) < 2:
                    raise ArityError("a line needs at least two points", *_pos(call))
                syms.lines[name] = len(lines)
                lines.append(LineDecl(through))
            elif ctor == "circle":
                kw = _call_parts(call, {"center", "through"})
                center = None
                c_node = kw.get("center")
                if c_node is not None and not (isinstance(c_node, ast.Constant) and c_node.value is None):
                    center = _point_name(c_node, syms)
                through = _point_list(kw["through"], syms) if "through" in kw else ()
                syms.circles[name] = len(circles)
                circles.append(CircleDecl(center, through))
            else:
                raise _syntax(call.func, f"unknown constructor {ctor!r}")
        elif isinstance(stmt, ast.Expr) and isinstance(stmt.value, ast.Call):
            constraints.append(_parse_constraint(stmt.value, syms))
        else:
            raise _syntax(stmt, "expected a declaration or a constraint call")

    return GeoProgram(tuple(points), tuple(lines), tuple(circles), tuple(constraints))


def _parse_constraint(call: ast.Call, syms: _Symbols) -> ConstraintDecl:
    if not isinstance(call.func, ast.Name) or call.func.id not in _KEYWORDS:
        raise _syntax(call, "unknown constraint")
    kind = _KEYWORDS[call.func.id]
    if call.keywords or len(call.args) != 2:
        raise ArityError(f"{kind.keyword} takes exactly two positional arguments", *_pos(call))
    args: list[ConstraintArg] = []
    for node, want in zip(call.args, _CONSTRAINT_SIGNATURE[kind]):
        if want == "segment":
            if not (isinstance(node, ast.Tuple) and len(node.elts) == 2):
                raise ArityError("expected a pair of points (P, Q)", *_pos(node))
            args.append((_point_name(node.elts[0], syms), _point_name(node.elts[1], syms)))
            continue
        if not isinstance(node, ast.Name):
            raise ArityError(f"expected a {want} name", *_pos(node))
        table = syms.lines if want == "line" else syms.circles
        if node.id in table:
            args.append(table[node.id])
        elif syms.taken(node.id):
            raise ArityError(f"{node.id!r} is not a {want}", *_pos(node))
        else:
            raise UndefinedReferenceError(f"undeclared {want} {node.id!r}", *_pos(node))
    return ConstraintDecl(kind, (args[0], args[1]))
