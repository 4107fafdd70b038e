from __future__ import annotations

import pytest

from geoforge.dsl import parse_program

TRIANGLE = """\
A = point(label="A")
B = point(label="B")
C = point(label="C")

line_1 = line(through=[A, B])
line_2 = line(through=[B, C])
line_3 = line(through=[C, A])
"""

FULL = """\
A = point(label="A")
B = point(label="B")
C = point(label="C")
O = point(label="O")
unlabeled_point_1 = point()

line_1 = line(through=[A, B])
line_2 = line(through=[B, C, unlabeled_point_1])
line_3 = line(through=[C, A])
line_4 = line(through=[A, unlabeled_point_1])

circle_1 = circle(center=O, through=[A, B, C])

perpendicular(line_4, line_2)
equal_distance((O, A), (O, B))
"""


class ScriptedRng:
    """Stands in for numpy's Generator with predetermined draws."""

    def __init__(self, uniforms=(), ints=()):
        self.uniforms = list(uniforms)
        self.ints = list(ints)

    def random(self):
        return self.uniforms.pop(0) if self.uniforms else 0.0

    def integers(self, n):
        return self.ints.pop(0) % n if self.ints else 0


@pytest.fixture
def triangle():
    return parse_program(TRIANGLE)


@pytest.fixture
def full():
    return parse_program(FULL)


ACCEPTANCE: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE.append(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
