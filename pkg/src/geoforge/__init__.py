"""Synthetic geometry diagrams: a small DSL, a generator, a solver, a
renderer, a scorer and preference-pair construction."""

from __future__ import annotations

__version__ = "0.1.0"

from .dsl import GeoProgram, PointRef, parse_program, serialize_program, validate  # noqa: E402
from .generator import GenConfig, generate  # noqa: E402
from .scoring import ScoreReport, score  # noqa: E402
from .solver import SolveConfig, SolveResult, solve  # noqa: E402

__all__ = [
    "GeoProgram", "PointRef", "parse_program", "serialize_program", "validate",
    "GenConfig", "generate", "ScoreReport", "score",
    "SolveConfig", "SolveResult", "solve", "__version__",
]
