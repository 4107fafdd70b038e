"""Preference pairs from scored description samples.

For each instance, ``n_samples`` descriptions are drawn from a sampler,
translated to programs and scored against the ground truth. After a stable
descending sort, a winner pointer walks the top half and a loser pointer
walks the bottom half; a pair is emitted when the score gap exceeds
``delta_min``.
"""

from __future__ import annotations

import json
import logging
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Protocol, Sequence

import numpy as np

from .dsl import (LABELS, CircleDecl, ConstraintDecl, ConstraintKind, DSLError, GeoProgram, LineDecl, PointRef,
                  parse_program, serialize_program)
from .pipeline import Instance, derive_seed
from .scoring import score

log = logging.getLogger(__name__)


class TranslationError(ValueError):
    pass


class Sampler(Protocol):
    thread_safe: bool

    def sample(self, instance: Instance, rng: np.random.Generator) -> str: ...


class Translator(Protocol):
    thread_safe: bool

    def translate(self, text: str) -> GeoProgram: ...


@dataclass(frozen=True)
class PreferencePair:
    id: str
    winner: str
    loser: str
    s_w: float
    s_l: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


# -------------------------------------------------------------- stub parts


class ParserTranslator:
    """Treats the text as GeoDSL."""

    thread_safe = True

    def translate(self, text: str) -> GeoProgram:
        try:
            return parse_program(text)
        except DSLError as exc:
            raise TranslationError(str(exc)) from exc


def _substitute(program: GeoProgram, mapping: dict[PointRef, PointRef]) -> GeoProgram:
    def sub(p):
        return mapping.get(p, p)

    cons = []
    for c in program.constraints:
        if c.kind is ConstraintKind.EQUAL_DISTANCE:
            (a, b), (d, e) = c.args
            c = ConstraintDecl(c.kind, ((sub(a), sub(b)), (sub(d), sub(e))))
        cons.append(c)
    return GeoProgram(
        tuple(sub(p) for p in program.points),
        tuple(LineDecl(tuple(sub(p) for p in l.through)) for l in program.lines),
        tuple(CircleDecl(sub(c.center) if c.center else None, tuple(sub(p) for p in c.through))
              for c in program.circles),
        tuple(cons),
    )


def _relabel(program: GeoProgram, rng, avoid: set[str]) -> GeoProgram:
    labeled = [p for p in program.points if p.label is not None]
    if not labeled:
        return program
    old = labeled[int(rng.integers(len(labeled)))]
    used = {p.label for p in program.points} | avoid
    free = [c for c in LABELS if c not in used]
    if free:
        return _substitute(program, {old: PointRef.labeled(free[int(rng.integers(len(free)))])})
    # label pool exhausted: anonymize, keeping anonymous indices in declaration order
    mapping = {}
    for p in program.points:
        if p.label is None or p == old:
            mapping[p] = PointRef.anonymous(len(mapping) + 1)
    return _substitute(program, mapping)


def drop_line(program: GeoProgram, j: int) -> GeoProgram:
    """Remove line ``j`` and every constraint that references it."""
    cons = []
    for c in program.constraints:
        if c.kind in (ConstraintKind.PARALLEL, ConstraintKind.PERPENDICULAR):
            if j in c.args:
                continue
            cons.append(ConstraintDecl(c.kind, tuple(a - (a > j) for a in c.args)))
        elif c.kind is ConstraintKind.LINE_CIRCLE_TANGENT:
            if c.args[0] == j:
                continue
            cons.append(ConstraintDecl(c.kind, (c.args[0] - (c.args[0] > j), c.args[1])))
        else:
            cons.append(c)
    lines = program.lines[:j] + program.lines[j + 1:]
    return GeoProgram(program.points, lines, program.circles, tuple(cons))


def _flip(program: GeoProgram, rng) -> GeoProgram | None:
    flippable = [i for i, c in enumerate(program.constraints)
                 if c.kind in (ConstraintKind.PARALLEL, ConstraintKind.PERPENDICULAR)]
    if not flippable:
        return None
    i = flippable[int(rng.integers(len(flippable)))]
    c = program.constraints[i]
    kind = ConstraintKind.PARALLEL if c.kind is ConstraintKind.PERPENDICULAR else ConstraintKind.PERPENDICULAR
    cons = list(program.constraints)
    cons[i] = ConstraintDecl(kind, c.args)
    return GeoProgram(program.points, program.lines, program.circles, tuple(cons))


def corrupt(program: GeoProgram, level: int, rng: np.random.Generator) -> GeoProgram:
    """Apply ``level`` random corruptions: relabel a point, drop a line, or
    flip a parallel/perpendicular constraint. New labels avoid every label of
    the original program, so a relabel never restores a match."""
    avoid = {p.label for p in program.points if p.label is not None}
    out = program
    for _ in range(level):
        choice = int(rng.integers(3))
        if choice == 2:
            flipped = _flip(out, rng)
            if flipped is not None:
                out = flipped
                continue
            choice = int(rng.integers(2))
        if choice == 1 and out.lines:
            out = drop_line(out, int(rng.integers(len(out.lines))))
        else:
            out = _relabel(out, rng, avoid)
    return out


def stub_sampler(instance: Instance, degradation_level: int, rng: np.random.Generator) -> str:
    return serialize_program(corrupt(parse_program(instance.program), degradation_level, rng))


class StubSampler:
    """Emits the ground truth with a random number of corruptions in
    [0, max_level]; with probability ``garble_prob`` the text is truncated
    mid-statement so that translation fails."""

    thread_safe = True

    def __init__(self, max_level: int = 10, garble_prob: float = 0.1):
        self.max_level = max_level
        self.garble_prob = garble_prob

    def sample(self, instance: Instance, rng: np.random.Generator) -> str:
        text = stub_sampler(instance, int(rng.integers(self.max_level + 1)), rng)
        if rng.random() < self.garble_prob:
            return text[: max(1, len(text) // 2)] + "("
        return text


# ---------------------------------------------------------- process adapter


class ProcessAdapter:
    """Line-delimited JSON over a child's stdin/stdout.

    Requests are single JSON objects: ``{"op": "sample", "id", "svg", "png",
    "program"}`` or ``{"op": "translate", "text"}``. Replies are
    ``{"text": ...}`` / ``{"program": <GeoDSL text>}``, or ``{"error": ...}``.
    """

    thread_safe = False

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _call(self, request: dict) -> dict:
        with self._lock:
            if self._proc is None or self._proc.poll() is not None:
                self._proc = subprocess.Popen(self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                              text=True, bufsize=1)
            self._proc.stdin.write(json.dumps(request) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        if not line:
            raise RuntimeError(f"adapter process {self.argv[0]!r} closed its output")
        return json.loads(line)

    def sample(self, instance: Instance, rng: np.random.Generator) -> str:
        reply = self._call({"op": "sample", "id": instance.id, "svg": instance.svg, "png": instance.png,
                            "seed": int(rng.integers(2**63)), "program": instance.program})
        if "error" in reply:
            raise RuntimeError(reply["error"])
        return reply["text"]

    def translate(self, text: str) -> GeoProgram:
        reply = self._call({"op": "translate", "text": text})
        if "error" in reply:
            raise TranslationError(reply["error"])
        try:
            return parse_program(reply["program"])
        except (KeyError, DSLError) as exc:
            raise TranslationError(f"adapter returned no valid program: {exc}") from exc

    def close(self) -> None:
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------- algorithm


def score_sample(instance: Instance, text: str, translator: Translator) -> float:
    truth = parse_program(instance.program)
    try:
        pred = translator.translate(text)
    except TranslationError as exc:
        log.info("translation failed for %s: %s", instance.id, exc)
        return 0.0
    return score(truth, pred).overall


def select_pairs(scores: Sequence[float], delta_min: float) -> list[tuple[int, int]]:
    """Winner/loser positions (into ``scores``) chosen by the two-pointer scan."""
    n = len(scores)
    order = sorted(range(n), key=lambda i: -scores[i])  # stable: ties keep sample order
    half = n // 2
    w, l = 0, half
    out = []
    while w < half and l < n:
        if scores[order[w]] - scores[order[l]] > delta_min:
            out.append((order[w], order[l]))
            w += 1
        l += 1
    return out


class _Serialized:
    """Funnels calls into a component that is not thread safe through one lock."""

    def __init__(self, inner):
        self.inner = inner
        self.lock = threading.Lock()

    def sample(self, instance, rng):
        with self.lock:
            return self.inner.sample(instance, rng)

    def translate(self, text):
        with self.lock:
            return self.inner.translate(text)


def _pairs_for(k: int, inst: Instance, sampler, translator, n_samples: int, delta_min: float,
               seed: int) -> list[PreferencePair]:
    rng = np.random.default_rng(derive_seed(seed, k))
    texts = [sampler.sample(inst, rng) for _ in range(n_samples)]
    scores = [score_sample(inst, t, translator) for t in texts]
    return [PreferencePair(inst.id, texts[w], texts[l], scores[w], scores[l])
            for w, l in select_pairs(scores, delta_min)]


def generate_pairs(
    corpus: Iterable[Instance],
    sampler: Sampler,
    translator: Translator,
    n_samples: int = 10,
    delta_min: float = 0.3,
    seed: int = 0,
    jobs: int = 1,
) -> list[PreferencePair]:
    """Pairs for every instance, in corpus order. Each instance draws from
    its own RNG stream, so the output does not depend on ``jobs``."""
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    corpus = list(corpus)
    if not getattr(sampler, "thread_safe", False):
        sampler = _Serialized(sampler)
    if not getattr(translator, "thread_safe", False):
        translator = _Serialized(translator)
    args = [(k, inst, sampler, translator, n_samples, delta_min, seed) for k, inst in enumerate(corpus)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            chunks = list(pool.map(lambda a: _pairs_for(*a), args))
    else:
        chunks = [_pairs_for(*a) for a in args]
    return [p for chunk in chunks for p in chunk]
