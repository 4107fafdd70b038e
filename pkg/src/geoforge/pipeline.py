"""Corpus building: generate -> solve -> render -> manifest, with per-iteration stats."""

from __future__ import annotations

import json
import logging
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from .dsl import errors, parse_program, serialize_program
from .generator import GenConfig, generate
from .render import RenderConfig, rasterize, render_svg, to_png
from .solver import SolveConfig, SolveResult, solve

log = logging.getLogger(__name__)

SCHEMA = 1
_MASK = (1 << 64) - 1


class CorruptRecord(ValueError):
    def __init__(self, path, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"{path}: line {line_no}: {reason}")


class BudgetExhausted(RuntimeError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master: int, *keys: int) -> int:
    s = splitmix64(master & _MASK)
    for k in keys:
        s = splitmix64(s ^ (k & _MASK))
    return s


@dataclass
class Instance:
    id: str
    iteration: int
    program: str
    status: str
    gen_seed: int
    solve_seed: int
    svg: str | None = None
    png: str | None = None
    scene: dict | None = None

    def to_record(self) -> dict:
        return {
            "schema": SCHEMA,
            "id": self.id,
            "iteration": self.iteration,
            "program": self.program,
            "status": self.status,
            "gen_seed": self.gen_seed,
            "solve_seed": self.solve_seed,
            "svg": self.svg,
            "png": self.png,
            "scene": self.scene,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Instance":
        return cls(
            id=rec["id"],
            iteration=int(rec["iteration"]),
            program=rec["program"],
            status=rec["status"],
            gen_seed=int(rec["gen_seed"]),
            solve_seed=int(rec["solve_seed"]),
            svg=rec.get("svg"),
            png=rec.get("png"),
            scene=rec.get("scene"),
        )


@dataclass
class IterationStats:
    requested: int = 0
    attempted: int = 0
    solved: int = 0
    literal_sums: dict[str, int] = field(default_factory=lambda: dict.fromkeys(
        ("points", "lines", "circles", "constraints"), 0))
    budget_exhausted: bool = False
    literal_n: int = 0

    @property
    def success_rate(self) -> float:
        return 100.0 * self.solved / self.attempted if self.attempted else 0.0

    @property
    def mean_literals(self) -> dict[str, float]:
        return {k: v / self.literal_n if self.literal_n else 0.0 for k, v in self.literal_sums.items()}

    def add_literals(self, counts: Mapping[str, int]) -> None:
        self.literal_n += 1
        for k, v in counts.items():
            self.literal_sums[k] += v

    def merge(self, other: "IterationStats") -> "IterationStats":
        return IterationStats(
            self.requested + other.requested,
            self.attempted + other.attempted,
            self.solved + other.solved,
            {k: self.literal_sums[k] + other.literal_sums[k] for k in self.literal_sums},
            self.budget_exhausted or other.budget_exhausted,
            self.literal_n + other.literal_n,
        )


@dataclass
class CorpusStats:
    iterations: dict[int, IterationStats] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "iterations": {
                str(k): {
                    "requested": s.requested,
                    "attempted": s.attempted,
                    "solved": s.solved,
                    "success_rate": s.success_rate,
                    "mean_literals": s.mean_literals,
                    "literal_n": s.literal_n,
                    "budget_exhausted": s.budget_exhausted,
                }
                for k, s in sorted(self.iterations.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusStats":
        its = {}
        for k, v in data["iterations"].items():
            n = v["literal_n"]
            sums = {c: round(m * n) for c, m in v["mean_literals"].items()}
            its[int(k)] = IterationStats(v["requested"], v["attempted"], v["solved"], sums, v["budget_exhausted"], n)
        return cls(its)

    def table(self) -> str:
        """Per-iteration table, tab separated, SR in percent."""
        rows = ["iteration\trequested\tattempted\tsolved\tSR(%)\tpoints\tlines\tcircles\tconstraints"]
        for k, s in sorted(self.iterations.items()):
            m = s.mean_literals
            rows.append(
                f"{k}\t{s.requested}\t{s.attempted}\t{s.solved}\t{s.success_rate:.1f}\t"
                f"{m['points']:.2f}\t{m['lines']:.2f}\t{m['circles']:.2f}\t{m['constraints']:.2f}"
            )
        return "\n".join(rows) + "\n"


# ----------------------------------------------------------------- workers


@dataclass(frozen=True)
class _Job:
    iteration: int
    index: int
    gen_cfg: GenConfig
    solve_cfg: SolveConfig


def _run_job(job: _Job) -> tuple[_Job, str, dict[str, int], SolveResult]:
    program = generate(job.gen_cfg)
    result = solve(program, job.solve_cfg)
    return job, serialize_program(program), program.counts(), result


def _make_job(iteration: int, index: int, master: int, gen_cfg: GenConfig, solve_cfg: SolveConfig) -> _Job:
    return _Job(
        iteration,
        index,
        replace(gen_cfg, extra_steps=iteration, seed=derive_seed(master, iteration, index, 0)),
        replace(solve_cfg, seed=derive_seed(master, iteration, index, 1)),
    )


def _map(jobs: list[_Job], pool):
    if pool is None:
        return map(_run_job, jobs)
    return pool.map(_run_job, jobs)


def build_corpus(
    n_per_iteration: Mapping[int, int],
    gen_cfg: GenConfig | None = None,
    solve_cfg: SolveConfig | None = None,
    render_cfg: RenderConfig | None = None,
    out_dir: str | Path = "corpus",
    master_seed: int = 0,
    budget_factor: float = 3.0,
    jobs: int = 1,
    png: bool = False,
) -> CorpusStats:
    """Attempt instances until each iteration level has its requested number
    of solved instances or its attempt budget is spent.

    Writes ``manifest.jsonl`` (solved instances only), ``attempts.jsonl``
    (every attempt), ``stats.json`` and one SVG (and optional PNG) per
    solved instance under ``out_dir``.
    """
    gen_cfg = gen_cfg or GenConfig()
    solve_cfg = solve_cfg or SolveConfig()
    render_cfg = render_cfg or RenderConfig()
    out = Path(out_dir)
    (out / "diagrams").mkdir(parents=True, exist_ok=True)
    stats = CorpusStats()
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        with open(out / "manifest.jsonl", "w", encoding="utf-8") as manifest, \
                open(out / "attempts.jsonl", "w", encoding="utf-8") as attempts:
            for iteration, requested in sorted(n_per_iteration.items()):
                st = IterationStats(requested=requested)
                stats.iterations[iteration] = st
                budget = int(round(budget_factor * requested))
                next_index = 0
                while st.solved < requested and st.attempted < budget:
                    batch = min(requested - st.solved, budget - st.attempted)
                    batch_jobs = [_make_job(iteration, next_index + i, master_seed, gen_cfg, solve_cfg)
                                  for i in range(batch)]
                    next_index += batch
                    for job, text, counts, result in _map(batch_jobs, pool):
                        st.attempted += 1
                        inst = Instance(
                            id=f"it{iteration}-{job.index:06d}",
                            iteration=iteration,
                            program=text,
                            status=result.status.value,
                            gen_seed=job.gen_cfg.seed,
                            solve_seed=job.solve_cfg.seed,
                        )
                        attempts.write(json.dumps({"id": inst.id, "iteration": iteration, "status": inst.status,
                                                   "iterations": result.iterations}) + "\n")
                        if not result.solved:
                            continue
                        st.solved += 1
                        st.add_literals(counts)
                        program = parse_program(text)
                        svg = render_svg(result, program, render_cfg)
                        svg_rel = f"diagrams/{inst.id}.svg"
                        (out / svg_rel).write_text(svg, encoding="utf-8")
                        inst.svg = svg_rel
                        if png:
                            png_rel = f"diagrams/{inst.id}.png"
                            (out / png_rel).write_bytes(to_png(rasterize(svg, render_cfg)))
                            inst.png = png_rel
                        inst.scene = result.as_dict()
                        manifest.write(json.dumps(inst.to_record()) + "\n")
                if st.solved < requested:
                    st.budget_exhausted = True
                    log.warning("iteration %d: budget exhausted with %d/%d solved", iteration, st.solved, requested)
    finally:
        if pool is not None:
            pool.shutdown()
    (out / "stats.json").write_text(json.dumps(stats.as_dict(), indent=2) + "\n", encoding="utf-8")
    return stats


def survey(
    attempts_per_iteration: Mapping[int, int],
    gen_cfg: GenConfig | None = None,
    solve_cfg: SolveConfig | None = None,
    master_seed: int = 0,
    jobs: int = 1,
) -> CorpusStats:
    """Generate and solve a fixed number of programs per iteration level
    without writing artifacts. Used to measure success rates."""
    gen_cfg = gen_cfg or GenConfig()
    solve_cfg = solve_cfg or SolveConfig()
    stats = CorpusStats()
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        for iteration, n in sorted(attempts_per_iteration.items()):
            st = IterationStats(requested=n)
            batch = [_make_job(iteration, i, master_seed, gen_cfg, solve_cfg) for i in range(n)]
            for _, _, counts, result in _map(batch, pool):
                st.attempted += 1
                st.solved += result.solved
                st.add_literals(counts)
            stats.iterations[iteration] = st
    finally:
        if pool is not None:
            pool.shutdown()
    return stats


def load_corpus(manifest_path: str | Path) -> list[Instance]:
    path = Path(manifest_path)
    base = path.parent
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
                inst = Instance.from_record(rec)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorruptRecord(path, n, f"unreadable record ({exc})") from None
            if rec.get("schema") != SCHEMA:
                raise CorruptRecord(path, n, f"unsupported schema {rec.get('schema')!r}")
            try:
                bad = errors(parse_program(inst.program))
            except ValueError as exc:
                raise CorruptRecord(path, n, f"program does not parse ({exc})") from None
            if bad:
                raise CorruptRecord(path, n, f"program invalid: {bad[0]}")
            for artifact in (inst.svg, inst.png):
                if artifact and not (base / artifact).exists():
                    warnings.warn(f"{path}: line {n}: missing artifact {artifact}", stacklevel=2)
            out.append(inst)
    return out


def write_manifest(instances: Iterable[Instance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record()) + "\n")


def stats_from_manifest(instances: Iterable[Instance], attempts_path: str | Path | None = None) -> CorpusStats:
    """Recompute per-iteration stats from a manifest.

    Literal means are taken over the manifest's (solved) programs. Success
    rates need the attempts log, since the manifest holds solved instances only.
    """
    instances = list(instances)
    by_it: dict[int, IterationStats] = defaultdict(IterationStats)
    for inst in instances:
        by_it[inst.iteration].add_literals(parse_program(inst.program).counts())
    if attempts_path is not None and Path(attempts_path).exists():
        with open(attempts_path, encoding="utf-8") as fh:
            for raw in fh:
                if raw.strip():
                    rec = json.loads(raw)
                    st = by_it[int(rec["iteration"])]
                    st.attempted += 1
                    st.solved += rec["status"] == "Solved"
    else:
        for inst in instances:
            st = by_it[inst.iteration]
            st.attempted += 1
            st.solved += inst.status == "Solved"
    for st in by_it.values():
        st.requested = st.attempted
    return CorpusStats(dict(sorted(by_it.items())))
