"""Command line entry point: ``geoforge <subcommand>``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Settings resolve as flag > config file (``--config`` or ./geoforge.json) >
``GEOFORGE_SEED`` (seed only) > built-in default.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from pathlib import Path

from . import __version__
from .dsl import DSLError, parse_program, serialize_program
from .generator import GenConfig, generate
from .pairgen import ParserTranslator, ProcessAdapter, StubSampler, generate_pairs
from .pipeline import build_corpus, derive_seed, load_corpus, stats_from_manifest, survey
from .render import RenderConfig, rasterize, render_svg, to_png
from .scoring import score
from .solver import SolveConfig, SolveResult, solve

CONFIG_NAME = "geoforge.json"


class ConfigError(ValueError):
    pass


def _non_negative(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not an integer") from None
    if n < 0:
        raise argparse.ArgumentTypeError(f"{value} must be >= 0")
    return n


def _positive(value: str) -> int:
    n = _non_negative(value)
    if n == 0:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _iteration_range(value: str) -> list[int]:
    try:
        if "-" in value:
            lo, hi = (int(v) for v in value.split("-", 1))
            return list(range(lo, hi + 1))
        return [int(v) for v in value.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad iteration list {value!r}") from None


def load_config(path: str | None) -> dict:
    if path is None:
        if not Path(CONFIG_NAME).exists():
            return {}
        path = CONFIG_NAME
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def resolve_seed(flag: int | None, config: dict) -> int:
    if flag is not None:
        return flag
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get("GEOFORGE_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"GEOFORGE_SEED={env!r} is not an integer") from None
    return 0


def _configs(args, config: dict) -> tuple[GenConfig, SolveConfig, RenderConfig]:
    try:
        gen = GenConfig.from_dict(dict(config.get("generator", {})))
        sol = SolveConfig.from_dict(dict(config.get("solver", {})))
        ren = RenderConfig(**config.get("render", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if getattr(args, "max_iters", None) is not None:
        sol.max_iters = args.max_iters
    return gen, sol, ren


def _read_program(path: str):
    return parse_program(Path(path).read_text(encoding="utf-8"))


# ------------------------------------------------------------- subcommands


def cmd_generate(args, config) -> int:
    gen, _, _ = _configs(args, config)
    seed = resolve_seed(args.seed, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        gen.extra_steps = args.iterations
        gen.seed = derive_seed(seed, args.iterations, i, 0)
        path = out / f"it{args.iterations}-{i:06d}.geodsl"
        path.write_text(serialize_program(generate(gen)), encoding="utf-8")
        print(path)
    return 0


def cmd_solve(args, config) -> int:
    _, sol, _ = _configs(args, config)
    sol.seed = resolve_seed(args.seed, config)
    program = _read_program(args.file)
    result = solve(program, sol)
    text = result.to_json(indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    if args.json:
        print(text)
    else:
        print(f"{result.status.value}\titerations={result.iterations}\tattempts={result.attempts}")
    return 0


def cmd_render(args, config) -> int:
    _, sol, ren = _configs(args, config)
    program = _read_program(args.file)
    if args.scene:
        result = SolveResult.from_dict(json.loads(Path(args.scene).read_text(encoding="utf-8")))
    else:
        sol.seed = resolve_seed(args.seed, config)
        result = solve(program, sol)
    if not result.solved:
        print(f"error: {args.file} is unsolvable; nothing rendered", file=sys.stderr)
        return 1
    svg = render_svg(result, program, ren)
    out = Path(args.out)
    out.write_text(svg, encoding="utf-8")
    print(out)
    if args.png:
        png = out.with_suffix(".png")
        png.write_bytes(to_png(rasterize(svg, ren)))
        print(png)
    return 0


def cmd_score(args, config) -> int:
    report = score(_read_program(args.truth), _read_program(args.pred))
    if args.json:
        print(report.to_json())
        return 0
    print(f"overall\t{100 * report.overall:.2f}")
    print("category\tP\tR\tF1")
    for name, cs in report.categories.items():
        print(f"{name}\t{100 * cs.precision:.2f}\t{100 * cs.recall:.2f}\t{100 * cs.f1:.2f}")
    return 0


def _emit_stats(stats, args) -> None:
    if args.json:
        print(json.dumps(stats.as_dict(), indent=2))
    else:
        sys.stdout.write(stats.table())
    if args.plot_dir:
        from .report import write_stats_report

        paths = write_stats_report(stats, args.plot_dir)
        print(f"wrote {paths['table']} and {paths['figure']}", file=sys.stderr)


def cmd_stats(args, config) -> int:
    manifest = Path(args.manifest)
    attempts = Path(args.attempts) if args.attempts else manifest.with_name("attempts.jsonl")
    stats = stats_from_manifest(load_corpus(manifest), attempts)
    _emit_stats(stats, args)
    return 0


def cmd_survey(args, config) -> int:
    gen, sol, _ = _configs(args, config)
    seed = resolve_seed(args.seed, config)
    stats = survey({k: args.attempts for k in args.iterations}, gen, sol, seed, args.jobs)
    _emit_stats(stats, args)
    return 0


def cmd_pipeline(args, config) -> int:
    gen, sol, ren = _configs(args, config)
    seed = resolve_seed(args.seed, config)
    pcfg = config.get("pipeline", {})
    counts = pcfg.get("counts")
    if args.counts:
        counts = {k: args.counts for k in args.iterations}
    if not counts:
        raise ConfigError("pipeline needs --counts or a pipeline.counts object in the config")
    counts = {int(k): int(v) for k, v in counts.items()}
    jobs = args.jobs if args.jobs is not None else int(pcfg.get("jobs", 1))
    budget = args.budget_factor if args.budget_factor is not None else float(pcfg.get("budget_factor", 3.0))
    png = args.png or bool(pcfg.get("png", False))
    out = Path(args.out or pcfg.get("out_dir", "corpus"))
    stats = build_corpus(counts, gen, sol, ren, out, seed, budget, jobs, png)
    args.plot_dir = args.plot_dir or str(out)
    _emit_stats(stats, args)
    exhausted = [k for k, s in stats.iterations.items() if s.budget_exhausted]
    if exhausted:
        print(f"warning: attempt budget exhausted for iterations {exhausted}", file=sys.stderr)
    return 0


def _component(name: str, cmd: str | None, kind: str):
    if name == "stub":
        return StubSampler() if kind == "sampler" else ParserTranslator()
    if name == "process":
        if not cmd:
            raise ConfigError(f"--{kind} process needs --{kind}-cmd")
        return ProcessAdapter(shlex.split(cmd))
    raise ConfigError(f"unknown {kind} {name!r}")


def cmd_pairgen(args, config) -> int:
    seed = resolve_seed(args.seed, config)
    corpus = load_corpus(args.manifest)
    sampler = _component(args.sampler, args.sampler_cmd, "sampler")
    translator = _component(args.translator, args.translator_cmd, "translator")
    try:
        pairs = generate_pairs(corpus, sampler, translator, args.n_samples, args.delta_min, seed, args.jobs)
    finally:
        for c in (sampler, translator):
            if isinstance(c, ProcessAdapter):
                c.close()
    lines = "".join(p.to_json() + "\n" for p in pairs)
    if args.out:
        Path(args.out).write_text(lines, encoding="utf-8")
        print(f"{len(pairs)} pairs -> {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(lines)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geoforge", description="Generate, solve, render and score GeoDSL programs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help=f"JSON config file (default: ./{CONFIG_NAME} if present)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write generated programs as .geodsl files")
    g.add_argument("--iterations", type=_non_negative, required=True)
    g.add_argument("--count", type=_non_negative, required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one program")
    s.add_argument("file")
    s.add_argument("--seed", type=int)
    s.add_argument("--max-iters", type=_positive)
    s.add_argument("--json", action="store_true")
    s.add_argument("--out", help="also write the result JSON here")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("render", help="solve (or load a solved scene) and write SVG")
    r.add_argument("file")
    r.add_argument("--scene", help="solve result JSON to render instead of solving")
    r.add_argument("--seed", type=int)
    r.add_argument("--max-iters", type=_positive)
    r.add_argument("--out", required=True)
    r.add_argument("--png", action="store_true", help="also write a PNG next to the SVG")
    r.set_defaults(func=cmd_render)

    c = sub.add_parser("score", help="score a predicted program against the truth")
    c.add_argument("--truth", required=True)
    c.add_argument("--pred", required=True)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_score)

    for name, func, helptext in (("stats", cmd_stats, "per-iteration statistics of a manifest"),):
        t = sub.add_parser(name, help=helptext)
        t.add_argument("manifest")
        t.add_argument("--attempts", help="attempt log (default: attempts.jsonl next to the manifest)")
        t.add_argument("--json", action="store_true")
        t.add_argument("--plot-dir", help="write stats.tsv and stats_sr.png here")
        t.set_defaults(func=func)

    v = sub.add_parser("survey", help="measure solving success rate per iteration level")
    v.add_argument("--iterations", type=_iteration_range, default=[1, 2, 3, 4, 5])
    v.add_argument("--attempts", type=_positive, default=500)
    v.add_argument("--seed", type=int)
    v.add_argument("--max-iters", type=_positive)
    v.add_argument("--jobs", type=_positive, default=1)
    v.add_argument("--json", action="store_true")
    v.add_argument("--plot-dir")
    v.set_defaults(func=cmd_survey)

    pl = sub.add_parser("pipeline", help="build a corpus: generate, solve, render, manifest")
    pl.add_argument("--iterations", type=_iteration_range, default=[1, 2, 3, 4, 5])
    pl.add_argument("--counts", type=_non_negative, help="solved instances wanted per iteration level")
    pl.add_argument("--seed", type=int)
    pl.add_argument("--out")
    pl.add_argument("--jobs", type=_positive)
    pl.add_argument("--budget-factor", type=float)
    pl.add_argument("--max-iters", type=_positive)
    pl.add_argument("--png", action="store_true")
    pl.add_argument("--json", action="store_true")
    pl.add_argument("--plot-dir")
    pl.set_defaults(func=cmd_pipeline)

    pg = sub.add_parser("pairgen", help="build preference pairs from a manifest")
    pg.add_argument("--manifest", required=True)
    pg.add_argument("--sampler", default="stub", choices=["stub", "process"])
    pg.add_argument("--sampler-cmd")
    pg.add_argument("--translator", default="stub", choices=["stub", "process"])
    pg.add_argument("--translator-cmd")
    pg.add_argument("--n-samples", type=_positive, default=10)
    pg.add_argument("--delta-min", type=float, default=0.3)
    pg.add_argument("--seed", type=int)
    pg.add_argument("--jobs", type=_positive, default=1)
    pg.add_argument("--out")
    pg.set_defaults(func=cmd_pairgen)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DSLError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
