from __future__ import annotations

import json

import pytest

from geoforge.dsl import errors, parse_program
from geoforge.generator import GenConfig
from geoforge.pipeline import (CorpusStats, CorruptRecord, build_corpus, derive_seed, load_corpus, splitmix64,
                               stats_from_manifest, survey, write_manifest)
from geoforge.solver import SolveConfig


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    stats = build_corpus({1: 4, 2: 3}, out_dir=out, master_seed=9, png=True)
    return out, stats


def test_splitmix_reference_values():
    # first outputs of the reference generator seeded with 0 and 1
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(1) == 0x910A2DEC89025CC1
    seeds = {derive_seed(0, it, i, s) for it in range(1, 6) for i in range(200) for s in (0, 1)}
    assert len(seeds) == 2000


def test_build_counts_and_files(corpus):
    out, stats = corpus
    insts = load_corpus(out / "manifest.jsonl")
    assert [i.iteration for i in insts].count(1) == 4
    assert [i.iteration for i in insts].count(2) == 3
    for inst in insts:
        assert inst.status == "Solved"
        assert errors(parse_program(inst.program)) == []
        assert (out / inst.svg).read_text().startswith("<?xml")
        assert (out / inst.png).read_bytes()[:4] == b"\x89PNG"
    assert stats.iterations[1].solved == 4
    assert json.loads((out / "stats.json").read_text()) == stats.as_dict()
    assert all(json.loads(l)["schema"] == 1 for l in (out / "manifest.jsonl").read_text().splitlines())


def test_stats_recomputed_from_manifest(corpus):
    out, stats = corpus
    again = stats_from_manifest(load_corpus(out / "manifest.jsonl"), out / "attempts.jsonl")
    for k, st in stats.iterations.items():
        assert (again.iterations[k].attempted, again.iterations[k].solved) == (st.attempted, st.solved)
        assert again.iterations[k].mean_literals == pytest.approx(st.mean_literals)
    assert "SR(%)" in again.table().splitlines()[0]
    assert CorpusStats.from_dict(stats.as_dict()).as_dict() == stats.as_dict()


def test_round_trip(corpus, tmp_path):
    out, _ = corpus
    insts = load_corpus(out / "manifest.jsonl")
    path = out / "copy.jsonl"
    write_manifest(insts, path)
    assert load_corpus(path) == insts


def test_deterministic_and_parallel_safe(corpus, tmp_path):
    out, _ = corpus
    build_corpus({1: 4, 2: 3}, out_dir=tmp_path / "a", master_seed=9, jobs=2)
    build_corpus({1: 4, 2: 3}, out_dir=tmp_path / "b", master_seed=9, jobs=1)
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()
    for svg in (tmp_path / "a" / "diagrams").iterdir():
        assert svg.read_bytes() == (tmp_path / "b" / "diagrams" / svg.name).read_bytes()


def test_empty_request(tmp_path):
    stats = build_corpus({}, out_dir=tmp_path)
    assert stats.iterations == {}
    assert (tmp_path / "manifest.jsonl").read_text() == ""
    assert load_corpus(tmp_path / "manifest.jsonl") == []


def test_truncated_line(corpus):
    out, _ = corpus
    lines = (out / "manifest.jsonl").read_text().splitlines()
    bad = out / "truncated.jsonl"
    bad.write_text("\n".join(lines[:2] + [lines[2][: len(lines[2]) // 2]]))
    with pytest.raises(CorruptRecord) as info:
        load_corpus(bad)
    assert info.value.line_no == 3
    assert "line 3" in str(info.value)


def test_invalid_program_rejected(corpus, tmp_path):
    out, _ = corpus
    rec = json.loads((out / "manifest.jsonl").read_text().splitlines()[0])
    rec["program"] = 'A = point(label="A")\nA = point(label="A")\n'
    bad = tmp_path / "m.jsonl"
    bad.write_text(json.dumps(rec) + "\n")
    with pytest.raises(CorruptRecord):
        load_corpus(bad)


def test_missing_svg_warns(corpus, tmp_path):
    out, _ = corpus
    rec = json.loads((out / "manifest.jsonl").read_text().splitlines()[0])
    rec["svg"] = "diagrams/nowhere.svg"
    rec["png"] = None
    path = tmp_path / "m.jsonl"
    path.write_text(json.dumps(rec) + "\n")
    with pytest.warns(UserWarning, match="nowhere.svg"):
        insts = load_corpus(path)
    assert len(insts) == 1


def test_budget_exhaustion(tmp_path):
    stats = build_corpus({1: 2}, solve_cfg=SolveConfig(max_iters=1, restarts=0), out_dir=tmp_path,
                         budget_factor=2.0)
    st = stats.iterations[1]
    assert st.budget_exhausted and st.attempted == 4 and st.solved == 0


def test_survey_matches_build(corpus):
    stats = survey({1: 6}, GenConfig(), SolveConfig(), master_seed=9)
    assert stats.iterations[1].attempted == 6
    assert 0 <= stats.iterations[1].success_rate <= 100
