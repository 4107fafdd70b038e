from __future__ import annotations

import sys
import textwrap

import numpy as np
import pytest

from geoforge.dsl import parse_program, serialize_program
from geoforge.pairgen import (ParserTranslator, ProcessAdapter, StubSampler, TranslationError, drop_line,
                              generate_pairs, score_sample, select_pairs, stub_sampler)
from geoforge.pipeline import Instance
from geoforge.scoring import score


def listing_reference(scores, delta_min):
    """Independent two-pointer scan written with 1-based pointers."""
    n = len(scores)
    ranked = sorted(enumerate(scores), key=lambda kv: kv[1], reverse=True)  # stable
    pairs = []
    w, l = 1, n // 2 + 1
    while w <= n // 2 and l <= n:
        sw, sl = ranked[w - 1][1], ranked[l - 1][1]
        if sw - sl > delta_min:
            pairs.append((ranked[w - 1][0], ranked[l - 1][0]))
            w += 1
            l += 1
        else:
            l += 1
    return pairs


def _inst(text, id_="x"):
    return Instance(id_, 1, text, "Solved", 0, 0)


def test_hand_trace():
    scores = [1.0, 0.9, 0.8, 0.2, 0.1, 0.0]
    pairs = select_pairs(scores, 0.3)
    assert [(scores[w], scores[l]) for w, l in pairs] == [(1.0, 0.2), (0.9, 0.1), (0.8, 0.0)]


def test_shuffled_input_and_skips():
    assert select_pairs([0.2, 1.0, 0.0, 0.9], 0.3) == [(1, 0), (3, 2)]
    assert select_pairs([0.5] * 10, 0.3) == []
    # the second winner finds no loser far enough below it
    assert select_pairs([1.0, 0.6, 0.5, 0.3], 0.45) == [(0, 2)]


def test_matches_listing_on_random_vectors():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        n = int(rng.integers(0, 13))
        if rng.random() < 0.3:
            scores = list(rng.integers(0, 5, n) / 4)  # many ties
        else:
            scores = list(rng.random(n))
        delta = float(rng.choice([0.0, 0.1, 0.3, 0.5]))
        got = select_pairs(scores, delta)
        assert got == listing_reference(scores, delta)
        assert len(got) <= n // 2
        assert all(scores[w] - scores[l] > delta for w, l in got)


def test_score_sample(full):
    text = serialize_program(full)
    inst = _inst(text)
    tr = ParserTranslator()
    assert score_sample(inst, text, tr) == 1.0
    assert score_sample(inst, "this is not GeoDSL (", tr) == 0.0
    relabeled = text.replace("C", "Q")
    s = score_sample(inst, relabeled, tr)
    assert s < 1.0 and s == score(full, parse_program(relabeled)).overall


def test_stub_level_zero_is_exact(full):
    text = serialize_program(full)
    assert stub_sampler(_inst(text), 0, np.random.default_rng(1)) == text


def test_stub_monotone_in_level():
    from geoforge.generator import GenConfig, generate

    progs = (generate(GenConfig(extra_steps=3, seed=s)) for s in range(400))
    corpus = [_inst(serialize_program(p)) for p in progs if all(p.counts().values())][:60]
    assert len(corpus) == 60
    tr = ParserTranslator()
    means = []
    for level in range(5):
        rng = np.random.default_rng(level)
        vals = [score_sample(i, stub_sampler(i, level, rng), tr) for i in corpus for _ in range(3)]
        means.append(np.mean(vals))
    assert all(b <= a for a, b in zip(means, means[1:]))
    assert means[0] == 1.0 and means[-1] < 0.9


def test_drop_unconstrained_line_touches_only_lines(full):
    # line_1 (AB) appears in no constraint
    pred = drop_line(full, 0)
    rep = score(full, pred)
    assert rep.points.f1 == rep.circles.f1 == rep.constraints.f1 == 1.0
    assert rep.lines.f1 < 1.0
    assert pred.constraints[0].args == (2, 0)


def test_generate_pairs_invariants_and_jobs(full, triangle):
    corpus = [_inst(serialize_program(full), "a"), _inst(serialize_program(triangle), "b")]
    sampler, tr = StubSampler(), ParserTranslator()
    p1 = generate_pairs(corpus, sampler, tr, n_samples=10, delta_min=0.3, seed=4)
    p2 = generate_pairs(corpus, sampler, tr, n_samples=10, delta_min=0.3, seed=4, jobs=3)
    assert p1 == p2 and p1
    for p in p1:
        assert p.s_w - p.s_l > 0.3
    assert sum(p.id == "a" for p in p1) <= 5
    with pytest.raises(ValueError):
        generate_pairs(corpus, sampler, tr, n_samples=1)


ADAPTER = textwrap.dedent("""
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        if req["op"] == "sample":
            text = req["program"] if req["seed"] % 2 else "garbage("
            print(json.dumps({"text": text}), flush=True)
        elif req["text"].startswith("garbage"):
            print(json.dumps({"error": "cannot translate"}), flush=True)
        else:
            print(json.dumps({"program": req["text"]}), flush=True)
""")


def test_process_adapter(tmp_path, full):
    script = tmp_path / "adapter.py"
    script.write_text(ADAPTER)
    inst = _inst(serialize_program(full))
    with ProcessAdapter([sys.executable, str(script)]) as proc:
        assert proc.translate(inst.program) == full
        with pytest.raises(TranslationError):
            proc.translate("garbage(")
        pairs = generate_pairs([inst], proc, proc, n_samples=8, delta_min=0.3, seed=1, jobs=2)
    assert pairs and all(p.s_w == 1.0 and p.s_l == 0.0 for p in pairs)
