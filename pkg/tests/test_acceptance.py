"""The ten acceptance criteria, one test each, each recording a PASS/FAIL line.

The lines are printed in the terminal summary (see ``conftest.py``) and when
the module is run with ``python -m tests.test_acceptance``.
"""

from __future__ import annotations

import json
import random
import time
from contextlib import contextmanager
from datetime import date

import numpy as np
import pytest

from remem.agent import AgentConfig, EchoSynthesizer, PlannerDecision, ScriptedPlanner, ToolCall, run_iterative
from remem.clients import EmbeddingClient, HashEmbeddingProvider
from remem.eval.metrics import REFUSAL, bleu1, exact_match, refusal_score, token_f1
from remem.eval.tot import CATEGORIES, generate, run_benchmark
from remem.exploration import EntityQuery, find_entity_contexts
from remem.extraction import Episode, FactRecord, GistRecord, ReplayExtractor
from remem.graph import graph_stats
from remem.indexing import IndexConfig, build_graph, similar_pairs
from remem.retrieval import Bm25Index
from remem.snapshot import FILES, save_snapshot
from remem.temporal import TemporalConstraint, TimeScope, satisfies

from . import conftest
from .bm25_corpus import DOCS, QUERIES
from .gen import random_graph, random_query_args, to_entity_query
from .oracles import bm25_exhaustive, day_overlap, entity_oracle, iso, rank, synonym_pairs_n2

RESULTS: dict = {}


@contextmanager
def criterion(number: int, title: str):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        RESULTS[number] = f"FAIL  {number:>2}. {title}: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}"
        raise
    RESULTS[number] = f"PASS  {number:>2}. {title} ({time.perf_counter() - t0:.2f}s)"


def embedder():
    return EmbeddingClient(HashEmbeddingProvider(dim=64, seed=0))


# 1 -------------------------------------------------------------------------

def _day_case(rng: random.Random, day0: int):
    def day():
        return day0 + rng.randrange(0, 120)

    kind = rng.choice(["none", "point", "interval"])
    if kind == "none":
        scope = None
    elif kind == "point":
        d = day()
        scope = (d, d)
    else:
        a = day() if rng.random() < 0.85 else None
        b = day() if rng.random() < 0.85 else None
        if a is not None and b is not None and a > b:
            a, b = b, a
        scope = (a, b)
    start = (rng.choice(["GE", "GT", "EQ"]), day()) if rng.random() < 0.7 else None
    end = (rng.choice(["LE", "LT", "EQ"]), day()) if rng.random() < 0.7 else None
    return kind, scope, start, end


def test_01_temporal_oracle():
    with criterion(1, "temporal oracle, 10,000 day-granular pairs"):
        rng = random.Random(1)
        day0 = date(2021, 3, 1).toordinal()
        universe = (day0 - 5, day0 + 125)
        cases = []
        for _ in range(10_000):
            kind, scope, start, end = _day_case(rng, day0)
            if kind == "none":
                s = None
            elif kind == "point":
                s = TimeScope.at(iso(scope[0]))
            else:
                s = TimeScope.between(*(None if d is None else iso(d) for d in scope))
            c = TemporalConstraint.build(iso(start[1]) if start else None, iso(end[1]) if end else None,
                                         start[0] if start else "GE", end[0] if end else "LE")
            cases.append((s, c, day_overlap(scope, start, end, universe)))
        t0 = time.perf_counter()
        mismatches = sum(satisfies(s, c) != want for s, c, want in cases)
        elapsed = time.perf_counter() - t0
        assert mismatches == 0, f"{mismatches} disagreements with day enumeration"
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


# 2 -------------------------------------------------------------------------

def test_02_exploration_oracle():
    with criterion(2, "exploration oracle, 1,000 queries on graphs of <= 500 facts"):
        rng = random.Random(2)
        t0 = time.perf_counter()
        done = 0
        while done < 1000:
            g = random_graph(rng, rng.randrange(1, 501))
            for _ in range(20):
                args = random_query_args(rng)
                res = find_entity_contexts(g, to_entity_query(args))
                count = find_entity_contexts(g, to_entity_query(args, count=True)).count
                ids, total = entity_oracle(g, args.get("subject"), args.get("obj"), args.get("predicate"),
                                           args["constraint"], args["ordering"], args["limit"], args["offset"])
                assert [e.edge_id for e in res.facts] == ids, args
                assert count == total, args
                done += 1
        elapsed = time.perf_counter() - t0
        assert elapsed < 30.0, f"took {elapsed:.2f}s"


# 3 -------------------------------------------------------------------------

def test_03_edge_laws_and_synonymy():
    with criterion(3, "edge laws on 50 corpora; synonymy equals the full scan at 2,000 gists"):
        rng = random.Random(3)
        for corpus_no in range(50):
            gists, facts, episodes = {}, {}, []
            want_relations = want_contexts = 0
            for d in range(rng.randrange(1, 8)):
                cid = f"k{corpus_no}-d{d}"
                n_g, n_f = rng.randrange(0, 5), rng.randrange(0, 5)
                # phrases unique to the episode; a few facts reuse a phrase inside it
                names = [f"p{corpus_no}x{d}x{i}" for i in range(rng.randrange(2, 6))]
                rows = [FactRecord(rng.choice(names), "rel", rng.choice(names)) for _ in range(n_f)]
                gists[cid] = [GistRecord(f"gist {corpus_no} {d} {i}") for i in range(n_g)]
                facts[cid] = rows
                episodes.append(Episode(cid, text="x"))
                phrases = {r.subject for r in rows} | {r.object for r in rows}
                want_relations += n_f
                want_contexts += n_g * len(phrases)
            g = build_graph(episodes, IndexConfig(), ReplayExtractor(gists, facts), embedder())
            assert len(g.relations) == want_relations
            assert len(g.contexts) == want_contexts

        v = np.random.default_rng(3).normal(size=(2000, 8))
        v = (v / np.linalg.norm(v, axis=1, keepdims=True)).astype(np.float32)
        a, b, _ = similar_pairs(v, 0.9)
        want = synonym_pairs_n2(v, 0.9)
        assert want, "threshold produced no pairs"
        assert set(zip(a.tolist(), b.tolist())) == want


# 4 -------------------------------------------------------------------------

def test_04_bm25():
    with criterion(4, "BM25 equals the formula to 1e-9 and the exhaustive ranking"):
        import math

        idx = Bm25Index(DOCS)
        # "red fox red fox" (doc 9): tf 2 for both terms, 4 tokens, avgdl 5.4
        n_docs, dl, avgdl = 10, 4, 54 / 10
        total = 0.0
        for df in (2, 3):  # "red" in docs 4, 9; "fox" in docs 2, 7, 9
            idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
            total += idf * 2 * 2.2 / (2 + 1.2 * (0.25 + 0.75 * dl / avgdl))
        assert abs(idx.scores("red fox")[9] - total) <= 1e-9
        for q in QUERIES:
            ours, ref = idx.scores(q), bm25_exhaustive(DOCS, q)
            assert np.max(np.abs(ours - np.asarray(ref))) <= 1e-9
            assert rank(ours, 10) == rank(ref, 10)


# 5 -------------------------------------------------------------------------

def _rows(refusals, correct, unanswerable, total):
    rows = [(REFUSAL, True)] * correct + [("", False)] * (refusals - correct)
    rows += [("answer", True)] * (unanswerable - correct)
    return rows + [("answer", False)] * (total - len(rows))


@pytest.mark.xfail(strict=True, reason="the target refusal figures imply 444 unanswerable, not 446")
def test_05_refusal_arithmetic():
    with criterion(5, "refusal arithmetic 344/252/446 gives 73.3/56.8/64.0 within 0.1"):
        s = refusal_score(_rows(344, 252, 446, 1986))
        got = (100 * s.precision, 100 * s.recall, 100 * s.f1)
        for value, target in zip(got, (73.3, 56.8, 64.0)):
            assert abs(value - target) <= 0.1, "got P/R/F1 = {:.2f}/{:.2f}/{:.2f}".format(*got)


# 6 -------------------------------------------------------------------------

def test_06_metric_spot_values():
    with criterion(6, "metric spot values"):
        assert abs(token_f1("outdoor gear company", "deal with an outdoor gear company") - 0.75) <= 1e-9
        assert exact_match("1947", "1947") == 1
        assert exact_match("The Punahou School", "punahou school") == 1
        assert exact_match("1947", "1948") == 0
        assert bleu1("the cat sat on the mat", "the cat sat on the mat") == 1.0


# 7 -------------------------------------------------------------------------

def test_07_temporal_micro_benchmark():
    with criterion(7, "micro-benchmark, 50 per category, EM 100%, under 60s"):
        instances = generate(per_category=50, seed=7)
        assert all(sum(i.category == c for i in instances) >= 50 for c in CATEGORIES)
        report, seconds = run_benchmark(instances, embedder())
        per_cat = {c: report.mean("em", c) for c in CATEGORIES}
        assert all(v == 100.0 for v in per_cat.values()), per_cat
        assert seconds < 60.0, f"took {seconds:.1f}s"


# 8 -------------------------------------------------------------------------

def test_08_determinism(tmp_path):
    with criterion(8, "byte-identical snapshots and repeatable agent runs"):
        corpus = conftest.load_corpus()
        traces = []
        for name in ("a", "b"):
            g = build_graph(corpus, IndexConfig(), embedder=embedder())
            save_snapshot(g, tmp_path / name)
            planner = ScriptedPlanner([
                PlannerDecision("look", ToolCall("semantic_retrieve", {"query": "puppy"})),
                PlannerDecision("expand", ToolCall("find_gist_contexts", {"gist_id": 0})),
                PlannerDecision("entity", ToolCall("find_entity_contexts", {"subject": "Caroline"})),
            ])
            ans = run_iterative(g, "What did Caroline adopt?", AgentConfig(max_steps=4), planner,
                                EchoSynthesizer(), embedder())
            traces.append(json.dumps([ans.text, ans.trace(), ans.tool_calls], sort_keys=True))
        for f in FILES:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
        assert traces[0] == traces[1]


# 9 -------------------------------------------------------------------------

def test_09_hermeticity():
    with criterion(9, "no network calls during the suite (live smoke skipped without credentials)"):
        import socket

        before = list(conftest.NETWORK_ATTEMPTS)
        with pytest.raises(conftest.NetworkBlocked):
            socket.create_connection(("example.invalid", 80))
        del conftest.NETWORK_ATTEMPTS[len(before):]
        assert before == [], f"{len(before)} network attempts: {before[:3]}"


# 10 ------------------------------------------------------------------------

def test_10_messi_replay():
    with criterion(10, "replayed extraction: 10 gists, 14 relations, enrollment dated 2002-02"):
        cid, gists, facts = conftest.messi_records()
        g = build_graph([Episode(cid, text="passage")], IndexConfig(),
                        ReplayExtractor({cid: gists}, {cid: facts}), embedder())
        stats = graph_stats(g)
        assert (stats.gist_nodes, stats.relation_edges) == (10, 14)
        res = find_entity_contexts(g, EntityQuery(subject="Lionel Messi", predicate="enrolled"))
        assert len(res.facts) == 1
        assert res.facts[0].scope == TimeScope.at("2002-02")


if __name__ == "__main__":  # pragma: no cover
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
