from __future__ import annotations

import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from remem.clients import EmbeddingClient, EmbeddingUnavailable, StaticEmbeddingProvider
from remem.extraction import Episode, FactRecord, GistRecord, MalformedExtraction, ReplayExtractor
from remem.graph import check_integrity, graph_stats
from remem.indexing import (
    IndexConfig,
    IndexingError,
    build_graph,
    embed_all,
    similar_pairs,
)

from .oracles import synonym_pairs_n2


def replay(gists, facts):
    return ReplayExtractor(gists, facts)


def counts(g):
    s = graph_stats(g)
    return (s.gist_nodes, s.phrase_nodes, s.relation_edges, s.context_edges, s.synonymy_edges)


def test_one_gist_one_fact(embedder):
    ex = replay({"c": [GistRecord("Ann met Bob.")]}, {"c": [FactRecord("Ann", "met", "Bob")]})
    g = build_graph([Episode("c", text="x")], IndexConfig(), ex, embedder)
    assert counts(g) == (1, 2, 1, 2, 0)
    assert check_integrity(g) == []


def test_identical_gists_become_synonyms(embedder):
    ex = replay({"a": [GistRecord("Same words.")], "b": [GistRecord("Same words.")]}, {})
    g = build_graph([Episode("a", text="x"), Episode("b", text="y")], IndexConfig(), ex, embedder)
    assert len(g.gists) == 2
    assert len(g.synonyms) == 1
    assert (g.synonyms[0].a, g.synonyms[0].b) == (0, 1)


@pytest.mark.parametrize("vectors,expected", [
    ({"g1": [1, 0], "g2": [1, 0]}, 1),
    ({"g1": [1, 0], "g2": [0, 1]}, 0),
])
def test_synonymy_on_static_vectors(vectors, expected):
    emb = EmbeddingClient(StaticEmbeddingProvider(vectors))
    ex = replay({"a": [GistRecord("g1")], "b": [GistRecord("g2")]}, {})
    g = build_graph([Episode("a", text="x"), Episode("b", text="y")], IndexConfig(), ex, emb)
    assert len(g.synonyms) == expected


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 60), st.integers(0, 2**31 - 1), st.sampled_from([0.3, 0.6, 0.9, 1.0]),
       st.sampled_from([1, 7, 2048]))
def test_similar_pairs_matches_full_scan(n, seed, theta, block):
    rng = np.random.default_rng(seed)
    # few distinct directions so that high thresholds still produce pairs
    base = rng.normal(size=(4, 5))
    v = base[rng.integers(0, 4, size=n)] + 0.05 * rng.normal(size=(n, 5))
    v = (v / np.linalg.norm(v, axis=1, keepdims=True)).astype(np.float32) if n else v.reshape(0, 5)
    a, b, _ = similar_pairs(v, theta, block=block)
    assert set(zip(a.tolist(), b.tolist())) == synonym_pairs_n2(v, theta)
    assert all(x < y for x, y in zip(a, b))


def test_embed_all(embedder):
    assert embed_all([], embedder).shape == (0, 64)
    with pytest.raises(EmbeddingUnavailable):
        embed_all(["x"], None)


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.5])
def test_threshold_validation(bad):
    with pytest.raises(IndexingError, match="threshold"):
        IndexConfig(synonymy_threshold=bad)
    assert IndexConfig(synonymy_threshold=1.0).synonymy_threshold == 1.0


def test_corpus_validation(embedder):
    with pytest.raises(IndexingError):
        build_graph([], IndexConfig(), embedder=embedder)
    with pytest.raises(IndexingError):
        build_graph([Episode("a", text="x"), Episode("a", text="y")], embedder=embedder)
    with pytest.raises(EmbeddingUnavailable):
        build_graph([Episode("a", text="x")])


class Broken(ReplayExtractor):
    def extract_facts(self, episode, gists):
        if episode.chunk_id == "bad":
            raise MalformedExtraction("not json", raw="{{{")
        return super().extract_facts(episode, gists)


def test_malformed_chunk_is_skipped(embedder, caplog):
    ex = Broken({"ok": [GistRecord("Fine.")], "bad": [GistRecord("Lost.")]},
                {"ok": [FactRecord("A", "knows", "B")]})
    with caplog.at_level(logging.WARNING):
        g = build_graph([Episode("ok", text="x"), Episode("bad", text="y")], IndexConfig(), ex, embedder)
    assert g.skipped_chunks == ["bad"]
    assert [n.text for n in g.gists] == ["Fine."]
    assert "{{{" in caplog.text


def test_parallel_extraction_same_graph(corpus, embedder):
    one = build_graph(corpus, IndexConfig(jobs=1), embedder=embedder)
    four = build_graph(list(reversed(corpus)), IndexConfig(jobs=4), embedder=embedder)
    assert [(n.text, n.source_chunk) for n in one.gists] == [(n.text, n.source_chunk) for n in four.gists]
    assert [(e.subject, e.predicate, e.object) for e in one.relations] == \
        [(e.subject, e.predicate, e.object) for e in four.relations]
    assert np.array_equal(one.gist_vectors, four.gist_vectors)
    assert counts(one) == counts(four)


def test_corpus_graph_is_consistent(corpus_graph):
    assert check_integrity(corpus_graph) == []
    assert corpus_graph.frozen
    assert corpus_graph.gist_vectors.shape[0] == len(corpus_graph.gists)
    assert corpus_graph.fact_vectors.shape[0] == len(corpus_graph.relations)
