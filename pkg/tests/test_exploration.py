from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remem.exploration import (
    BadWindow,
    EmptyQuery,
    EntityQuery,
    find_entity_contexts,
    find_gist_contexts,
)
from remem.graph import MemoryGraph, UnknownNode
from remem.temporal import TemporalConstraint, TimeScope, satisfies

from .gen import random_graph, random_query_args, to_entity_query
from .oracles import entity_oracle


def test_messi_enrollment(messi_graph):
    res = find_entity_contexts(messi_graph, EntityQuery(subject="Lionel Messi", predicate="enrolled"))
    assert len(res.facts) == 1
    fact = res.facts[0]
    assert fact.scope == TimeScope.at("2002-02")
    assert messi_graph.phrase_name(fact.object) == "the Royal Spanish Football Federation (RFEF)"
    assert len(res.gists) == 10  # all gists in the chunk are bound to the fact's phrases


def test_messi_first_fact(messi_graph):
    res = find_entity_contexts(messi_graph, EntityQuery(subject="Lionel Messi", ordering="chrono_asc", limit=1))
    assert [f.predicate for f in res.facts] == ["was enrolled in"]
    last = find_entity_contexts(messi_graph, EntityQuery(subject="Lionel Messi", ordering="chrono_desc", limit=1))
    assert last.facts[0].predicate == "received an offer to join"


def test_messi_count_in_2002(messi_graph):
    c = TemporalConstraint.build("2002-01", "2002-12")
    res = find_entity_contexts(messi_graph, EntityQuery(subject="Lionel Messi", constraint=c, aggregation="count"))
    expect = sum(1 for e in messi_graph.relations
                 if messi_graph.phrase_name(e.subject) == "Lionel Messi" and satisfies(e.scope, c))
    assert res.count == expect == 7
    assert res.to_json(messi_graph) == {"count": 7}
    # across every listed fact, regardless of subject
    assert sum(1 for e in messi_graph.relations if satisfies(e.scope, c)) == 9


def test_query_validation():
    with pytest.raises(EmptyQuery):
        EntityQuery()
    with pytest.raises(EmptyQuery):
        EntityQuery(subject="  ")
    with pytest.raises(BadWindow):
        EntityQuery(subject="x", offset=2)
    with pytest.raises(BadWindow):
        EntityQuery(subject="x", limit=0)


def test_substring_fallback(messi_graph):
    res = find_entity_contexts(messi_graph, EntityQuery(object="RFEF"))
    assert len(res.facts) == 1


def _gist_graph():
    g = MemoryGraph()
    a = g.add_gist("anchor", TimeScope.at("2002"), "c1")
    b = g.add_gist("twin", TimeScope.at("2002"), "c2")
    e1 = g.add_fact("A", "r", "B", TimeScope.at("2002-02"), "c1")
    e2 = g.add_fact("A", "s", "C", TimeScope.at("2005"), "c1")
    pids = sorted({p for e in (e1, e2) for p in (g.relations[e].subject, g.relations[e].object)})
    g.bind_context([a], pids)
    g.add_synonym(a, b, 0.9)
    return g.freeze(), a


def test_gist_contexts():
    g, a = _gist_graph()
    res = find_gist_contexts(g, a)
    assert (len(res.gists), len(res.facts)) == (2, 2)
    c = TemporalConstraint.build("2002", "2002")
    res = find_gist_contexts(g, a, c)
    expect = [e for e in g.neighbors_of_gist(a).facts if satisfies(e.scope, c)]
    assert (len(res.gists), res.facts) == (2, expect)
    assert len(expect) == 1
    with pytest.raises(UnknownNode):
        find_gist_contexts(g, 99)


def test_window_algebra():
    g = random_graph(random.Random(3), 120)
    base = dict(subject="entity 1", ordering="chrono_asc")
    full = find_entity_contexts(g, EntityQuery(**base)).facts
    for n in range(4):
        assert find_entity_contexts(g, EntityQuery(**base, offset=n)).facts == full[n:]
    assert find_entity_contexts(g, EntityQuery(**base, aggregation="count")).count == len(full)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 200))
def test_entity_contexts_match_oracle(seed, n_facts):
    rng = random.Random(seed)
    g = random_graph(rng, n_facts)
    for _ in range(3):
        args = random_query_args(rng)
        res = find_entity_contexts(g, to_entity_query(args))
        ids, total = entity_oracle(g, args.get("subject"), args.get("obj"), args.get("predicate"),
                                   args["constraint"], args["ordering"], args["limit"], args["offset"])
        assert [e.edge_id for e in res.facts] == ids
        assert find_entity_contexts(g, to_entity_query(args, count=True)).count == total
