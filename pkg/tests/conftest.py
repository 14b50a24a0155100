from __future__ import annotations

import json
import os
import socket
from pathlib import Path

import pytest

from remem.clients import EmbeddingClient, HashEmbeddingProvider
from remem.extraction import Episode, FactRecord, GistRecord, ReplayExtractor
from remem.indexing import IndexConfig, build_graph

FIXTURES = Path(__file__).parent / "fixtures"

NETWORK_ATTEMPTS: list = []


class NetworkBlocked(RuntimeError):
    pass


def _blocked(*args, **kwargs):
    NETWORK_ATTEMPTS.append(args[:2])
    raise NetworkBlocked(f"network access attempted: {args[1:2]}")


@pytest.fixture(autouse=True)
def network_guard(request, monkeypatch):
    if request.node.get_closest_marker("live"):
        if not os.environ.get("REMEM_CHAT_API_KEY") or not os.environ.get("REMEM_EMBED_API_KEY"):
            pytest.skip("live credentials not configured")
        yield
        return
    monkeypatch.setattr(socket.socket, "connect", _blocked)
    monkeypatch.setattr(socket.socket, "connect_ex", _blocked)
    monkeypatch.setattr(socket, "create_connection", lambda *a, **k: _blocked(None, *a))
    monkeypatch.setattr(socket, "getaddrinfo", lambda *a, **k: _blocked(None, *a))
    for var in ("REMEM_CHAT_API_KEY", "REMEM_EMBED_API_KEY", "REMEM_CACHE_DIR"):
        monkeypatch.delenv(var, raising=False)
    yield


@pytest.fixture
def embedder():
    return EmbeddingClient(HashEmbeddingProvider(dim=64, seed=0))


def messi_records():
    data = json.loads((FIXTURES / "messi_replay.json").read_text(encoding="utf-8"))
    facts = [
        FactRecord(f["subject"], f["predicate"], f["object"],
                   {"point_in_time": f["point_in_time"]} if f["point_in_time"] else {})
        for f in data["facts"]
    ]
    return data["chunk_id"], [GistRecord(t) for t in data["gists"]], facts


@pytest.fixture
def messi_graph(embedder):
    cid, gists, facts = messi_records()
    extractor = ReplayExtractor({cid: gists}, {cid: facts})
    return build_graph([Episode(cid, text="passage")], IndexConfig(), extractor, embedder)


def load_corpus(name="corpus.jsonl"):
    rows = (FIXTURES / name).read_text(encoding="utf-8").splitlines()
    return [Episode.from_json(json.loads(r)) for r in rows if r.strip()]


@pytest.fixture
def corpus():
    return load_corpus()


@pytest.fixture
def corpus_graph(corpus, embedder):
    return build_graph(corpus, IndexConfig(), embedder=embedder)


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so the hermeticity check sees every other test
    items.sort(key=lambda item: item.nodeid.startswith("tests/test_acceptance.py"))


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[number])
