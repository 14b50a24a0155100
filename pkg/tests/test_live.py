"""End-to-end smoke run against real model endpoints; skipped without credentials."""

from __future__ import annotations

import pytest

from remem.agent import AgentConfig, LLMPlanner, LLMSynthesizer, answer_question
from remem.clients import ChatClient, EmbeddingClient
from remem.extraction import LLMExtractor

from .conftest import load_corpus

pytestmark = pytest.mark.live


def test_index_and_answer_live():
    from remem.indexing import IndexConfig, build_graph

    chat = ChatClient.from_env()
    embedder = EmbeddingClient.from_env()
    g = build_graph(load_corpus()[:3], IndexConfig(), LLMExtractor(chat), embedder)
    assert g.gists
    ans = answer_question(g, "What did Caroline adopt?", AgentConfig(max_steps=3),
                          LLMPlanner(chat), LLMSynthesizer(chat), embedder)
    assert isinstance(ans.text, str) and ans.text
