"""Episodic memory over a hybrid graph of event gists and time-scoped facts."""

__version__ = "0.1.0"

from .agent import AgentConfig, Answer, Mode, ScriptedPlanner, run_iterative, run_single
from .clients import ChatClient, EmbeddingClient, HashEmbeddingProvider, StubChatProvider
from .exploration import EntityQuery, find_entity_contexts, find_gist_contexts
from .extraction import Episode, FactRecord, GistRecord, ReplayExtractor, RuleExtractor
from .graph import MemoryGraph, graph_stats
from .indexing import IndexConfig, build_graph
from .retrieval import lexical_retrieve, semantic_retrieve
from .snapshot import load_snapshot, save_snapshot
from .temporal import TemporalConstraint, TimeInstant, TimeScope, parse_instant, satisfies

__all__ = [
    "AgentConfig", "Answer", "ChatClient", "EmbeddingClient", "EntityQuery", "Episode",
    "FactRecord", "GistRecord", "HashEmbeddingProvider", "IndexConfig", "MemoryGraph", "Mode",
    "ReplayExtractor", "RuleExtractor", "ScriptedPlanner", "StubChatProvider", "TemporalConstraint",
    "TimeInstant", "TimeScope", "build_graph", "find_entity_contexts", "find_gist_contexts",
    "graph_stats", "lexical_retrieve", "load_snapshot", "parse_instant", "run_iterative",
    "run_single", "satisfies", "save_snapshot", "semantic_retrieve",
]
