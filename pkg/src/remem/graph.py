"""The hybrid memory graph: gist and phrase nodes joined by relation, context
and synonymy edges.

Ids are dense integers handed out in insertion order, one counter per node or
edge family.  Nothing is ever removed or rewritten once added.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .temporal import TimeScope


class GraphError(Exception):
    pass


class EmptyPhrase(GraphError, ValueError):
    pass


class UnknownNode(GraphError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else "unknown node"


class FrozenGraph(GraphError):
    pass


_WS = re.compile(r"\s+")


def phrase_key(name: str) -> str:
    """Dedup key for phrase nodes: case-folded, whitespace-collapsed."""
    return _WS.sub(" ", name).strip().casefold()


@dataclass(frozen=True)
class GistNode:
    gist_id: int
    text: str
    scope: Optional[TimeScope]
    source_chunk: str


@dataclass(frozen=True)
class PhraseNode:
    phrase_id: int
    name: str


@dataclass(frozen=True)
class RelationEdge:
    edge_id: int
    subject: int
    predicate: str
    object: int
    scope: Optional[TimeScope]
    source_chunk: str


@dataclass(frozen=True)
class ContextEdge:
    gist: int
    phrase: int


@dataclass(frozen=True)
class SynonymyEdge:
    a: int
    b: int
    similarity: float


@dataclass
class BuildConfig:
    synonymy_threshold: float = 0.8
    extractor: str = "rule"
    embedder: str = "mock"
    bm25_k1: float = 1.2
    bm25_b: float = 0.75

    def to_json(self) -> dict:
        return {
            "synonymy_threshold": self.synonymy_threshold,
            "extractor": self.extractor,
            "embedder": self.embedder,
            "bm25_k1": self.bm25_k1,
            "bm25_b": self.bm25_b,
        }


@dataclass(frozen=True)
class GraphStats:
    phrase_nodes: int = 0
    gist_nodes: int = 0
    relation_edges: int = 0
    context_edges: int = 0
    synonymy_edges: int = 0
    triples: int = 0
    mean_phrase_degree: float = 0.0
    mean_gist_degree: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Neighborhood:
    phrases: List[PhraseNode] = field(default_factory=list)
    facts: List[RelationEdge] = field(default_factory=list)
    synonym_gists: List[GistNode] = field(default_factory=list)

    def __iter__(self):
        return iter((self.phrases, self.facts, self.synonym_gists))


class MemoryGraph:
    """Append-only typed multigraph plus the vectors that back semantic search.

    ``gist_vectors`` and ``fact_vectors`` hold one unit row per gist/fact in id
    order once the graph has been embedded.  Derived lookup structures used by
    retrieval are cached in ``_derived`` and dropped on every mutation.
    """

    def __init__(self, build_config: Optional[BuildConfig] = None) -> None:
        self.build_config = build_config or BuildConfig()
        self.gists: List[GistNode] = []
        self.phrases: List[PhraseNode] = []
        self.relations: List[RelationEdge] = []
        self.contexts: List[ContextEdge] = []
        self.synonyms: List[SynonymyEdge] = []
        self.gist_vectors: Optional[np.ndarray] = None
        self.fact_vectors: Optional[np.ndarray] = None
        self.frozen = False
        self.skipped_chunks: List[str] = []
        self._phrase_by_key: Dict[str, int] = {}
        self._context_pairs: set = set()
        self._gist_phrases: Dict[int, List[int]] = {}
        self._phrase_gists: Dict[int, List[int]] = {}
        self._phrase_relations: Dict[int, List[int]] = {}
        self._synonym_adj: Dict[int, List[Tuple[int, float]]] = {}
        self._derived: dict = {}

    # -- mutation ---------------------------------------------------------

    def _check_writable(self) -> None:
        if self.frozen:
            raise FrozenGraph("graph is frozen")
        self._derived.clear()

    def upsert_phrase(self, name: str) -> int:
        key = phrase_key(name or "")
        if not key:
            raise EmptyPhrase("phrase name is empty")
        pid = self._phrase_by_key.get(key)
        if pid is not None:
            return pid
        self._check_writable()
        pid = len(self.phrases)
        self.phrases.append(PhraseNode(pid, _WS.sub(" ", name).strip()))
        self._phrase_by_key[key] = pid
        return pid

    def add_gist(self, text: str, scope: Optional[TimeScope], chunk: str) -> int:
        if not text or not text.strip():
            raise GraphError("gist text is empty")
        self._check_writable()
        gid = len(self.gists)
        self.gists.append(GistNode(gid, text, scope, chunk))
        return gid

    def add_fact(
        self,
        subject: str,
        predicate: str,
        obj: str,
        scope: Optional[TimeScope],
        chunk: str,
    ) -> int:
        if not predicate or not predicate.strip():
            raise EmptyPhrase("predicate is empty")
        if not phrase_key(subject or "") or not phrase_key(obj or ""):
            raise EmptyPhrase("subject and object must be non-empty")
        self._check_writable()
        s = self.upsert_phrase(subject)
        o = self.upsert_phrase(obj)
        eid = len(self.relations)
        self.relations.append(RelationEdge(eid, s, predicate.strip(), o, scope, chunk))
        self._phrase_relations.setdefault(s, []).append(eid)
        if o != s:
            self._phrase_relations.setdefault(o, []).append(eid)
        return eid

    def bind_context(self, gist_ids: Sequence[int], phrase_ids: Sequence[int]) -> int:
        for gid in gist_ids:
            self._require_gist(gid)
        for pid in phrase_ids:
            self._require_phrase(pid)
        self._check_writable()
        added = 0
        for gid in gist_ids:
            for pid in phrase_ids:
                if (gid, pid) in self._context_pairs:
                    continue
                self._context_pairs.add((gid, pid))
                self.contexts.append(ContextEdge(gid, pid))
                self._gist_phrases.setdefault(gid, []).append(pid)
                self._phrase_gists.setdefault(pid, []).append(gid)
                added += 1
        return added

    def add_synonym(self, a: int, b: int, similarity: float) -> bool:
        """Add an undirected synonymy edge; returns False if it already exists."""
        self._require_gist(a)
        self._require_gist(b)
        if a == b:
            raise GraphError("synonymy edge needs two distinct gists")
        if similarity < self.build_config.synonymy_threshold:
            raise GraphError(
                f"similarity {similarity} below threshold {self.build_config.synonymy_threshold}"
            )
        a, b = min(a, b), max(a, b)
        if self.has_synonym(a, b):
            return False
        self._check_writable()
        self.synonyms.append(SynonymyEdge(a, b, float(similarity)))
        self._synonym_adj.setdefault(a, []).append((b, float(similarity)))
        self._synonym_adj.setdefault(b, []).append((a, float(similarity)))
        return True

    def freeze(self) -> "MemoryGraph":
        self.frozen = True
        return self

    # -- queries ----------------------------------------------------------

    def _require_gist(self, gid: int) -> GistNode:
        if not isinstance(gid, (int, np.integer)) or not 0 <= gid < len(self.gists):
            raise UnknownNode(f"unknown gist id {gid!r}")
        return self.gists[gid]

    def _require_phrase(self, pid: int) -> PhraseNode:
        if not isinstance(pid, (int, np.integer)) or not 0 <= pid < len(self.phrases):
            raise UnknownNode(f"unknown phrase id {pid!r}")
        return self.phrases[pid]

    def gist(self, gid: int) -> GistNode:
        return self._require_gist(gid)

    def phrase(self, pid: int) -> PhraseNode:
        return self._require_phrase(pid)

    def relation(self, eid: int) -> RelationEdge:
        if not isinstance(eid, (int, np.integer)) or not 0 <= eid < len(self.relations):
            raise UnknownNode(f"unknown relation id {eid!r}")
        return self.relations[eid]

    def find_phrase(self, name: str) -> Optional[int]:
        return self._phrase_by_key.get(phrase_key(name or ""))

    def has_synonym(self, a: int, b: int) -> bool:
        return any(other == b for other, _ in self._synonym_adj.get(a, ()))

    def has_context(self, gid: int, pid: int) -> bool:
        return (gid, pid) in self._context_pairs

    def phrases_of_gist(self, gid: int) -> List[int]:
        return list(self._gist_phrases.get(gid, ()))

    def gists_of_phrase(self, pid: int) -> List[int]:
        return list(self._phrase_gists.get(pid, ()))

    def relations_of_phrase(self, pid: int) -> List[int]:
        return list(self._phrase_relations.get(pid, ()))

    def neighbors_of_gist(self, gid: int) -> Neighborhood:
        node = self._require_gist(gid)
        pids = sorted(self._gist_phrases.get(gid, ()))
        edge_ids = set()
        for pid in pids:
            for eid in self._phrase_relations.get(pid, ()):
                if self.relations[eid].source_chunk == node.source_chunk:
                    edge_ids.add(eid)
        syn = sorted(self._synonym_adj.get(gid, ()), key=lambda t: (-t[1], t[0]))
        return Neighborhood(
            phrases=[self.phrases[p] for p in pids],
            facts=[self.relations[e] for e in sorted(edge_ids)],
            synonym_gists=[self.gists[o] for o, _ in syn],
        )

    def synonyms_of(self, gid: int) -> List[Tuple[int, float]]:
        self._require_gist(gid)
        return sorted(self._synonym_adj.get(gid, ()), key=lambda t: (-t[1], t[0]))

    def stats(self) -> GraphStats:
        return graph_stats(self)

    def phrase_name(self, pid: int) -> str:
        return self.phrases[pid].name

    def __repr__(self) -> str:
        s = self.stats()
        return (
            f"MemoryGraph(gists={s.gist_nodes}, phrases={s.phrase_nodes}, "
            f"relations={s.relation_edges}, contexts={s.context_edges}, "
            f"synonyms={s.synonymy_edges}, frozen={self.frozen})"
        )


def graph_stats(g: MemoryGraph) -> GraphStats:
    """Counts and mean degrees; a degree counts incident edges of every family."""
    n_p, n_g = len(g.phrases), len(g.gists)
    n_rel, n_ctx, n_syn = len(g.relations), len(g.contexts), len(g.synonyms)
    return GraphStats(
        phrase_nodes=n_p,
        gist_nodes=n_g,
        relation_edges=n_rel,
        context_edges=n_ctx,
        synonymy_edges=n_syn,
        triples=n_rel,
        mean_phrase_degree=(2 * n_rel + n_ctx) / n_p if n_p else 0.0,
        mean_gist_degree=(n_ctx + 2 * n_syn) / n_g if n_g else 0.0,
    )


def check_integrity(g: MemoryGraph) -> List[str]:
    """Referential-integrity problems, empty when the graph is consistent."""
    problems = []
    n_g, n_p = len(g.gists), len(g.phrases)
    for i, node in enumerate(g.gists):
        if node.gist_id != i:
            problems.append(f"gist {i} has id {node.gist_id}")
    for i, node in enumerate(g.phrases):
        if node.phrase_id != i:
            problems.append(f"phrase {i} has id {node.phrase_id}")
    for e in g.relations:
        if not (0 <= e.subject < n_p and 0 <= e.object < n_p):
            problems.append(f"relation {e.edge_id} points outside phrases")
    seen = set()
    for c in g.contexts:
        if not (0 <= c.gist < n_g and 0 <= c.phrase < n_p):
            problems.append(f"context {c} points outside nodes")
        if (c.gist, c.phrase) in seen:
            problems.append(f"duplicate context {c}")
        seen.add((c.gist, c.phrase))
    for s in g.synonyms:
        if not (0 <= s.a < s.b < n_g):
            problems.append(f"synonym {s} malformed")
    keys = [phrase_key(p.name) for p in g.phrases]
    if len(set(keys)) != len(keys):
        problems.append("duplicate phrase keys")
    return problems


def iter_facts(g: MemoryGraph) -> Iterable[Tuple[str, str, str, RelationEdge]]:
    for e in g.relations:
        yield g.phrases[e.subject].name, e.predicate, g.phrases[e.object].name, e
