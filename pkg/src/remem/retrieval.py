"""Stage-one tools: ``semantic_retrieve`` (cosine) and ``lexical_retrieve`` (BM25).

Gists and facts are scored in separate indexes and each tool returns the
top-k of both lists, after the temporal filter.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from . import kernels
from .filtering import ScopeArrays, constraint_mask
from .graph import MemoryGraph
from .render import render_fact, render_gist
from .temporal import NO_CONSTRAINT, TemporalConstraint, TimeScope

DEFAULT_TOP_K = 10

_TOKEN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> List[str]:
    """Case-fold and split on anything that is not a letter or digit."""
    return _TOKEN.findall(text.casefold()) if text else []


class Bm25Index:
    """Inverted index with CSR postings; scoring runs in :mod:`remem.kernels`.

    IDF is the non-negative ``ln(1 + (N - n + 0.5) / (n + 0.5))`` variant.
    """

    def __init__(self, docs: Sequence[str], k1: float = 1.2, b: float = 0.75) -> None:
        self.k1 = float(k1)
        self.b = float(b)
        self.n_docs = len(docs)
        self.vocab: Dict[str, int] = {}
        postings: List[Dict[int, int]] = []
        lengths = np.zeros(self.n_docs, dtype=np.float64)
        for d, text in enumerate(docs):
            toks = tokenize(text)
            lengths[d] = len(toks)
            for tok in toks:
                t = self.vocab.setdefault(tok, len(self.vocab))
                if t == len(postings):
                    postings.append({})
                postings[t][d] = postings[t].get(d, 0) + 1
        self.doc_len = lengths
        total = float(lengths.sum())
        self.avgdl = total / self.n_docs if self.n_docs and total > 0 else 1.0
        indptr = np.zeros(len(postings) + 1, dtype=np.int64)
        for t, plist in enumerate(postings):
            indptr[t + 1] = indptr[t] + len(plist)
        self.indptr = indptr
        self.post_doc = np.empty(indptr[-1], dtype=np.int64)
        self.post_tf = np.empty(indptr[-1], dtype=np.float64)
        for t, plist in enumerate(postings):
            lo = indptr[t]
            for j, (d, tf) in enumerate(sorted(plist.items())):
                self.post_doc[lo + j] = d
                self.post_tf[lo + j] = tf
        self.df = np.diff(indptr)

    def idf(self, term: str) -> float:
        t = self.vocab.get(term)
        n = 0 if t is None else int(self.df[t])
        return math.log(1.0 + (self.n_docs - n + 0.5) / (n + 0.5))

    def scores(self, query: str) -> np.ndarray:
        terms: List[int] = []
        for tok in tokenize(query):
            t = self.vocab.get(tok)
            if t is not None and t not in terms:
                terms.append(t)
        if not terms or self.n_docs == 0:
            return np.zeros(self.n_docs, dtype=np.float64)
        term_arr = np.asarray(terms, dtype=np.int64)
        n = self.df[term_arr].astype(np.float64)
        idf = np.log(1.0 + (self.n_docs - n + 0.5) / (n + 0.5))
        return kernels.bm25_scores(
            self.indptr, self.post_doc, self.post_tf, self.doc_len,
            term_arr, idf, self.k1, self.b, self.avgdl,
        )


@dataclass(frozen=True)
class RetrievalHit:
    kind: str  # "gist" | "fact"
    item: int
    score: float
    rendered: str
    scope: Optional[TimeScope]

    def to_json(self) -> dict:
        key = "text" if self.kind == "gist" else "rendered"
        return {
            "id": self.item,
            key: self.rendered,
            "scope": self.scope.to_json() if self.scope else None,
            "score": round(self.score, 6),
        }


@dataclass
class RetrievalResult:
    gists: List[RetrievalHit] = field(default_factory=list)
    facts: List[RetrievalHit] = field(default_factory=list)

    def __iter__(self) -> Iterator[List[RetrievalHit]]:
        return iter((self.gists, self.facts))

    def to_json(self) -> dict:
        return {
            "gists": [h.to_json() for h in self.gists],
            "facts": [h.to_json() for h in self.facts],
        }


@dataclass
class GraphIndexes:
    gist_texts: List[str]
    fact_texts: List[str]
    gist_bm25: Bm25Index
    fact_bm25: Bm25Index
    gist_scopes: ScopeArrays
    fact_scopes: ScopeArrays


def indexes_for(g: MemoryGraph) -> GraphIndexes:
    """Lexical index and scope arrays for ``g``, built once and cached on it."""
    cached = g._derived.get("indexes")
    if cached is not None:
        return cached
    cfg = g.build_config
    gist_texts = [render_gist(n) for n in g.gists]
    fact_texts = [render_fact(g, e) for e in g.relations]
    idx = GraphIndexes(
        gist_texts=gist_texts,
        fact_texts=fact_texts,
        gist_bm25=Bm25Index(gist_texts, cfg.bm25_k1, cfg.bm25_b),
        fact_bm25=Bm25Index(fact_texts, cfg.bm25_k1, cfg.bm25_b),
        gist_scopes=ScopeArrays.from_scopes([n.scope for n in g.gists]),
        fact_scopes=ScopeArrays.from_scopes([e.scope for e in g.relations]),
    )
    g._derived["indexes"] = idx
    return idx


def top_k(scores: np.ndarray, mask: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k best masked scores, descending, ties by ascending index."""
    cand = np.flatnonzero(mask)
    if cand.size == 0 or k <= 0:
        return cand[:0]
    s = scores[cand]
    order = np.lexsort((cand, -s))
    return cand[order[:k]]


def _hits(kind, ids, scores, texts, scopes) -> List[RetrievalHit]:
    return [
        RetrievalHit(kind, int(i), float(scores[i]), texts[i], scopes[i]) for i in ids
    ]


def lexical_retrieve(
    g: MemoryGraph,
    query: str,
    c: TemporalConstraint = NO_CONSTRAINT,
    k: int = DEFAULT_TOP_K,
) -> RetrievalResult:
    idx = indexes_for(g)
    gs = idx.gist_bm25.scores(query)
    fs = idx.fact_bm25.scores(query)
    g_ids = top_k(gs, constraint_mask(idx.gist_scopes, c) & (gs > 0), k)
    f_ids = top_k(fs, constraint_mask(idx.fact_scopes, c) & (fs > 0), k)
    return RetrievalResult(
        _hits("gist", g_ids, gs, idx.gist_texts, [n.scope for n in g.gists]),
        _hits("fact", f_ids, fs, idx.fact_texts, [e.scope for e in g.relations]),
    )


def semantic_retrieve(
    g: MemoryGraph,
    query: str,
    c: TemporalConstraint = NO_CONSTRAINT,
    k: int = DEFAULT_TOP_K,
    embedder=None,
) -> RetrievalResult:
    """Cosine top-k; ``embedder`` must be the client the graph was built with."""
    if embedder is None:
        from .clients import EmbeddingUnavailable

        raise EmbeddingUnavailable("semantic_retrieve needs an embedding client")
    idx = indexes_for(g)
    q = np.asarray(embedder.embed_one(query), dtype=np.float64)
    gs = _cosines(g.gist_vectors, q, len(g.gists))
    fs = _cosines(g.fact_vectors, q, len(g.relations))
    g_ids = top_k(gs, constraint_mask(idx.gist_scopes, c), k)
    f_ids = top_k(fs, constraint_mask(idx.fact_scopes, c), k)
    return RetrievalResult(
        _hits("gist", g_ids, gs, idx.gist_texts, [n.scope for n in g.gists]),
        _hits("fact", f_ids, fs, idx.fact_texts, [e.scope for e in g.relations]),
    )


def _cosines(vectors: Optional[np.ndarray], q: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    if vectors is None or vectors.shape[0] != n:
        from .clients import EmbeddingUnavailable

        raise EmbeddingUnavailable("graph has no embeddings for semantic retrieval")
    if vectors.shape[1] != q.shape[0]:
        from .clients import DimensionMismatch

        raise DimensionMismatch(f"query dim {q.shape[0]} != index dim {vectors.shape[1]}")
    return vectors.astype(np.float64) @ q
