"""Corpus to memory graph: extraction, graph population, embedding, synonymy."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .clients import EmbeddingClient, EmbeddingUnavailable
from .extraction import Episode, FactRecord, GistRecord, MalformedExtraction, RuleExtractor
from .graph import BuildConfig, MemoryGraph
from .render import render_fact, render_gist
from .retrieval import indexes_for

logger = logging.getLogger(__name__)

SYNONYMY_BLOCK = 2048


class IndexingError(ValueError):
    pass


@dataclass
class IndexConfig:
    synonymy_threshold: float = 0.8
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    jobs: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.synonymy_threshold <= 1.0:
            raise IndexingError("threshold must be in (0,1]")
        if self.jobs < 1:
            raise IndexingError("jobs must be >= 1")


@dataclass
class ExtractedEpisode:
    episode: Episode
    gists: List[GistRecord] = field(default_factory=list)
    facts: List[FactRecord] = field(default_factory=list)
    skipped: bool = False


def _extract(extractor, episode: Episode) -> ExtractedEpisode:
    try:
        gists = extractor.extract_gists(episode)
        facts = extractor.extract_facts(episode, gists)
    except MalformedExtraction as exc:
        logger.warning(
            "skipping chunk %s: malformed extraction (%s); raw output: %r",
            episode.chunk_id, exc, exc.raw[:500],
        )
        return ExtractedEpisode(episode, skipped=True)
    return ExtractedEpisode(episode, list(gists), list(facts))


def extract_corpus(corpus: Sequence[Episode], extractor, jobs: int = 1) -> List[ExtractedEpisode]:
    """Extract every episode; output is ordered by chunk id whatever ``jobs`` is."""
    ordered = sorted(corpus, key=lambda e: e.chunk_id)
    if jobs == 1:
        return [_extract(extractor, e) for e in ordered]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda e: _extract(extractor, e), ordered))


def populate(g: MemoryGraph, extracted: Sequence[ExtractedEpisode]) -> None:
    for item in extracted:
        chunk = item.episode.chunk_id
        if item.skipped:
            g.skipped_chunks.append(chunk)
            continue
        gist_ids = [g.add_gist(r.text, r.scope, chunk) for r in item.gists]
        phrase_ids: List[int] = []
        for f in item.facts:
            eid = g.add_fact(f.subject, f.predicate, f.object, f.scope, chunk)
            e = g.relations[eid]
            for pid in (e.subject, e.object):
                if pid not in phrase_ids:
                    phrase_ids.append(pid)
        g.bind_context(gist_ids, phrase_ids)


def embed_all(items: Sequence[str], embedder: Optional[EmbeddingClient]) -> np.ndarray:
    """Unit-norm float32 rows, one per item."""
    if embedder is None:
        raise EmbeddingUnavailable("no embedding client configured")
    return embedder.embed(list(items))


def similar_pairs(vectors: np.ndarray, theta: float, block: int = SYNONYMY_BLOCK
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All index pairs i < j with cosine >= theta, by exact blocked scan."""
    n = vectors.shape[0]
    v = np.ascontiguousarray(vectors, dtype=np.float64)
    gi, gj, sims = [], [], []
    for r0 in range(0, n, block):
        rows = v[r0 : r0 + block]
        for c0 in range(r0, n, block):
            sim = np.ascontiguousarray(rows @ v[c0 : c0 + block].T)
            a, b, s = kernels.threshold_pairs(sim, r0, c0, float(theta))
            gi.append(a)
            gj.append(b)
            sims.append(s)
    if not gi:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    a, b, s = np.concatenate(gi), np.concatenate(gj), np.concatenate(sims)
    order = np.lexsort((b, a))
    return a[order], b[order], s[order]


def synonymy_pass(g: MemoryGraph, theta: Optional[float] = None) -> int:
    theta = g.build_config.synonymy_threshold if theta is None else theta
    if not g.gists:
        return 0
    if g.gist_vectors is None or g.gist_vectors.shape[0] != len(g.gists):
        raise EmbeddingUnavailable("gists must be embedded before the synonymy pass")
    added = 0
    for a, b, s in zip(*similar_pairs(g.gist_vectors, theta)):
        added += g.add_synonym(int(a), int(b), float(s))
    return added


def build_graph(
    corpus: Sequence[Episode],
    cfg: Optional[IndexConfig] = None,
    extractor=None,
    embedder: Optional[EmbeddingClient] = None,
) -> MemoryGraph:
    cfg = cfg or IndexConfig()
    extractor = extractor or RuleExtractor()
    if not corpus:
        raise IndexingError("corpus is empty")
    ids = [e.chunk_id for e in corpus]
    if len(set(ids)) != len(ids):
        raise IndexingError("chunk ids must be unique")
    if embedder is None:
        raise EmbeddingUnavailable("no embedding client configured")

    g = MemoryGraph(
        BuildConfig(
            synonymy_threshold=cfg.synonymy_threshold,
            extractor=getattr(extractor, "tag", type(extractor).__name__),
            embedder=embedder.tag,
            bm25_k1=cfg.bm25_k1,
            bm25_b=cfg.bm25_b,
        )
    )
    populate(g, extract_corpus(corpus, extractor, cfg.jobs))
    g.gist_vectors = embed_all([render_gist(n) for n in g.gists], embedder)
    g.fact_vectors = embed_all([render_fact(g, e) for e in g.relations], embedder)
    synonymy_pass(g, cfg.synonymy_threshold)
    g.freeze()
    indexes_for(g)
    return g
