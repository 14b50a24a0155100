"""Stage-two tools: neighbourhood expansion around a gist, and filtered fact
queries by subject/predicate/object with temporal windows, ordering, paging
and counting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .filtering import constraint_mask
from .graph import GistNode, MemoryGraph, RelationEdge, phrase_key
from .render import render_fact, render_gist
from .retrieval import indexes_for
from .temporal import NO_CONSTRAINT, TemporalConstraint, satisfies


class ExplorationError(ValueError):
    pass


class EmptyQuery(ExplorationError):
    pass


class BadWindow(ExplorationError):
    pass


class Ordering(str, enum.Enum):
    NONE = "none"
    CHRONO_ASC = "chrono_asc"
    CHRONO_DESC = "chrono_desc"

    @classmethod
    def parse(cls, value) -> "Ordering":
        if value is None or isinstance(value, cls):
            return value or cls.NONE
        v = str(value).strip().lower().replace("-", "_")
        aliases = {"asc": "chrono_asc", "ascending": "chrono_asc", "chronoasc": "chrono_asc",
                   "desc": "chrono_desc", "descending": "chrono_desc", "chronodesc": "chrono_desc",
                   "": "none", "null": "none"}
        return cls(aliases.get(v, v))


class Aggregation(str, enum.Enum):
    NONE = "none"
    COUNT = "count"

    @classmethod
    def parse(cls, value) -> "Aggregation":
        if value is None or isinstance(value, cls):
            return value or cls.NONE
        v = str(value).strip().lower()
        return cls("none" if v in ("", "null") else v)


@dataclass(frozen=True)
class EntityQuery:
    subject: Optional[str] = None
    object: Optional[str] = None
    predicate: Optional[str] = None
    constraint: TemporalConstraint = NO_CONSTRAINT
    limit: Optional[int] = None
    ordering: Ordering = Ordering.NONE
    offset: int = 0
    aggregation: Aggregation = Aggregation.NONE

    def __post_init__(self) -> None:
        object.__setattr__(self, "ordering", Ordering.parse(self.ordering))
        object.__setattr__(self, "aggregation", Aggregation.parse(self.aggregation))
        if not any((v or "").strip() for v in (self.subject, self.object, self.predicate)):
            raise EmptyQuery("set at least one of subject, object, predicate")
        if self.limit is not None and self.limit < 1:
            raise BadWindow("limit must be a positive integer")
        if self.offset < 0:
            raise BadWindow("offset must be non-negative")
        if self.offset and self.ordering is Ordering.NONE:
            raise BadWindow("offset requires an ordering")


@dataclass
class ContextResult:
    """Observation returned by the exploration tools."""

    gists: List[GistNode] = field(default_factory=list)
    facts: List[RelationEdge] = field(default_factory=list)
    count: Optional[int] = None
    aggregated: bool = False

    def __iter__(self):
        return iter((self.gists, self.facts))

    def to_json(self, g: MemoryGraph) -> dict:
        if self.aggregated:
            return {"count": self.count}
        return {
            "gists": [
                {"id": n.gist_id, "text": render_gist(n), "scope": n.scope.to_json() if n.scope else None}
                for n in self.gists
            ],
            "facts": [
                {"id": e.edge_id, "rendered": render_fact(g, e), "scope": e.scope.to_json() if e.scope else None}
                for e in self.facts
            ],
        }


def find_gist_contexts(
    g: MemoryGraph, gist_id: int, c: TemporalConstraint = NO_CONSTRAINT
) -> ContextResult:
    """The anchor gist, its synonyms inside the window, and its chunk's facts inside the window."""
    anchor = g.gist(gist_id)
    nb = g.neighbors_of_gist(gist_id)
    gists = [anchor] + [n for n in nb.synonym_gists if satisfies(n.scope, c)]
    facts = [e for e in nb.facts if satisfies(e.scope, c)]
    return ContextResult(gists, facts)


@dataclass
class _FactArrays:
    subject: np.ndarray
    object: np.ndarray
    predicate: np.ndarray  # index into predicates
    predicates: List[str]


def _fact_arrays(g: MemoryGraph) -> _FactArrays:
    cached = g._derived.get("fact_arrays")
    if cached is not None:
        return cached
    pred_ids: Dict[str, int] = {}
    pred = np.empty(len(g.relations), dtype=np.int64)
    for i, e in enumerate(g.relations):
        pred[i] = pred_ids.setdefault(e.predicate.casefold(), len(pred_ids))
    arrays = _FactArrays(
        subject=np.fromiter((e.subject for e in g.relations), dtype=np.int64, count=len(g.relations)),
        object=np.fromiter((e.object for e in g.relations), dtype=np.int64, count=len(g.relations)),
        predicate=pred,
        predicates=list(pred_ids),
    )
    g._derived["fact_arrays"] = arrays
    return arrays


def match_phrases(g: MemoryGraph, name: str) -> List[int]:
    """Exact dedup-key hit, else every phrase whose key contains the query key."""
    pid = g.find_phrase(name)
    if pid is not None:
        return [pid]
    key = phrase_key(name)
    if not key:
        return []
    return [p.phrase_id for p in g.phrases if key in phrase_key(p.name)]


def _chrono_order(ids: np.ndarray, earliest: np.ndarray, timed: np.ndarray, descending: bool) -> np.ndarray:
    untimed = (timed[ids] == 0).astype(np.int64)
    onset = earliest[ids]
    if descending:
        onset = -onset
    # lexsort: last key is primary.
    return ids[np.lexsort((ids, onset, untimed))]


def find_entity_contexts(g: MemoryGraph, q: EntityQuery) -> ContextResult:
    arrays = _fact_arrays(g)
    idx = indexes_for(g)
    mask = np.ones(len(g.relations), dtype=bool)
    if q.subject and q.subject.strip():
        mask &= np.isin(arrays.subject, match_phrases(g, q.subject))
    if q.object and q.object.strip():
        mask &= np.isin(arrays.object, match_phrases(g, q.object))
    if q.predicate and q.predicate.strip():
        needle = q.predicate.strip().casefold()
        hit = np.fromiter((needle in p for p in arrays.predicates), dtype=bool, count=len(arrays.predicates))
        mask &= hit[arrays.predicate]
    mask &= constraint_mask(idx.fact_scopes, q.constraint)
    ids = np.flatnonzero(mask)

    if q.ordering is not Ordering.NONE:
        ids = _chrono_order(
            ids, idx.fact_scopes.earliest, idx.fact_scopes.timed,
            descending=q.ordering is Ordering.CHRONO_DESC,
        )
    if q.aggregation is Aggregation.COUNT:
        return ContextResult(count=int(ids.size), aggregated=True)

    window = ids[q.offset :]
    if q.limit is not None:
        window = window[: q.limit]
    facts = [g.relations[int(i)] for i in window]

    gists: List[GistNode] = []
    seen = set()
    for e in facts:
        for pid in (e.subject, e.object):
            for gid in g.gists_of_phrase(pid):
                if gid in seen or g.gists[gid].source_chunk != e.source_chunk:
                    continue
                seen.add(gid)
                gists.append(g.gists[gid])
    return ContextResult(gists, facts, count=int(ids.size))


__all__ = [
    "Aggregation",
    "BadWindow",
    "ContextResult",
    "EmptyQuery",
    "EntityQuery",
    "Ordering",
    "find_entity_contexts",
    "find_gist_contexts",
    "match_phrases",
    "render_fact",
]
