"""Text forms of graph items, as shown to the planner and indexed for search."""

from __future__ import annotations

from typing import Optional

from .graph import GistNode, MemoryGraph, RelationEdge
from .temporal import ScopeKind, TimeScope, render_instant


def render_scope(scope: Optional[TimeScope]) -> str:
    if scope is None:
        return ""
    if scope.kind is ScopeKind.POINT:
        return f"[point in time: {render_instant(scope.point)}]"
    parts = []
    if scope.start is not None:
        parts.append(f"start: {render_instant(scope.start)}")
    if scope.end is not None:
        parts.append(f"end: {render_instant(scope.end)}")
    return f"[{', '.join(parts)}]" if parts else ""


def render_fact(g: MemoryGraph, e: RelationEdge) -> str:
    """``(subject, predicate, object)`` plus a bracketed qualifier when scoped."""
    base = f"({g.phrases[e.subject].name}, {e.predicate}, {g.phrases[e.object].name})"
    tail = render_scope(e.scope)
    return f"{base} {tail}" if tail else base


def render_gist(node: GistNode) -> str:
    return node.text
