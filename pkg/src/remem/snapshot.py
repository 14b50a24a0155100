"""On-disk graph snapshots.

Layout of a snapshot directory::

    meta.json          build config, counts, format version
    gists.jsonl        {"gist_id", "text", "scope", "source_chunk"}
    phrases.jsonl      {"phrase_id", "name"}
    relations.jsonl    {"edge_id", "subject", "predicate", "object", "scope", "source_chunk"}
    contexts.jsonl     {"gist", "phrase"}
    synonyms.jsonl     {"a", "b", "similarity"}
    embeddings.bin     b"REMB", u32 dim, u32 rows, rows of little-endian float32
                       (gists in id order, then facts in id order)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from .graph import BuildConfig, MemoryGraph, check_integrity, graph_stats
from .retrieval import indexes_for
from .temporal import TemporalError, TimeScope

FORMAT_VERSION = 1
MAGIC = b"REMB"
FILES = ("meta.json", "gists.jsonl", "phrases.jsonl", "relations.jsonl",
         "contexts.jsonl", "synonyms.jsonl", "embeddings.bin")


class SnapshotError(Exception):
    pass


def _dump_lines(path: Path, rows: Iterable[dict]) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=False))
            fh.write("\n")


def _scope(s):
    return s.to_json() if s is not None else None


def save_snapshot(g: MemoryGraph, out: Union[str, Path]) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stats = graph_stats(g)
    meta = {
        "format_version": FORMAT_VERSION,
        "build_config": g.build_config.to_json(),
        "counts": stats.to_json(),
        "skipped_chunks": list(g.skipped_chunks),
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    _dump_lines(out / "gists.jsonl", (
        {"gist_id": n.gist_id, "text": n.text, "scope": _scope(n.scope), "source_chunk": n.source_chunk}
        for n in g.gists
    ))
    _dump_lines(out / "phrases.jsonl", ({"phrase_id": p.phrase_id, "name": p.name} for p in g.phrases))
    _dump_lines(out / "relations.jsonl", (
        {"edge_id": e.edge_id, "subject": e.subject, "predicate": e.predicate, "object": e.object,
         "scope": _scope(e.scope), "source_chunk": e.source_chunk}
        for e in g.relations
    ))
    _dump_lines(out / "contexts.jsonl", ({"gist": c.gist, "phrase": c.phrase} for c in g.contexts))
    _dump_lines(out / "synonyms.jsonl", (
        {"a": s.a, "b": s.b, "similarity": s.similarity} for s in g.synonyms
    ))
    write_embeddings(out / "embeddings.bin", g.gist_vectors, g.fact_vectors)
    return out


def write_embeddings(path: Path, gist_vectors, fact_vectors) -> None:
    parts = [v for v in (gist_vectors, fact_vectors) if v is not None and v.size]
    if parts:
        dims = {p.shape[1] for p in parts}
        if len(dims) != 1:
            raise SnapshotError("gist and fact vectors differ in dimension")
        matrix = np.concatenate(parts).astype("<f4")
        dim, rows = matrix.shape[1], matrix.shape[0]
    else:
        matrix, dim, rows = np.zeros((0, 0), dtype="<f4"), 0, 0
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", dim, rows))
        fh.write(np.ascontiguousarray(matrix).tobytes())


def read_embeddings(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise SnapshotError(f"{path} is not an embeddings file")
    dim, rows = struct.unpack("<II", raw[4:12])
    body = raw[12:]
    if len(body) != dim * rows * 4:
        raise SnapshotError(f"{path}: expected {rows}x{dim} floats, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f4").reshape(rows, dim).astype(np.float32)


def _load_lines(path: Path) -> list:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SnapshotError(f"{path.name} line {lineno}: {exc}") from None
    return rows


def load_snapshot(path: Union[str, Path]) -> MemoryGraph:
    path = Path(path)
    if not path.is_dir():
        raise SnapshotError(f"snapshot directory not found: {path}")
    missing = [f for f in FILES if not (path / f).exists()]
    if missing:
        raise SnapshotError(f"snapshot {path} is missing {', '.join(missing)}")
    try:
        meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"meta.json is corrupt: {exc}") from None
    version = meta.get("format_version") if isinstance(meta, dict) else None
    if version != FORMAT_VERSION:
        raise SnapshotError(
            f"unsupported snapshot format version {version!r} (expected {FORMAT_VERSION})"
        )
    g = MemoryGraph(BuildConfig(**meta["build_config"]))
    g.skipped_chunks = list(meta.get("skipped_chunks", []))
    try:
        for row in _load_lines(path / "gists.jsonl"):
            gid = g.add_gist(row["text"], TimeScope.from_json(row["scope"]), row["source_chunk"])
            _expect(gid, row["gist_id"], "gist")
        for row in _load_lines(path / "phrases.jsonl"):
            pid = g.upsert_phrase(row["name"])
            _expect(pid, row["phrase_id"], "phrase")
        for row in _load_lines(path / "relations.jsonl"):
            eid = g.add_fact(
                g.phrases[row["subject"]].name, row["predicate"], g.phrases[row["object"]].name,
                TimeScope.from_json(row["scope"]), row["source_chunk"],
            )
            _expect(eid, row["edge_id"], "relation")
        for row in _load_lines(path / "contexts.jsonl"):
            g.bind_context([row["gist"]], [row["phrase"]])
        for row in _load_lines(path / "synonyms.jsonl"):
            g.add_synonym(row["a"], row["b"], row["similarity"])
    except (KeyError, IndexError, TypeError, TemporalError) as exc:
        raise SnapshotError(f"snapshot {path} is corrupt: {exc!r}") from None
    vectors = read_embeddings(path / "embeddings.bin")
    n_g, n_f = len(g.gists), len(g.relations)
    if vectors.shape[0] not in (0, n_g + n_f):
        raise SnapshotError(f"embeddings has {vectors.shape[0]} rows, expected {n_g + n_f}")
    if vectors.shape[0]:
        g.gist_vectors = vectors[:n_g]
        g.fact_vectors = vectors[n_g:]
    problems = check_integrity(g)
    if problems:
        raise SnapshotError("; ".join(problems[:5]))
    g.freeze()
    indexes_for(g)
    return g


def _expect(got: int, want: int, what: str) -> None:
    if got != want:
        raise SnapshotError(f"{what} ids are not dense: expected {want}, got {got}")
