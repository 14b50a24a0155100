"""Random graphs and queries shared by property tests and the acceptance run."""

from __future__ import annotations

import random
from datetime import date

from remem.exploration import EntityQuery
from remem.graph import MemoryGraph
from remem.temporal import TemporalConstraint, TimeScope

ENTITIES = [f"entity {i}" for i in range(12)] + ["Entity 1 junior", "the entity 3 group"]
PREDICATES = ["works for", "lives in", "was born in", "married", "plays for", "visited"]


def _instant(rng: random.Random) -> str:
    d = date(2000, 1, 1).toordinal() + rng.randrange(0, 365 * 6)
    day = date.fromordinal(d)
    g = rng.randrange(3)
    return [str(day.year), f"{day.year:04d}-{day.month:02d}", day.isoformat()][g]


def random_scope(rng: random.Random):
    r = rng.random()
    if r < 0.2:
        return None
    if r < 0.6:
        return TimeScope.at(_instant(rng))
    while True:
        a = _instant(rng) if rng.random() < 0.85 else None
        b = _instant(rng) if rng.random() < 0.85 else None
        try:
            return TimeScope.between(a, b)
        except ValueError:
            continue


def random_graph(rng: random.Random, n_facts: int) -> MemoryGraph:
    g = MemoryGraph()
    for i in range(n_facts):
        s, o = rng.choice(ENTITIES), rng.choice(ENTITIES)
        g.add_fact(s, rng.choice(PREDICATES), o, random_scope(rng), f"c{i % 17:02d}")
    return g.freeze()


def random_constraint(rng: random.Random) -> TemporalConstraint:
    while True:
        start = _instant(rng) if rng.random() < 0.5 else None
        end = _instant(rng) if rng.random() < 0.5 else None
        so = rng.choice(["GE", "GT", "EQ"]) if start else "GE"
        eo = rng.choice(["LE", "LT", "EQ"]) if end else "LE"
        return TemporalConstraint.build(start, end, so, eo)


def random_query_args(rng: random.Random) -> dict:
    args = {}
    while not args:
        if rng.random() < 0.5:
            args["subject"] = rng.choice(ENTITIES + ["entity 1", "ENTITY  2", "group", "nobody"])
        if rng.random() < 0.4:
            args["obj"] = rng.choice(ENTITIES + ["entity", "junior"])
        if rng.random() < 0.4:
            args["predicate"] = rng.choice(PREDICATES + ["for", "in", "BORN"])
    args["constraint"] = random_constraint(rng) if rng.random() < 0.7 else TemporalConstraint()
    args["ordering"] = rng.choice(["none", "chrono_asc", "chrono_desc"])
    args["limit"] = rng.choice([None, 1, 2, 5, 50])
    args["offset"] = rng.randrange(0, 6) if args["ordering"] != "none" else 0
    return args


def to_entity_query(args: dict, count: bool = False) -> EntityQuery:
    return EntityQuery(
        subject=args.get("subject"), object=args.get("obj"), predicate=args.get("predicate"),
        constraint=args["constraint"], limit=args["limit"], ordering=args["ordering"],
        offset=args["offset"], aggregation="count" if count else "none",
    )
