"""Synthetic temporal-reasoning micro-benchmark over anonymous entities.

Each instance is a small set of dated facts, a question in one of six
categories, a ground-truth answer computed directly from the facts, and a
scripted tool plan whose final answer is read off the tool observations.

Categories: BA before/after, ET event at time, FL first/last, NE number of
events in a window, RD relation duration, TL timeline.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

from ..agent import (
    AgentConfig,
    EvidenceLog,
    PlannerDecision,
    ScriptedPlanner,
    ToolCall,
    run_iterative,
)
from ..extraction import Episode, FactRecord, ReplayExtractor
from ..graph import MemoryGraph
from ..indexing import IndexConfig, build_graph
from .datasets import QaExample
from .report import EvalReport, evaluate

CATEGORIES = ("BA", "ET", "FL", "NE", "RD", "TL")

# (subject, predicate, object, start_year, end_year)
Fact = Tuple[str, str, str, int, int]
Reducer = Callable[[MemoryGraph, EvidenceLog], str]


@dataclass
class TotInstance:
    qid: str
    category: str
    facts: List[Fact]
    question: str
    answer: str
    plan: List[object]
    reducer: Reducer

    def example(self) -> QaExample:
        return QaExample(self.question, (self.answer,), self.category, qid=self.qid)


def _call(thought: str, **args) -> PlannerDecision:
    return PlannerDecision(thought, ToolCall("find_entity_contexts", {k: v for k, v in args.items() if v is not None}))


STOP = PlannerDecision("enough evidence", ToolCall("output_answer", {}))


def _last(evidence: EvidenceLog) -> dict:
    return evidence.history[-1].observation


def _objects(g: MemoryGraph, evidence: EvidenceLog) -> List[str]:
    return [g.phrase_name(g.relations[f["id"]].object) for f in _last(evidence).get("facts", [])]


def first_object(g, evidence) -> str:
    objs = _objects(g, evidence)
    return objs[0] if objs else ""


def all_objects(g, evidence) -> str:
    return ", ".join(_objects(g, evidence))


def count_value(g, evidence) -> str:
    return str(_last(evidence).get("count", ""))


def duration_years(g, evidence) -> str:
    facts = _last(evidence).get("facts", [])
    if not facts:
        return ""
    scope = facts[0]["scope"]
    return str(int(scope["end"][:4]) - int(scope["start"][:4]))


class _Namer:
    def __init__(self, rng: random.Random) -> None:
        self.rng = rng
        self.used = set()

    def fresh(self, prefix: str) -> str:
        while True:
            name = f"{prefix}{self.rng.randrange(1000):03d}"
            if name not in self.used:
                self.used.add(name)
                return name


def _chain(rng: random.Random, subject: str, predicate: str, namer: _Namer, n: int) -> List[Fact]:
    """``n`` disjoint, year-granular tenures in chronological order."""
    year = rng.randrange(1900, 1960)
    out = []
    for _ in range(n):
        start = year + rng.randrange(0, 4)
        end = start + rng.randrange(0, 8)
        out.append((subject, predicate, namer.fresh("E"), start, end))
        year = end + 1
    return out


def _scenario(rng: random.Random):
    namer = _Namer(rng)
    subject, predicate = namer.fresh("E"), namer.fresh("R")
    chain = _chain(rng, subject, predicate, namer, rng.randrange(3, 7))
    noise: List[Fact] = []
    other_pred = namer.fresh("R")
    noise += _chain(rng, subject, other_pred, namer, rng.randrange(1, 4))
    for _ in range(rng.randrange(1, 3)):
        noise += _chain(rng, namer.fresh("E"), predicate, namer, rng.randrange(1, 4))
    return subject, predicate, chain, noise


def _instance(category: str, idx: int, rng: random.Random) -> TotInstance:
    subject, predicate, chain, noise = _scenario(rng)
    facts = chain + noise
    rng.shuffle(facts)
    by_start = sorted(chain, key=lambda f: f[3])
    qid = f"{category}-{idx:04d}"

    if category == "FL":
        last = rng.random() < 0.5
        target = by_start[-1] if last else by_start[0]
        word = "last" if last else "first"
        plan = [_call(f"order {predicate} of {subject}", subject=subject, predicate=predicate,
                      ordering="chrono_desc" if last else "chrono_asc", limit=1), STOP]
        return TotInstance(qid, category, facts, f"Which entity was the {word} {predicate} of {subject}?",
                           target[2], plan, first_object)

    if category == "ET":
        target = rng.choice(chain)
        year = rng.randint(target[3], target[4])
        plan = [_call("window on the year", subject=subject, predicate=predicate,
                      start_time=str(year), end_time=str(year)), STOP]
        return TotInstance(qid, category, facts, f"Which entity was the {predicate} of {subject} in {year}?",
                           target[2], plan, first_object)

    if category == "BA":
        after = rng.random() < 0.5
        k = rng.randrange(0, len(by_start) - 1) if after else rng.randrange(1, len(by_start))
        ref = by_start[k]
        target = by_start[k + 1] if after else by_start[k - 1]

        def follow_up(question, evidence, after=after):
            scope = _last(evidence)["facts"][0]["scope"]
            if after:
                return _call("next tenure", subject=subject, predicate=predicate, start_time=scope["end"],
                             start_operator="GT", ordering="chrono_asc", limit=1)
            return _call("previous tenure", subject=subject, predicate=predicate, end_time=scope["start"],
                         end_operator="LT", ordering="chrono_desc", limit=1)

        plan = [_call("locate the reference tenure", subject=subject, object=ref[2], predicate=predicate),
                follow_up, STOP]
        word = "after" if after else "before"
        return TotInstance(qid, category, facts,
                           f"Which entity was the {predicate} of {subject} right {word} {ref[2]}?",
                           target[2], plan, first_object)

    if category == "NE":
        lo_year = by_start[0][3] + rng.randrange(-3, 6)
        hi_year = lo_year + rng.randrange(0, 20)
        count = sum(1 for f in chain if f[3] <= hi_year and f[4] >= lo_year)
        plan = [_call("count within the window", subject=subject, predicate=predicate,
                      start_time=str(lo_year), end_time=str(hi_year), aggregation="count"), STOP]
        return TotInstance(qid, category, facts,
                           f"How many entities were the {predicate} of {subject} between {lo_year} and {hi_year}?",
                           str(count), plan, count_value)

    if category == "RD":
        target = rng.choice(chain)
        plan = [_call("read the tenure", subject=subject, object=target[2], predicate=predicate), STOP]
        return TotInstance(qid, category, facts,
                           f"For how many years was {target[2]} the {predicate} of {subject}?",
                           str(target[4] - target[3]), plan, duration_years)

    if category == "TL":
        plan = [_call("list in order", subject=subject, predicate=predicate, ordering="chrono_asc"), STOP]
        return TotInstance(qid, category, facts,
                           f"List the entities that were the {predicate} of {subject} in chronological order.",
                           ", ".join(f[2] for f in by_start), plan, all_objects)

    raise ValueError(f"unknown category {category!r}")


def generate(categories: Sequence[str] = CATEGORIES, per_category: int = 50, seed: int = 0) -> List[TotInstance]:
    rng = random.Random(seed)
    return [_instance(cat, i, rng) for cat in categories for i in range(per_category)]


def instance_graph(inst: TotInstance, embedder) -> MemoryGraph:
    """One episode per fact statement, replayed through the indexing pipeline."""
    episodes, facts = [], {}
    for i, (s, p, o, start, end) in enumerate(inst.facts):
        cid = f"{inst.qid}-f{i:02d}"
        episodes.append(Episode(cid, text=f"{s} was the {p} of {o} from {start} to {end}."))
        facts[cid] = [FactRecord(s, p, o, {"start_time": str(start), "end_time": str(end)})]
    return build_graph(episodes, IndexConfig(), ReplayExtractor({}, facts), embedder)


class ReducerSynthesizer:
    """Derives the answer string from the evidence with a fixed function."""

    def __init__(self, g: MemoryGraph, reducer: Reducer) -> None:
        self.g = g
        self.reducer = reducer

    def __call__(self, question, evidence, prompt) -> str:
        return self.reducer(self.g, evidence)


def run_instance(inst: TotInstance, embedder, max_steps: int = 5):
    g = instance_graph(inst, embedder)
    cfg = AgentConfig(max_steps=max_steps)
    return run_iterative(g, inst.question, cfg, ScriptedPlanner(inst.plan),
                         ReducerSynthesizer(g, inst.reducer), embedder)


def run_benchmark(instances: Sequence[TotInstance], embedder) -> Tuple[EvalReport, float]:
    by_qid: Dict[str, TotInstance] = {i.qid: i for i in instances}
    t0 = time.perf_counter()
    report = evaluate([i.example() for i in instances],
                      lambda ex: run_instance(by_qid[ex.qid], embedder).text, metrics=("em",))
    return report, time.perf_counter() - t0
