"""Agentic inference: a plan / act / observe loop over the memory-graph tools,
plus the single-step retrieve-then-answer mode.

Planners and synthesizers are plain objects so the loop can be driven by a
chat model or, in tests, by a script.

* planner: ``decide(question, evidence) -> PlannerDecision``
* synthesizer: ``__call__(question, evidence, prompt) -> str``
"""

from __future__ import annotations

import enum
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Union

from .clients import ChatClient, ChatRequest, ClientError, ProviderUnavailable
from .exploration import (
    Aggregation,
    BadWindow,
    EmptyQuery,
    EntityQuery,
    Ordering,
    find_entity_contexts,
    find_gist_contexts,
)
from .extraction import MalformedExtraction
from .graph import MemoryGraph, UnknownNode
from .retrieval import DEFAULT_TOP_K, lexical_retrieve, semantic_retrieve
from .temporal import (
    EndOp,
    InvalidConstraint,
    StartOp,
    TemporalConstraint,
    TemporalError,
)

logger = logging.getLogger(__name__)

REFUSAL = "no information available"

TEMPORAL_ARGS = ("start_time", "end_time", "start_operator", "end_operator")

# name -> (required args, optional args)
TOOL_SIGNATURES: Dict[str, tuple] = {
    "semantic_retrieve": (("query",), TEMPORAL_ARGS),
    "lexical_retrieve": (("query",), TEMPORAL_ARGS),
    "find_gist_contexts": (("gist_id",), TEMPORAL_ARGS),
    "find_entity_contexts": (
        (),
        ("subject", "object", "predicate") + TEMPORAL_ARGS
        + ("limit", "ordering", "offset", "aggregation"),
    ),
    "output_answer": ((), ("answer",)),
}
RETRIEVAL_TOOLS = ("semantic_retrieve", "lexical_retrieve")
EXPLORATION_TOOLS = ("find_gist_contexts", "find_entity_contexts")

TOOL_DESCRIPTIONS = {
    "semantic_retrieve": "Embedding search over gists and facts. Args: query, optional "
    "start_time/end_time (YYYY[-MM[-DD]]), start_operator (GE|GT|EQ), end_operator (LE|LT|EQ).",
    "lexical_retrieve": "BM25 keyword search over gists and facts; same arguments as semantic_retrieve.",
    "find_gist_contexts": "Expand a gist id: its synonymous gists and the facts from its episode. "
    "Args: gist_id plus the temporal arguments.",
    "find_entity_contexts": "Query facts by subject/object/predicate with the temporal arguments, "
    "limit, ordering (chrono_asc|chrono_desc), offset and aggregation (count).",
    "output_answer": "Stop and answer from the gathered evidence. Args: answer (draft).",
}

DEFAULT_PLANNER_PROMPT = (
    "You answer questions about past episodes by calling one tool per step.\n"
    "Tools:\n{tools}\n\nQuestion: {question}\n\nEvidence so far (newest first):\n{evidence}\n\n"
    "History:\n{history}\n\n"
    'Reply with JSON only: {{"thought": "...", "tool": "<name>", "args": {{...}}}}'
)
DEFAULT_ANSWER_PROMPT = (
    "Answer the question using only the evidence. Be concise. If the evidence does not "
    f'contain the answer, reply "{REFUSAL}".\n\nQuestion: {{question}}\n\nEvidence:\n{{evidence}}'
)


class AgentError(Exception):
    pass


class PlannerUnavailable(AgentError):
    pass


class SynthesizerUnavailable(AgentError):
    pass


class InvalidToolCall(AgentError):
    def __init__(self, reason: str) -> None:
        super().__init__(reason)
        self.reason = reason


class Mode(str, enum.Enum):
    ITERATIVE = "iterative"
    SINGLE = "single"


@dataclass(frozen=True)
class ToolCall:
    name: str
    args: Mapping[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "args": dict(self.args)}


@dataclass(frozen=True)
class PlannerDecision:
    thought: str
    call: ToolCall


@dataclass
class AgentConfig:
    mode: Mode = Mode.ITERATIVE
    max_steps: int = 3
    top_k: int = DEFAULT_TOP_K
    planner: str = "scripted"
    final_prompt_override: Optional[str] = None
    evidence_char_budget: int = 8000
    answer_prompt: str = DEFAULT_ANSWER_PROMPT

    def __post_init__(self) -> None:
        self.mode = Mode(self.mode)
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


# -- validation ---------------------------------------------------------


@dataclass(frozen=True)
class CheckedCall:
    name: str
    constraint: TemporalConstraint
    query: Optional[str] = None
    gist_id: Optional[int] = None
    entity: Optional[EntityQuery] = None
    answer: Optional[str] = None


def _opt_str(args, key) -> Optional[str]:
    v = args.get(key)
    if v is None:
        return None
    if not isinstance(v, str):
        raise InvalidToolCall(f"{key} must be a string")
    return v.strip() or None


def _opt_int(args, key, minimum: int) -> Optional[int]:
    v = args.get(key)
    if v is None:
        return None
    if isinstance(v, bool):
        raise InvalidToolCall(f"{key} must be an integer")
    if isinstance(v, str) and v.strip().lstrip("-").isdigit():
        v = int(v.strip())
    if not isinstance(v, int):
        raise InvalidToolCall(f"{key} must be an integer")
    if v < minimum:
        raise InvalidToolCall(f"{key} must be >= {minimum}")
    return v


def _constraint(args) -> TemporalConstraint:
    try:
        start, end = _opt_str(args, "start_time"), _opt_str(args, "end_time")
        so = args.get("start_operator") or StartOp.GE
        eo = args.get("end_operator") or EndOp.LE
        return TemporalConstraint.build(start, end, so, eo)
    except InvalidConstraint as exc:
        raise InvalidToolCall(f"bad temporal constraint: {exc}") from None
    except TemporalError:
        raise InvalidToolCall("malformed time") from None
    except ValueError:
        raise InvalidToolCall("unknown temporal operator") from None


def check_tool_call(call: ToolCall) -> CheckedCall:
    """Type-check a call against its tool signature; raises :class:`InvalidToolCall`."""
    if call.name not in TOOL_SIGNATURES:
        raise InvalidToolCall(f"unknown tool {call.name!r}")
    if not isinstance(call.args, Mapping):
        raise InvalidToolCall("args must be an object")
    required, optional = TOOL_SIGNATURES[call.name]
    args = {k: v for k, v in call.args.items() if v is not None}
    unknown = set(args) - set(required) - set(optional)
    if unknown:
        raise InvalidToolCall(f"unknown arguments {sorted(unknown)}")
    for key in required:
        if key not in args:
            raise InvalidToolCall(f"missing argument {key!r}")

    if call.name == "output_answer":
        return CheckedCall(call.name, TemporalConstraint(), answer=_opt_str(args, "answer"))
    constraint = _constraint(args)
    if call.name in RETRIEVAL_TOOLS:
        query = _opt_str(args, "query")
        if not query:
            raise InvalidToolCall("query is empty")
        return CheckedCall(call.name, constraint, query=query)
    if call.name == "find_gist_contexts":
        return CheckedCall(call.name, constraint, gist_id=_opt_int(args, "gist_id", 0))
    try:
        entity = EntityQuery(
            subject=_opt_str(args, "subject"),
            object=_opt_str(args, "object"),
            predicate=_opt_str(args, "predicate"),
            constraint=constraint,
            limit=_opt_int(args, "limit", 1),
            ordering=Ordering.parse(args.get("ordering")),
            offset=_opt_int(args, "offset", 0) or 0,
            aggregation=Aggregation.parse(args.get("aggregation")),
        )
    except EmptyQuery:
        raise InvalidToolCall("empty slots") from None
    except BadWindow as exc:
        raise InvalidToolCall(str(exc)) from None
    except ValueError:
        raise InvalidToolCall("bad ordering or aggregation value") from None
    return CheckedCall(call.name, constraint, entity=entity)


def validate_tool_call(call: ToolCall) -> Optional[InvalidToolCall]:
    """``None`` when the call is well-formed, otherwise the (unraised) error."""
    try:
        check_tool_call(call)
    except InvalidToolCall as exc:
        return exc
    return None


# -- evidence -----------------------------------------------------------


@dataclass
class Step:
    thought: str
    call: ToolCall
    observation: dict

    def to_json(self, index: int) -> dict:
        return {
            "step": index,
            "thought": self.thought,
            "call": self.call.to_json(),
            "observation": self.observation,
        }


class EvidenceLog:
    """Accumulated gists and facts (deduplicated by id) and the step history."""

    def __init__(self) -> None:
        self.gists: "OrderedDict[int, str]" = OrderedDict()
        self.facts: "OrderedDict[int, str]" = OrderedDict()
        self.history: List[Step] = []

    def merge(self, observation: Mapping) -> None:
        for item in observation.get("gists", ()):
            self.gists.setdefault(int(item["id"]), item["text"])
        for item in observation.get("facts", ()):
            self.facts.setdefault(int(item["id"]), item["rendered"])

    def record(self, thought: str, call: ToolCall, observation: dict) -> None:
        self.history.append(Step(thought, call, observation))
        self.merge(observation)

    @property
    def is_empty(self) -> bool:
        return not self.gists and not self.facts

    def lines(self) -> List[str]:
        """Evidence lines in insertion order (gists first, then facts)."""
        return [f"[gist {i}] {t}" for i, t in self.gists.items()] + [
            f"[fact {i}] {t}" for i, t in self.facts.items()
        ]

    def render(self, budget: Optional[int] = None) -> str:
        """Newest-first; the oldest lines are dropped first when over budget."""
        items = [(f"gist {i}", t) for i, t in self.gists.items()]
        items += [(f"fact {i}", t) for i, t in self.facts.items()]
        out, used = [], 0
        for label, text in reversed(items):
            line = f"[{label}] {text}"
            if budget is not None and used + len(line) + 1 > budget:
                break
            out.append(line)
            used += len(line) + 1
        return "\n".join(out) if out else "(none)"

    def render_history(self, budget: Optional[int] = None) -> str:
        rows = [json.dumps(s.to_json(i), ensure_ascii=False) for i, s in enumerate(self.history, 1)]
        text = "\n".join(rows)
        if budget is not None and len(text) > budget:
            text = text[-budget:]
        return text or "(none)"


@dataclass
class Answer:
    text: str
    mode: Mode
    evidence: EvidenceLog
    tool_calls: Dict[str, int]
    forced: bool = False  # budget ran out before output_answer

    @property
    def refused(self) -> bool:
        return is_refusal(self.text)

    @property
    def history(self) -> List[Step]:
        return self.evidence.history

    def trace(self) -> List[dict]:
        return [s.to_json(i) for i, s in enumerate(self.evidence.history, 1)]


def is_refusal(text: Optional[str]) -> bool:
    return not (text or "").strip() or REFUSAL in text.casefold()


# -- tools --------------------------------------------------------------


class Toolbox:
    """Dispatches checked calls against one frozen graph and counts them."""

    def __init__(self, g: MemoryGraph, embedder=None, top_k: int = DEFAULT_TOP_K) -> None:
        self.graph = g
        self.embedder = embedder
        self.top_k = top_k
        self.calls: Dict[str, int] = {name: 0 for name in TOOL_SIGNATURES if name != "output_answer"}

    @property
    def retrieval_calls(self) -> int:
        return sum(self.calls[n] for n in RETRIEVAL_TOOLS)

    @property
    def exploration_calls(self) -> int:
        return sum(self.calls[n] for n in EXPLORATION_TOOLS)

    def dispatch(self, checked: CheckedCall) -> dict:
        self.calls[checked.name] += 1
        g = self.graph
        if checked.name == "semantic_retrieve":
            res = semantic_retrieve(g, checked.query, checked.constraint, self.top_k, self.embedder)
            return res.to_json()
        if checked.name == "lexical_retrieve":
            return lexical_retrieve(g, checked.query, checked.constraint, self.top_k).to_json()
        if checked.name == "find_gist_contexts":
            try:
                return find_gist_contexts(g, checked.gist_id, checked.constraint).to_json(g)
            except UnknownNode as exc:
                return {"error": str(exc)}
        return find_entity_contexts(g, checked.entity).to_json(g)


# -- planners -----------------------------------------------------------

DecisionSource = Union[PlannerDecision, Callable[[str, EvidenceLog], PlannerDecision]]


class ScriptedPlanner:
    """Replays decisions in order; callables see the question and evidence so far.

    Once the script is exhausted it keeps answering with ``output_answer``.
    """

    tag = "scripted"

    def __init__(self, steps: Sequence[DecisionSource]) -> None:
        self.steps = list(steps)
        self.position = 0

    @classmethod
    def from_json(cls, rows: Sequence[Mapping]) -> "ScriptedPlanner":
        return cls([
            PlannerDecision(r.get("thought", ""), ToolCall(r["tool"], r.get("args") or {}))
            for r in rows
        ])

    def decide(self, question: str, evidence: EvidenceLog) -> PlannerDecision:
        if self.position >= len(self.steps):
            return PlannerDecision("script exhausted", ToolCall("output_answer", {}))
        step = self.steps[self.position]
        self.position += 1
        return step(question, evidence) if callable(step) else step


def parse_decision(raw: str) -> PlannerDecision:
    """Parse ``{"thought", "tool", "args"}`` with the lenient JSON repair pass."""
    text = raw or ""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        import re

        text = re.sub(r"```(?:json)?", "", text)
        lo, hi = text.find("{"), text.rfind("}")
        if lo < 0 or hi < lo:
            raise MalformedExtraction("no JSON object in planner output", raw) from None
        text = re.sub(r",\s*([\]}])", r"\1", text[lo : hi + 1])
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedExtraction(f"unrepairable planner JSON: {exc}", raw) from None
    if not isinstance(obj, dict) or "tool" not in obj:
        raise MalformedExtraction("planner output lacks a tool", raw)
    args = obj.get("args") or {}
    if not isinstance(args, dict):
        raise MalformedExtraction("planner args must be an object", raw)
    return PlannerDecision(str(obj.get("thought", "")), ToolCall(str(obj["tool"]), args))


class LLMPlanner:
    def __init__(
        self,
        client: ChatClient,
        prompt: str = DEFAULT_PLANNER_PROMPT,
        max_retries: int = 2,
        evidence_char_budget: int = 8000,
    ) -> None:
        self.client = client
        self.prompt = prompt
        self.max_retries = max_retries
        self.evidence_char_budget = evidence_char_budget
        self.tag = f"llm:{client.model}"

    def render(self, question: str, evidence: EvidenceLog) -> str:
        tools = "\n".join(f"- {n}: {d}" for n, d in TOOL_DESCRIPTIONS.items())
        return self.prompt.format(
            tools=tools,
            question=question,
            evidence=evidence.render(self.evidence_char_budget),
            history=evidence.render_history(self.evidence_char_budget),
        )

    def decide(self, question: str, evidence: EvidenceLog) -> PlannerDecision:
        prompt = self.render(question, evidence)
        messages = [("user", prompt)]
        raw = ""
        for _ in range(self.max_retries + 1):
            try:
                raw = self.client.chat(ChatRequest(self.client.model, tuple(messages))).text
            except ClientError as exc:
                raise PlannerUnavailable(str(exc)) from exc
            try:
                return parse_decision(raw)
            except MalformedExtraction as exc:
                messages = [
                    ("user", prompt),
                    ("assistant", raw),
                    ("user", f"Invalid reply ({exc}). Reply with the JSON object only."),
                ]
        logger.warning("planner output unusable after retries: %r", raw[:300])
        return PlannerDecision("unparseable planner output", ToolCall("<unparseable>", {}))


# -- synthesis ----------------------------------------------------------


class LLMSynthesizer:
    def __init__(self, client: ChatClient) -> None:
        self.client = client

    def __call__(self, question: str, evidence: EvidenceLog, prompt: str) -> str:
        try:
            return self.client.complete(prompt)
        except ClientError as exc:
            raise SynthesizerUnavailable(str(exc)) from exc


class EchoSynthesizer:
    """Returns the first gist (else the first fact) of the evidence, or refuses."""

    def __call__(self, question: str, evidence: EvidenceLog, prompt: str) -> str:
        if evidence.gists:
            return next(iter(evidence.gists.values()))
        if evidence.facts:
            return next(iter(evidence.facts.values()))
        return REFUSAL


def render_answer_prompt(question: str, evidence: EvidenceLog, template: str, budget: Optional[int] = None) -> str:
    body = evidence.render(budget)
    if "{question}" in template or "{evidence}" in template:
        try:
            return template.format(question=question, evidence=body, history=evidence.render_history(budget))
        except (KeyError, IndexError, ValueError):
            pass
    return f"{template}\n\nQuestion: {question}\n\nEvidence:\n{body}"


def synthesize(question: str, evidence: EvidenceLog, prompt: str, model) -> str:
    """Run the synthesizer; empty or abstaining output becomes the refusal phrase."""
    try:
        text = model(question, evidence, prompt)
    except ProviderUnavailable as exc:
        raise SynthesizerUnavailable(str(exc)) from exc
    text = (text or "").strip()
    return REFUSAL if is_refusal(text) else text


def _answer_template(cfg: AgentConfig) -> str:
    return cfg.final_prompt_override or cfg.answer_prompt


# -- loops --------------------------------------------------------------


def run_iterative(
    g: MemoryGraph,
    question: str,
    cfg: AgentConfig,
    planner,
    synthesizer,
    embedder=None,
) -> Answer:
    tools = Toolbox(g, embedder, cfg.top_k)
    evidence = EvidenceLog()
    forced = True
    for _ in range(cfg.max_steps):
        try:
            decision = planner.decide(question, evidence)
        except ClientError as exc:
            raise PlannerUnavailable(str(exc)) from exc
        if decision.call.name == "output_answer":
            forced = False
            break
        try:
            checked = check_tool_call(decision.call)
        except InvalidToolCall as exc:
            evidence.record(decision.thought, decision.call, {"error": exc.reason})
            continue
        evidence.record(decision.thought, decision.call, tools.dispatch(checked))
    prompt = render_answer_prompt(question, evidence, _answer_template(cfg), cfg.evidence_char_budget)
    text = synthesize(question, evidence, prompt, synthesizer)
    return Answer(text, Mode.ITERATIVE, evidence, dict(tools.calls), forced=forced)


def run_single(
    g: MemoryGraph,
    question: str,
    cfg: AgentConfig,
    synthesizer,
    embedder=None,
) -> Answer:
    tools = Toolbox(g, embedder, cfg.top_k)
    evidence = EvidenceLog()
    call = ToolCall("semantic_retrieve", {"query": question})
    evidence.record("", call, tools.dispatch(check_tool_call(call)))
    prompt = render_answer_prompt(question, evidence, _answer_template(cfg), cfg.evidence_char_budget)
    text = synthesize(question, evidence, prompt, synthesizer)
    return Answer(text, Mode.SINGLE, evidence, dict(tools.calls))


def answer_question(g, question, cfg: AgentConfig, planner=None, synthesizer=None, embedder=None) -> Answer:
    synthesizer = synthesizer or EchoSynthesizer()
    if cfg.mode is Mode.SINGLE:
        return run_single(g, question, cfg, synthesizer, embedder)
    if planner is None:
        raise PlannerUnavailable("iterative mode needs a planner")
    return run_iterative(g, question, cfg, planner, synthesizer, embedder)
