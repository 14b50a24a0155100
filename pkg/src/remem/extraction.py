"""Turning episodes into gist sentences and (subject, predicate, object) facts.

Two extractors share one small interface (``tag``, ``extract_gists``,
``extract_facts``):

* :class:`LLMExtractor` prompts a chat model and validates its JSON output.
* :class:`RuleExtractor` is a deterministic sentence splitter and date tagger
  that keeps the pipeline testable offline.  It makes no quality claims.

:class:`ReplayExtractor` returns canned records per chunk and is what tests
use to replay known extraction output.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .clients import ChatClient, ChatRequest, ClientError, ProviderUnavailable
from .temporal import (
    MalformedTime,
    TemporalError,
    TimeInstant,
    TimeScope,
    parse_instant,
    render_instant,
)

logger = logging.getLogger(__name__)

QUALIFIER_KEYS = ("point_in_time", "start_time", "end_time")


class ExtractionError(Exception):
    pass


class ExtractorUnavailable(ExtractionError):
    pass


class MalformedExtraction(ExtractionError):
    def __init__(self, message: str, raw: str = "") -> None:
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class Episode:
    chunk_id: str
    timestamp: Optional[TimeInstant] = None
    text: Optional[str] = None
    speaker_turns: Optional[Tuple[Tuple[str, str], ...]] = None

    def __post_init__(self) -> None:
        if not self.chunk_id:
            raise ValueError("episode needs a chunk_id")
        if self.speaker_turns is not None:
            object.__setattr__(
                self, "speaker_turns", tuple((str(s), str(t)) for s, t in self.speaker_turns)
            )

    @property
    def content(self) -> str:
        """Episode text; conversations become ``Speaker: text`` lines."""
        parts = []
        if self.text:
            parts.append(self.text)
        if self.speaker_turns:
            parts.append("\n".join(f"{s}: {t}" for s, t in self.speaker_turns))
        return "\n".join(parts)

    def to_json(self) -> dict:
        return {
            "chunk_id": self.chunk_id,
            "timestamp": render_instant(self.timestamp) if self.timestamp else None,
            "text": self.text,
            "turns": [{"speaker": s, "text": t} for s, t in self.speaker_turns]
            if self.speaker_turns
            else None,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Episode":
        ts = obj.get("timestamp")
        turns = obj.get("turns")
        return cls(
            chunk_id=str(obj["chunk_id"]),
            timestamp=parse_instant(ts) if ts else None,
            text=obj.get("text"),
            speaker_turns=tuple((t["speaker"], t["text"]) for t in turns) if turns else None,
        )


@dataclass(frozen=True)
class GistRecord:
    text: str
    scope: Optional[TimeScope] = None


@dataclass(frozen=True)
class FactRecord:
    subject: str
    predicate: str
    object: str
    qualifier: Mapping[str, TimeInstant] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for slot in ("subject", "predicate", "object"):
            if not str(getattr(self, slot) or "").strip():
                raise ValueError(f"fact {slot} is empty")
        q = dict(self.qualifier or {})
        bad = set(q) - set(QUALIFIER_KEYS)
        if bad:
            raise ValueError(f"unknown qualifier keys {sorted(bad)}")
        if "point_in_time" in q and ("start_time" in q or "end_time" in q):
            raise ValueError("point_in_time excludes start_time/end_time")
        q = {k: (parse_instant(v) if isinstance(v, str) else v) for k, v in q.items()}
        # Validates start <= end.
        if "start_time" in q or "end_time" in q:
            TimeScope.between(q.get("start_time"), q.get("end_time"))
        object.__setattr__(self, "qualifier", q)

    @property
    def scope(self) -> Optional[TimeScope]:
        q = self.qualifier
        if "point_in_time" in q:
            return TimeScope.at(q["point_in_time"])
        if "start_time" in q or "end_time" in q:
            return TimeScope.between(q.get("start_time"), q.get("end_time"))
        return None


@dataclass
class ExtractorConfig:
    gist_prompt: str = (
        "Split the episode into concise single-sentence gists, one atomic event each. "
        "Prefix each gist with the reference time when known and resolve relative "
        "dates to absolute ones.\nReference time: {timestamp}\nEpisode:\n{episode}\n"
        'Answer with a JSON array of {{"text": ..., "date": "YYYY[-MM[-DD]]"}} objects.'
    )
    fact_prompt: str = (
        "Extract (subject, predicate, object) facts from the episode and its gists, "
        "with optional point_in_time / start_time / end_time qualifiers.\n"
        "Reference time: {timestamp}\nEpisode:\n{episode}\nGists:\n{gists}\n"
        'Answer with a JSON array of {{"subject", "predicate", "object", '
        '"point_in_time"?, "start_time"?, "end_time"?}} objects.'
    )
    model: str = "gpt-4.1-mini"
    max_retries: int = 2
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.gist_prompt.strip() or not self.fact_prompt.strip():
            raise ValueError("extraction prompts must be non-empty")


# -- rule-based ---------------------------------------------------------

_MONTHS = {
    m: i
    for i, m in enumerate(
        (
            "january", "february", "march", "april", "may", "june", "july",
            "august", "september", "october", "november", "december",
        ),
        start=1,
    )
}
_MONTH_ALT = "|".join(m.capitalize() for m in _MONTHS)
_PREP = r"(?:\b(?:on|in|at|during|since)\s+)?"
_DATE_RE = re.compile(
    rf"\s*{_PREP}(?:"
    r"(?P<iso>\b\d{4}-\d{2}(?:-\d{2})?\b)"
    rf"|(?P<mdy>\b(?:{_MONTH_ALT})\s+\d{{1,2}},\s*\d{{4}}\b)"
    rf"|(?P<my>\b(?:{_MONTH_ALT})\s+\d{{4}}\b)"
    r")"
)
_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")
_SPEAKER = re.compile(r"^[^:\n]{1,40}:\s+")
_DETERMINERS = {"The", "A", "An", "This", "That", "These", "Those", "My", "Our"}


def _parse_date_match(m: re.Match) -> Optional[TimeInstant]:
    try:
        if m["iso"]:
            return parse_instant(m["iso"])
        if m["mdy"]:
            month, day, year = re.match(r"(\w+)\s+(\d{1,2}),\s*(\d{4})", m["mdy"]).groups()
            return TimeInstant(int(year), _MONTHS[month.lower()], int(day))
        month, year = m["my"].split()
        return TimeInstant(int(year), _MONTHS[month.lower()])
    except TemporalError:
        return None


def _split_sentences(text: str) -> List[str]:
    return [s.strip() for s in _SENT_SPLIT.split(text) if s and s.strip()]


def _strip_date(sentence: str) -> Tuple[str, Optional[TimeInstant]]:
    m = _DATE_RE.search(sentence)
    if m is None:
        return sentence, None
    when = _parse_date_match(m)
    if when is None:
        return sentence, None
    out = sentence[: m.start()] + sentence[m.end() :]
    out = re.sub(r"\s+([.,!?;:])", r"\1", out)
    out = re.sub(r"\s{2,}", " ", out).strip()
    return out, when


def _svo(sentence: str) -> Optional[Tuple[str, str, str]]:
    body = _SPEAKER.sub("", sentence).strip().rstrip(".!?").strip()
    tokens = body.split()
    i = 0
    subject: List[str] = []
    if tokens and tokens[0] in _DETERMINERS and len(tokens) > 1:
        subject = tokens[:2]
        i = 2
    while i < len(tokens) and tokens[i][:1].isupper():
        subject.append(tokens[i])
        i += 1
    if not subject or i >= len(tokens):
        return None
    verb = tokens[i]
    if not verb.isalpha() or not verb.islower():
        return None
    obj = " ".join(tokens[i + 1 :]).strip(" ,;:")
    if not obj:
        return None
    return " ".join(subject), verb, obj


class RuleExtractor:
    """One gist per sentence; facts from a first-noun-phrase/verb/remainder split."""

    tag = "rule"

    def _sentences(self, episode: Episode) -> List[Tuple[str, Optional[TimeInstant]]]:
        return [_strip_date(s) for s in _split_sentences(episode.content)]

    def extract_gists(self, episode: Episode) -> List[GistRecord]:
        out = []
        for sentence, when in self._sentences(episode):
            if not sentence:
                continue
            text = f"[{render_instant(episode.timestamp)}] {sentence}" if episode.timestamp else sentence
            anchor = when or episode.timestamp
            out.append(GistRecord(text, TimeScope.at(anchor) if anchor else None))
        return out

    def extract_facts(self, episode: Episode, gists: Sequence[GistRecord]) -> List[FactRecord]:
        out = []
        for sentence, when in self._sentences(episode):
            triple = _svo(sentence)
            if triple is None:
                continue
            qualifier = {"point_in_time": when} if when else {}
            out.append(FactRecord(*triple, qualifier=qualifier))
        return out


class ReplayExtractor:
    """Returns prepared records per chunk id (empty lists for unknown chunks)."""

    tag = "replay"

    def __init__(
        self,
        gists: Mapping[str, Sequence[GistRecord]],
        facts: Mapping[str, Sequence[FactRecord]],
    ) -> None:
        self._gists = {k: list(v) for k, v in gists.items()}
        self._facts = {k: list(v) for k, v in facts.items()}

    def extract_gists(self, episode: Episode) -> List[GistRecord]:
        return list(self._gists.get(episode.chunk_id, ()))

    def extract_facts(self, episode: Episode, gists: Sequence[GistRecord]) -> List[FactRecord]:
        return list(self._facts.get(episode.chunk_id, ()))


# -- LLM-backed ---------------------------------------------------------


def repair_json_array(raw: str) -> list:
    """Parse a JSON array from model output, with one lenient repair pass."""
    try:
        value = json.loads(raw)
    except (json.JSONDecodeError, TypeError):
        text = re.sub(r"```(?:json)?", "", raw or "")
        lo, hi = text.find("["), text.rfind("]")
        if lo < 0 or hi < lo:
            raise MalformedExtraction("no JSON array in model output", raw) from None
        text = re.sub(r",\s*([\]}])", r"\1", text[lo : hi + 1])
        try:
            value = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedExtraction(f"unrepairable JSON: {exc}", raw) from None
    if isinstance(value, dict):
        for v in value.values():
            if isinstance(v, list):
                value = v
                break
    if not isinstance(value, list):
        raise MalformedExtraction("model output is not a JSON array", raw)
    return value


def _fill(template: str, **slots: str) -> str:
    try:
        return template.format(**slots)
    except (KeyError, IndexError, ValueError):
        # Operator-supplied prompt without our placeholders: append the inputs.
        extra = "\n".join(f"{k}:\n{v}" for k, v in slots.items() if v)
        return f"{template}\n\n{extra}"


class LLMExtractor:
    def __init__(self, client: ChatClient, config: Optional[ExtractorConfig] = None) -> None:
        self.client = client
        self.config = config or ExtractorConfig()
        self.tag = f"llm:{self.config.model}"

    def _ask(self, prompt: str, parse):
        cfg = self.config
        messages: List[Tuple[str, str]] = [("user", prompt)]
        raw = ""
        for attempt in range(cfg.max_retries + 1):
            req = ChatRequest(
                model=cfg.model, messages=tuple(messages), temperature=cfg.temperature
            )
            try:
                raw = self.client.chat(req).text
            except ProviderUnavailable as exc:
                raise ExtractorUnavailable(str(exc)) from exc
            except ClientError as exc:
                raise ExtractorUnavailable(str(exc)) from exc
            try:
                return parse(repair_json_array(raw))
            except (MalformedExtraction, ValueError, TemporalError, KeyError, TypeError) as exc:
                logger.info("extraction attempt %d rejected: %s", attempt + 1, exc)
                messages = [
                    ("user", prompt),
                    ("assistant", raw),
                    (
                        "user",
                        f"That output was rejected ({exc}). Reply with only the JSON array.",
                    ),
                ]
        raise MalformedExtraction("model output failed validation after retries", raw)

    def extract_gists(self, episode: Episode) -> List[GistRecord]:
        content = episode.content
        if not content.strip():
            return []
        ts = render_instant(episode.timestamp) if episode.timestamp else "unknown"
        prompt = _fill(self.config.gist_prompt, timestamp=ts, episode=content)

        def parse(items: list) -> List[GistRecord]:
            out = []
            for item in items:
                text = str(item["text"]).strip() if isinstance(item, dict) else str(item).strip()
                if not text:
                    raise ValueError("empty gist text")
                date = item.get("date") if isinstance(item, dict) else None
                when = parse_instant(date) if date else episode.timestamp
                if episode.timestamp and not text.startswith("["):
                    text = f"[{ts}] {text}"
                out.append(GistRecord(text, TimeScope.at(when) if when else None))
            return out

        return self._ask(prompt, parse)

    def extract_facts(self, episode: Episode, gists: Sequence[GistRecord]) -> List[FactRecord]:
        content = episode.content
        if not content.strip():
            return []
        ts = render_instant(episode.timestamp) if episode.timestamp else "unknown"
        prompt = _fill(
            self.config.fact_prompt,
            timestamp=ts,
            episode=content,
            gists="\n".join(g.text for g in gists),
        )

        def parse(items: list) -> List[FactRecord]:
            out = []
            for item in items:
                if not isinstance(item, dict):
                    raise ValueError("fact is not an object")
                qualifier = {}
                for key in QUALIFIER_KEYS:
                    if item.get(key):
                        qualifier[key] = parse_instant(str(item[key]))
                out.append(
                    FactRecord(
                        str(item["subject"]).strip(),
                        str(item["predicate"]).strip(),
                        str(item["object"]).strip(),
                        qualifier=qualifier,
                    )
                )
            return out

        return self._ask(prompt, parse)


def extract_gists(episode: Episode, extractor) -> List[GistRecord]:
    return extractor.extract_gists(episode)


def extract_facts(episode: Episode, gists: Sequence[GistRecord], extractor) -> List[FactRecord]:
    return extractor.extract_facts(episode, gists)


__all__ = [
    "Episode",
    "ExtractionError",
    "ExtractorConfig",
    "ExtractorUnavailable",
    "FactRecord",
    "GistRecord",
    "LLMExtractor",
    "MalformedExtraction",
    "MalformedTime",
    "ReplayExtractor",
    "RuleExtractor",
    "extract_facts",
    "extract_gists",
    "repair_json_array",
]
