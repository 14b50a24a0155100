"""JSONL dataset loaders.

conversationQA lines::

    {"type": "session", "session_id": "s1", "timestamp": "2023-05-08",
     "turns": [{"speaker": "Caroline", "text": "..."}]}
    {"type": "qa", "question": "...", "answers": ["..."], "category": "temporal"}

factQA lines::

    {"type": "fact", "id": "f1", "text": "E1 was the R1 of E2 from 1990 to 1994."}
    {"type": "qa", "question": "...", "answer": "E2", "category": "BA"}

Blank lines are ignored.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

from ..extraction import Episode
from ..temporal import TemporalError, parse_instant
from .metrics import REFUSAL, normalize_answer


class ParseError(ValueError):
    def __init__(self, message: str, line: int, path: Optional[str] = None) -> None:
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path


class DatasetFormat(str, enum.Enum):
    CONVERSATION_QA = "conversationQA"
    FACT_QA = "factQA"


@dataclass(frozen=True)
class QaExample:
    question: str
    gold_answers: Tuple[str, ...]
    category: Optional[str] = None
    unanswerable: bool = False
    qid: Optional[str] = None

    def __post_init__(self) -> None:
        golds = tuple(str(a) for a in self.gold_answers)
        if not golds:
            raise ValueError("an example needs at least one gold answer")
        object.__setattr__(self, "gold_answers", golds)
        refusal = any(normalize_answer(a) == normalize_answer(REFUSAL) for a in golds)
        object.__setattr__(self, "unanswerable", bool(self.unanswerable or refusal))


def _qa(obj: dict, n: int) -> QaExample:
    golds = obj.get("answers")
    if golds is None and "answer" in obj:
        golds = [obj["answer"]]
    if isinstance(golds, str):
        golds = [golds]
    if not obj.get("question") or not golds:
        raise ValueError("qa rows need question and answer(s)")
    return QaExample(
        question=str(obj["question"]),
        gold_answers=tuple(golds),
        category=obj.get("category"),
        unanswerable=bool(obj.get("unanswerable", False)),
        qid=str(obj["id"]) if obj.get("id") is not None else f"q{n}",
    )


def load_dataset(
    path: Union[str, Path], fmt: Union[str, DatasetFormat]
) -> Tuple[List[Episode], List[QaExample]]:
    fmt = DatasetFormat(fmt)
    path = Path(path)
    corpus: List[Episode] = []
    examples: List[QaExample] = []
    row_kind = "session" if fmt is DatasetFormat.CONVERSATION_QA else "fact"
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("each line must be a JSON object")
                kind = obj.get("type")
                if kind == "qa":
                    examples.append(_qa(obj, len(examples)))
                elif kind == row_kind == "session":
                    ts = obj.get("timestamp")
                    corpus.append(Episode(
                        chunk_id=str(obj.get("session_id") or f"session-{len(corpus):05d}"),
                        timestamp=parse_instant(ts) if ts else None,
                        speaker_turns=tuple((t["speaker"], t["text"]) for t in obj["turns"]),
                    ))
                elif kind == row_kind == "fact":
                    ts = obj.get("timestamp")
                    corpus.append(Episode(
                        chunk_id=str(obj.get("id") or f"fact-{len(corpus):05d}"),
                        timestamp=parse_instant(ts) if ts else None,
                        text=str(obj["text"]),
                    ))
                else:
                    raise ValueError(f"unexpected row type {kind!r} for {fmt.value}")
            except (ValueError, KeyError, TypeError, TemporalError) as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
    return corpus, examples
