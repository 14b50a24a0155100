"""Binary LLM-as-judge scoring through the shared chat client."""

from __future__ import annotations

import logging
import re
from typing import Optional

from ..clients import ChatClient, ClientError

logger = logging.getLogger(__name__)

DEFAULT_JUDGE_PROMPT = (
    "Decide whether the generated answer is correct given the gold answer. "
    "Be lenient about wording; the answer must refer to the same thing.\n\n"
    "Question: {question}\nGold answer: {gold}\nGenerated answer: {prediction}\n\n"
    'Reply with a JSON object {{"label": "CORRECT"}} or {{"label": "WRONG"}}.'
)

_LABEL = re.compile(r"\b(CORRECT|WRONG)\b", re.IGNORECASE)
_DIGIT = re.compile(r"^\s*([01])\s*$")


class JudgeUnavailable(Exception):
    pass


def parse_verdict(reply: str) -> Optional[int]:
    m = _LABEL.search(reply or "")
    if m:
        return int(m.group(1).upper() == "CORRECT")
    m = _DIGIT.match(reply or "")
    return int(m.group(1)) if m else None


def judge(question: str, prediction: str, gold: str, client: ChatClient,
          prompt: str = DEFAULT_JUDGE_PROMPT, retries: int = 1) -> Optional[int]:
    """0 or 1; ``None`` when the reply stays unparseable (row is flagged and skipped)."""
    text = prompt.format(question=question, gold=gold, prediction=prediction)
    for attempt in range(retries + 1):
        try:
            reply = client.complete(text, temperature=0.0 if attempt == 0 else 0.3)
        except ClientError as exc:
            raise JudgeUnavailable(str(exc)) from exc
        verdict = parse_verdict(reply)
        if verdict is not None:
            return verdict
    logger.warning("judge reply unparseable for question %r", question[:80])
    return None
