"""Deterministic answer metrics sharing one SQuAD-style normalization."""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Tuple

REFUSAL = "no information available"

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> str:
    text = (text or "").casefold().translate(_PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def _tokens(text: str):
    return normalize_answer(text).split()


def exact_match(prediction: str, gold: str) -> int:
    return int(normalize_answer(prediction) == normalize_answer(gold))


def token_f1(prediction: str, gold: str) -> float:
    pred, ref = _tokens(prediction), _tokens(gold)
    if not pred and not ref:
        return 1.0
    common = Counter(pred) & Counter(ref)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def bleu1(prediction: str, gold: str) -> float:
    """Clipped unigram precision times the brevity penalty."""
    pred, ref = _tokens(prediction), _tokens(gold)
    if not pred:
        return 0.0
    ref_counts = Counter(ref)
    clipped = sum(min(n, ref_counts[w]) for w, n in Counter(pred).items())
    precision = clipped / len(pred)
    bp = math.exp(min(0.0, 1.0 - len(ref) / len(pred)))
    return precision * bp


def best_over(metric: Callable[[str, str], float], prediction: str, golds: Sequence[str]) -> float:
    return max((metric(prediction, g) for g in golds), default=0.0)


METRICS = {"em": exact_match, "f1": token_f1, "bleu1": bleu1}


def is_refusal(prediction: str) -> bool:
    return not (prediction or "").strip() or REFUSAL in prediction.casefold()


@dataclass(frozen=True)
class RefusalScore:
    precision: float
    recall: float
    f1: float
    refusals: int
    correct: int
    unanswerable: int
    precision_undefined: bool = False
    recall_undefined: bool = False

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1, self.refusals))


def refusal_score(rows: Iterable[Tuple[str, bool]]) -> RefusalScore:
    refusals = correct = unanswerable = 0
    for prediction, is_unanswerable in rows:
        refused = is_refusal(prediction)
        refusals += refused
        unanswerable += bool(is_unanswerable)
        correct += refused and bool(is_unanswerable)
    p = correct / refusals if refusals else 0.0
    r = correct / unanswerable if unanswerable else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return RefusalScore(p, r, f, refusals, correct, unanswerable,
                        precision_undefined=not refusals, recall_undefined=not unanswerable)
