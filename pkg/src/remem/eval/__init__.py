from .datasets import DatasetFormat, ParseError, QaExample, load_dataset
from .judge import JudgeUnavailable, judge, parse_verdict
from .metrics import (
    REFUSAL,
    RefusalScore,
    bleu1,
    best_over,
    exact_match,
    is_refusal,
    normalize_answer,
    refusal_score,
    token_f1,
)
from .report import EvalReport, ExampleRow, bootstrap_ci, evaluate, parse_metrics, score_example

__all__ = [
    "DatasetFormat", "EvalReport", "ExampleRow", "JudgeUnavailable", "ParseError", "QaExample",
    "REFUSAL", "RefusalScore", "best_over", "bleu1", "bootstrap_ci", "evaluate", "exact_match",
    "is_refusal", "judge", "load_dataset", "normalize_answer", "parse_metrics", "parse_verdict",
    "refusal_score", "score_example", "token_f1",
]
