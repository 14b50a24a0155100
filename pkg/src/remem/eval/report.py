"""Per-example scoring and the aggregated report (JSON, text table, CSV)."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .datasets import QaExample
from .judge import judge as judge_one
from .metrics import METRICS, best_over, is_refusal, refusal_score

KNOWN_METRICS = ("em", "f1", "bleu1", "refusal", "llm_j")
BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_SEED = 20240101


def parse_metrics(spec: str) -> List[str]:
    names = [m.strip().lower() for m in spec.split(",") if m.strip()]
    unknown = [m for m in names if m not in KNOWN_METRICS]
    if unknown or not names:
        raise ValueError(f"unknown metrics {unknown}; choose from {', '.join(KNOWN_METRICS)}")
    return names


@dataclass
class ExampleRow:
    qid: str
    category: Optional[str]
    question: str
    prediction: str
    golds: Sequence[str]
    unanswerable: bool
    scores: Dict[str, Optional[float]] = field(default_factory=dict)

    @property
    def refused(self) -> bool:
        return is_refusal(self.prediction)


def bootstrap_ci(values: Sequence[float], resamples: int = BOOTSTRAP_RESAMPLES,
                 seed: int = BOOTSTRAP_SEED, level: float = 0.95):
    """Percentile bootstrap of the mean; returns (low, high) or None for no data."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return None
    rng = np.random.default_rng(seed)
    means = x[rng.integers(0, x.size, size=(resamples, x.size))].mean(axis=1)
    alpha = (1.0 - level) / 2
    return float(np.quantile(means, alpha)), float(np.quantile(means, 1 - alpha))


@dataclass
class EvalReport:
    metrics: List[str]
    rows: List[ExampleRow]

    def _values(self, metric: str, rows=None) -> List[float]:
        rows = self.rows if rows is None else rows
        return [r.scores[metric] for r in rows if r.scores.get(metric) is not None]

    def mean(self, metric: str, category: Optional[str] = None) -> Optional[float]:
        rows = [r for r in self.rows if category is None or r.category == category]
        vals = self._values(metric, rows)
        return 100.0 * sum(vals) / len(vals) if vals else None

    @property
    def categories(self) -> List[str]:
        return sorted({r.category for r in self.rows if r.category is not None})

    @property
    def scored_metrics(self) -> List[str]:
        return [m for m in self.metrics if m != "refusal"]

    def flagged(self, metric: str) -> int:
        return sum(1 for r in self.rows if metric in r.scores and r.scores[metric] is None)

    def confusion(self) -> Dict[str, int]:
        c = {"refused_unanswerable": 0, "refused_answerable": 0,
             "answered_unanswerable": 0, "answered_answerable": 0}
        for r in self.rows:
            key = ("refused" if r.refused else "answered") + "_" + (
                "unanswerable" if r.unanswerable else "answerable")
            c[key] += 1
        return c

    def refusal(self):
        return refusal_score((r.prediction, r.unanswerable) for r in self.rows)

    def to_json(self) -> dict:
        overall = {m: self.mean(m) for m in self.scored_metrics}
        ci = {}
        for m in self.scored_metrics:
            bounds = bootstrap_ci(self._values(m))
            ci[m] = None if bounds is None else [100 * bounds[0], 100 * bounds[1]]
        out = {
            "examples": len(self.rows),
            "overall": overall,
            "bootstrap_ci95": ci,
            "per_category": {
                cat: {m: self.mean(m, cat) for m in self.scored_metrics} for cat in self.categories
            },
            "confusion": self.confusion(),
            "flagged": {m: self.flagged(m) for m in self.scored_metrics if self.flagged(m)},
        }
        if "refusal" in self.metrics:
            s = self.refusal()
            out["refusal"] = {
                "precision": 100 * s.precision, "recall": 100 * s.recall, "f1": 100 * s.f1,
                "refusals": s.refusals, "correct": s.correct, "unanswerable": s.unanswerable,
                "precision_undefined": s.precision_undefined, "recall_undefined": s.recall_undefined,
            }
        return out

    def table(self) -> str:
        cols = self.scored_metrics
        header = ["category", "n"] + cols
        body = []
        for cat in self.categories + [None]:
            n = sum(1 for r in self.rows if cat is None or r.category == cat)
            vals = [self.mean(m, cat) for m in cols]
            body.append([cat or "overall", str(n)] + ["-" if v is None else f"{v:.1f}" for v in vals])
        if "refusal" in self.metrics:
            s = self.refusal()
            body.append(["refusal P/R/F1", str(s.refusals),
                         f"{100 * s.precision:.1f}/{100 * s.recall:.1f}/{100 * s.f1:.1f}"]
                        + [""] * max(0, len(cols) - 1))
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
                 for row in [header] + body]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["qid", "category", "question", "prediction", "golds", "unanswerable", "refused"]
                   + self.scored_metrics)
        for r in self.rows:
            w.writerow([r.qid, r.category or "", r.question, r.prediction, " || ".join(r.golds),
                        int(r.unanswerable), int(r.refused)]
                       + ["" if r.scores.get(m) is None else r.scores[m] for m in self.scored_metrics])
        return buf.getvalue()

    def write(self, path) -> List[Path]:
        """Write ``<path>`` (JSON), ``<stem>.txt`` (table) and ``<stem>.csv``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")
        txt, csv_path = path.with_suffix(".txt"), path.with_suffix(".csv")
        txt.write_text(self.table() + "\n", encoding="utf-8")
        csv_path.write_text(self.csv(), encoding="utf-8")
        return [path, txt, csv_path]


def score_example(ex: QaExample, prediction: str, metrics: Sequence[str], judge_client=None) -> ExampleRow:
    row = ExampleRow(ex.qid or "", ex.category, ex.question, prediction, ex.gold_answers, ex.unanswerable)
    for m in metrics:
        if m in METRICS:
            row.scores[m] = float(best_over(METRICS[m], prediction, ex.gold_answers))
        elif m == "llm_j" and judge_client is not None:
            verdicts = [judge_one(ex.question, prediction, g, judge_client) for g in ex.gold_answers]
            parsed = [v for v in verdicts if v is not None]
            row.scores[m] = float(max(parsed)) if parsed else None
    return row


def evaluate(
    examples: Sequence[QaExample],
    answer: Callable[[QaExample], str],
    metrics: Sequence[str] = ("em", "f1", "bleu1"),
    judge_client=None,
    jobs: int = 1,
) -> EvalReport:
    """Answer every example (in parallel when ``jobs > 1``) and score it."""
    metrics = [m for m in metrics if m != "llm_j" or judge_client is not None]

    def one(ex):
        return score_example(ex, answer(ex), metrics, judge_client)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, examples))
    else:
        rows = [one(ex) for ex in examples]
    return EvalReport(list(metrics), rows)
