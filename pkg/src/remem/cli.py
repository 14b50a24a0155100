"""``remem`` command line: index, query, eval, stats.

Options are layered: built-in defaults < config file < environment < flags.
The config file (``--config``, default ``./remem.toml`` when present) holds
flag names as keys, either at top level or under a ``[<command>]`` table::

    synonymy-threshold = 0.85
    [query]
    max-steps = 5

Environment overrides use ``REMEM_`` plus the upper-cased flag name with
dashes as underscores, e.g. ``REMEM_TOP_K=20``.

Exit codes: 0 ok, 1 user or I/O error, 2 external-service error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .agent import (
    AgentConfig,
    AgentError,
    EchoSynthesizer,
    LLMPlanner,
    LLMSynthesizer,
    Mode,
    PlannerUnavailable,
    ScriptedPlanner,
    SynthesizerUnavailable,
    answer_question,
)
from .clients import (
    ChatClient,
    ClientError,
    EmbeddingClient,
    HashEmbeddingProvider,
    ProviderUnavailable,
    embedder_from_tag,
)
from .eval import DatasetFormat, ParseError, evaluate, load_dataset, parse_metrics
from .eval.judge import JudgeUnavailable
from .extraction import Episode, ExtractionError, LLMExtractor, RuleExtractor
from .graph import graph_stats
from .indexing import IndexConfig, IndexingError, build_graph
from .snapshot import SnapshotError, load_snapshot, save_snapshot
from .temporal import TemporalError

logger = logging.getLogger("remem")

EXIT_OK, EXIT_USER, EXIT_SERVICE = 0, 1, 2

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "index": {"extractor": "rule", "synonymy-threshold": 0.8, "embedder": "mock",
              "embed-dim": 64, "embed-seed": 0, "jobs": 1},
    "query": {"mode": "iterative", "max-steps": 3, "top-k": 10, "synthesizer": "llm"},
    "eval": {"format": "conversationQA", "metrics": "em,f1,bleu1", "judge": "none",
             "mode": "iterative", "max-steps": 3, "top-k": 10, "synthesizer": "llm", "jobs": 1},
    "stats": {},
}
SERVICE_ERRORS = (ClientError, AgentError, JudgeUnavailable, ExtractionError)


class UserError(Exception):
    pass


class ServiceError(Exception):
    pass


def _dest(flag: str) -> str:
    return flag.replace("-", "_")


def _load_config(path: Optional[str], command: str) -> Dict[str, Any]:
    if path is None:
        if not Path("remem.toml").exists():
            return {}
        path = "remem.toml"
    p = Path(path)
    if not p.exists():
        raise UserError(f"config file not found: {p}")
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise UserError(f"config file {p} is invalid: {exc}") from None
    merged = {k: v for k, v in data.items() if not isinstance(v, dict)}
    merged.update(data.get(command, {}))
    return merged


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Fill unset options from env, then the config file, then defaults."""
    command = args.command
    config = _load_config(args.config, command)
    known = {a.dest: a for a in parser._subparsers._group_actions[0].choices[command]._actions}
    for flag, default in DEFAULTS[command].items():
        dest = _dest(flag)
        if getattr(args, dest, None) is not None:
            continue
        env = os.environ.get("REMEM_" + dest.upper())
        value = env if env is not None else config.get(flag, config.get(dest, default))
        action = known.get(dest)
        if value is not None and action is not None and action.type is not None:
            try:
                value = action.type(value)
            except (TypeError, ValueError):
                raise UserError(f"bad value for --{flag}: {value!r}") from None
        if action is not None and action.choices and value not in action.choices:
            raise UserError(f"bad value for --{flag}: {value!r} (choose from {', '.join(action.choices)})")
        setattr(args, dest, value)
    return args


# -- commands -----------------------------------------------------------


def read_corpus(path: Path) -> List[Episode]:
    if not path.exists():
        raise UserError(f"corpus not found: {path}")
    episodes = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                episodes.append(Episode.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError, TemporalError) as exc:
                raise UserError(f"{path}:{lineno}: bad episode ({exc})") from None
    return episodes


def _embedder(kind: str, dim: int, seed: int) -> EmbeddingClient:
    if kind == "mock":
        return EmbeddingClient(HashEmbeddingProvider(dim=dim, seed=seed))
    return EmbeddingClient.from_env()


def cmd_index(args) -> int:
    try:
        cfg = IndexConfig(synonymy_threshold=args.synonymy_threshold, jobs=args.jobs)
    except IndexingError as exc:
        raise UserError(str(exc)) from None
    corpus = read_corpus(Path(args.corpus))
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        if not args.force:
            raise UserError(f"{out} exists and is not empty; pass --force to overwrite")
        shutil.rmtree(out)
    extractor = RuleExtractor() if args.extractor == "rule" else LLMExtractor(ChatClient.from_env())
    embedder = _embedder(args.embedder, args.embed_dim, args.embed_seed)
    try:
        g = build_graph(corpus, cfg, extractor, embedder)
    except IndexingError as exc:
        raise UserError(str(exc)) from None
    save_snapshot(g, out)
    print(_stats_line(g))
    return EXIT_OK


def _stats_line(g) -> str:
    s = graph_stats(g)
    return (
        f"phrases={s.phrase_nodes} gists={s.gist_nodes} relations={s.relation_edges} "
        f"contexts={s.context_edges} synonyms={s.synonymy_edges} triples={s.triples} "
        f"mean_phrase_degree={s.mean_phrase_degree:.3f} mean_gist_degree={s.mean_gist_degree:.3f}"
    )


def _load_graph(path: str):
    try:
        return load_snapshot(path)
    except SnapshotError as exc:
        raise UserError(str(exc)) from None


def _graph_embedder(g):
    tag = g.build_config.embedder
    return embedder_from_tag(tag)


def _agent_parts(args, cfg: AgentConfig):
    planner = None
    if cfg.mode is Mode.ITERATIVE:
        if args.script:
            try:
                rows = json.loads(Path(args.script).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise UserError(f"cannot read planner script {args.script}: {exc}") from None
            planner = ScriptedPlanner.from_json(rows)
        else:
            planner = LLMPlanner(ChatClient.from_env(), evidence_char_budget=cfg.evidence_char_budget)
    if args.synthesizer == "echo":
        synthesizer = EchoSynthesizer()
    else:
        synthesizer = LLMSynthesizer(ChatClient.from_env())
    return planner, synthesizer


def _agent_config(args) -> AgentConfig:
    prompt = None
    if getattr(args, "final_prompt", None):
        try:
            prompt = Path(args.final_prompt).read_text(encoding="utf-8")
        except OSError as exc:
            raise UserError(f"cannot read {args.final_prompt}: {exc}") from None
    try:
        return AgentConfig(mode=Mode(args.mode), max_steps=args.max_steps, top_k=args.top_k,
                           planner="script" if args.script else "llm", final_prompt_override=prompt)
    except ValueError as exc:
        raise UserError(str(exc)) from None


def cmd_query(args) -> int:
    if args.mode == "single" and args.max_steps_given:
        print("warning: max-steps ignored in single mode", file=sys.stderr)
    g = _load_graph(args.graph)
    cfg = _agent_config(args)
    planner, synthesizer = _agent_parts(args, cfg)
    answer = answer_question(g, args.question, cfg, planner, synthesizer, _graph_embedder(g))
    if args.trace:
        for row in answer.trace():
            print(json.dumps(row, ensure_ascii=False))
    print(answer.text)
    return EXIT_OK


def _read_predictions(path: str) -> Dict[str, str]:
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                preds[str(row["id"])] = str(row["prediction"])
            except (ValueError, KeyError, TypeError) as exc:
                raise UserError(f"{path}:{lineno}: bad prediction row ({exc})") from None
    return preds


def cmd_eval(args) -> int:
    try:
        metrics = parse_metrics(args.metrics)
    except ValueError as exc:
        raise UserError(str(exc)) from None
    judge_client = None
    if args.judge == "llm":
        if not os.environ.get("REMEM_CHAT_API_KEY"):
            raise ServiceError("judge requires chat credentials (set REMEM_CHAT_API_KEY)")
        judge_client = ChatClient.from_env()
        if "llm_j" not in metrics:
            metrics.append("llm_j")
    if not Path(args.dataset).exists():
        raise UserError(f"dataset not found: {args.dataset}")
    try:
        _, examples = load_dataset(args.dataset, DatasetFormat(args.format))
    except ParseError as exc:
        raise UserError(str(exc)) from None

    if args.predictions:
        preds = _read_predictions(args.predictions)
        missing = [ex.qid for ex in examples if ex.qid not in preds]
        if missing:
            raise UserError(f"no prediction for {len(missing)} question(s), e.g. {missing[0]}")

        def answer(ex):
            return preds[ex.qid]
    else:
        if not args.graph:
            raise UserError("eval needs --graph (or --predictions)")
        g = _load_graph(args.graph)
        cfg = _agent_config(args)
        embedder = _graph_embedder(g)

        def answer(ex):
            planner, synthesizer = _agent_parts(args, cfg)
            return answer_question(g, ex.question, cfg, planner, synthesizer, embedder).text

    report = evaluate(examples, answer, metrics, judge_client, jobs=args.jobs)
    if args.report:
        for p in report.write(args.report):
            logger.info("wrote %s", p)
    print(report.table())
    return EXIT_OK


def cmd_stats(args) -> int:
    g = _load_graph(args.graph)
    print(json.dumps(graph_stats(g).to_json(), indent=2))
    return EXIT_OK


# -- parser -------------------------------------------------------------


def _agent_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["single", "iterative"], help="single-step or iterative inference")
    p.add_argument("--max-steps", type=int, help="tool-call budget in iterative mode (default 3)")
    p.add_argument("--top-k", type=int, help="hits per list for retrieval tools (default 10)")
    p.add_argument("--script", help="JSON list of planner steps {thought, tool, args} (scripted planner)")
    p.add_argument("--synthesizer", choices=["llm", "echo"], help="answer synthesizer (default llm)")
    p.add_argument("--final-prompt", help="file whose text replaces the answer-generation prompt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="remem", description="Episodic memory graph: index, query, evaluate.")
    parser.add_argument("--version", action="version", version=f"remem {__version__}")
    parser.add_argument("--config", help="TOML config file (default ./remem.toml if present)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build a memory graph snapshot from a corpus")
    p.add_argument("--corpus", required=True, help="JSONL of episodes {chunk_id, timestamp, text|turns}")
    p.add_argument("--out", required=True, help="snapshot directory to write")
    p.add_argument("--extractor", choices=["llm", "rule"], help="gist/fact extractor (default rule)")
    p.add_argument("--synonymy-threshold", type=float, help="cosine threshold for synonymy edges, in (0,1]")
    p.add_argument("--embedder", choices=["live", "mock"], help="embedding provider (default mock)")
    p.add_argument("--embed-dim", type=int, help="mock embedding dimension (default 64)")
    p.add_argument("--embed-seed", type=int, help="mock embedding seed (default 0)")
    p.add_argument("--jobs", type=int, help="parallel extraction workers (default 1)")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty --out")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="answer one question against a snapshot")
    p.add_argument("--graph", required=True, help="snapshot directory")
    p.add_argument("--question", required=True, help="question text")
    _agent_flags(p)
    p.add_argument("--trace", action="store_true", help="print the step history as JSONL")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="evaluate answers on a QA dataset")
    p.add_argument("--graph", help="snapshot directory used to answer questions")
    p.add_argument("--dataset", required=True, help="dataset JSONL")
    p.add_argument("--format", choices=[f.value for f in DatasetFormat], help="dataset format")
    p.add_argument("--metrics", help="comma list from em,f1,bleu1,refusal,llm_j (default em,f1,bleu1)")
    p.add_argument("--judge", choices=["none", "llm"], help="LLM judge for the llm_j metric")
    p.add_argument("--report", help="report path (.json; .txt table and .csv rows written alongside)")
    p.add_argument("--predictions", help="JSONL {id, prediction} to score instead of running the agent")
    p.add_argument("--jobs", type=int, help="parallel answer workers (default 1)")
    _agent_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="print graph counts and mean degrees")
    p.add_argument("--graph", required=True, help="snapshot directory")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.max_steps_given = getattr(args, "max_steps", None) is not None
    try:
        resolve(args, parser)
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except (PlannerUnavailable, SynthesizerUnavailable, ProviderUnavailable) + SERVICE_ERRORS as exc:
        print(f"error: external service failed: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
