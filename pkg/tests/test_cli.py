from __future__ import annotations

import json
from pathlib import Path

import pytest

from remem.cli import main
from remem.graph import MemoryGraph, graph_stats
from remem.snapshot import FILES, load_snapshot, save_snapshot

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = str(FIXTURES / "corpus.jsonl")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def snap(tmp_path, capsys):
    out = tmp_path / "snap"
    code, _, _ = run(capsys, "index", "--corpus", CORPUS, "--out", str(out))
    assert code == 0
    return out


def test_index_is_deterministic(snap, tmp_path, capsys):
    code, out, _ = run(capsys, "index", "--corpus", CORPUS, "--out", str(tmp_path / "again"),
                       "--extractor", "rule", "--embedder", "mock")
    assert code == 0
    assert out.startswith("phrases=")
    for f in FILES:
        assert (snap / f).read_bytes() == (tmp_path / "again" / f).read_bytes()


def test_index_refuses_to_overwrite(snap, capsys):
    code, _, err = run(capsys, "index", "--corpus", CORPUS, "--out", str(snap))
    assert code == 1 and "--force" in err
    assert run(capsys, "index", "--corpus", CORPUS, "--out", str(snap), "--force")[0] == 0


def test_index_missing_corpus(tmp_path, capsys):
    missing = tmp_path / "nowhere.jsonl"
    code, _, err = run(capsys, "index", "--corpus", str(missing), "--out", str(tmp_path / "o"))
    assert code == 1
    assert str(missing) in err


def test_index_bad_threshold(tmp_path, capsys):
    code, _, err = run(capsys, "index", "--corpus", CORPUS, "--out", str(tmp_path / "o"),
                       "--synonymy-threshold", "1.5")
    assert code == 1
    assert "threshold must be in (0,1]" in err


def test_index_live_embedder_without_key(tmp_path, capsys):
    code, _, err = run(capsys, "index", "--corpus", CORPUS, "--out", str(tmp_path / "o"),
                       "--embedder", "live")
    assert code == 2


def test_query_matches_golden(snap, capsys):
    code, out, _ = run(capsys, "query", "--graph", str(snap), "--question", "What did Caroline adopt?",
                       "--script", str(FIXTURES / "plan_caroline.json"), "--synthesizer", "echo", "--trace")
    assert code == 0
    assert out == (FIXTURES / "golden" / "query_trace.jsonl").read_text(encoding="utf-8")


def test_query_single_warns(snap, capsys):
    code, out, err = run(capsys, "query", "--graph", str(snap), "--question", "Who adopted a puppy?",
                         "--mode", "single", "--max-steps", "5", "--synthesizer", "echo")
    assert code == 0
    assert "max-steps ignored in single mode" in err
    assert out.strip()


def test_query_without_planner_credentials(snap, capsys):
    code, _, err = run(capsys, "query", "--graph", str(snap), "--question", "q")
    assert code == 2


def test_query_corrupt_snapshot(snap, capsys):
    meta = json.loads((snap / "meta.json").read_text())
    meta["format_version"] = 7
    (snap / "meta.json").write_text(json.dumps(meta))
    code, _, err = run(capsys, "query", "--graph", str(snap), "--question", "q",
                       "--synthesizer", "echo", "--mode", "single")
    assert code == 1
    assert "format version" in err


def test_eval_with_predictions(tmp_path, capsys):
    report = tmp_path / "r" / "report.json"
    code, out, _ = run(capsys, "eval", "--dataset", str(FIXTURES / "fact_qa.jsonl"), "--format", "factQA",
                       "--metrics", "em,refusal", "--predictions", str(FIXTURES / "fact_qa_predictions.jsonl"),
                       "--report", str(report))
    assert code == 0
    assert "overall" in out
    data = json.loads(report.read_text())
    # brute-force truth: E001 joined E100 in 1990 and E101 in 1995; E003 has no facts
    truth = {"t1": "e100", "t2": "e101", "t3": "no information available"}
    preds = {json.loads(l)["id"]: json.loads(l)["prediction"]
             for l in (FIXTURES / "fact_qa_predictions.jsonl").read_text().splitlines()}
    expected = sum(preds[q].casefold().rstrip(".") == a for q, a in truth.items())
    assert data["overall"]["em"] == pytest.approx(100 * expected / 3)
    assert data["refusal"]["precision"] == 100.0
    assert report.with_suffix(".txt").exists() and report.with_suffix(".csv").exists()


def test_eval_through_agent(snap, tmp_path, capsys):
    code, out, _ = run(capsys, "eval", "--dataset", str(FIXTURES / "conv_qa.jsonl"), "--graph", str(snap),
                       "--mode", "single", "--synthesizer", "echo", "--metrics", "em,f1,refusal")
    assert code == 0
    assert out.splitlines()[0].split()[:2] == ["category", "n"]


def test_eval_judge_needs_key(tmp_path, capsys):
    code, _, err = run(capsys, "eval", "--dataset", str(FIXTURES / "fact_qa.jsonl"), "--format", "factQA",
                       "--predictions", str(FIXTURES / "fact_qa_predictions.jsonl"), "--judge", "llm")
    assert code == 2
    assert "judge requires chat credentials" in err


def test_eval_bad_dataset_line(tmp_path, capsys):
    bad = tmp_path / "d.jsonl"
    bad.write_text('{"type": "qa", "question": "q", "answer": "a"}\nnope\n')
    code, _, err = run(capsys, "eval", "--dataset", str(bad), "--predictions", str(bad))
    assert code == 1 and ":2:" in err


def test_stats(snap, capsys):
    code, out, _ = run(capsys, "stats", "--graph", str(snap))
    assert code == 0
    assert json.loads(out) == graph_stats(load_snapshot(snap)).to_json()


def test_stats_empty_snapshot(tmp_path, capsys):
    save_snapshot(MemoryGraph().freeze(), tmp_path / "empty")
    code, out, _ = run(capsys, "stats", "--graph", str(tmp_path / "empty"))
    assert code == 0
    assert all(v == 0 for v in json.loads(out).values())


def test_stats_missing_dir(tmp_path, capsys):
    assert run(capsys, "stats", "--graph", str(tmp_path / "nope"))[0] == 1


def test_config_layering(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "remem.toml"
    cfg.write_text('[index]\nsynonymy-threshold = 2.0\n')
    code, _, err = run(capsys, "--config", str(cfg), "index", "--corpus", CORPUS, "--out", str(tmp_path / "o"))
    assert code == 1 and "threshold" in err
    monkeypatch.setenv("REMEM_SYNONYMY_THRESHOLD", "0.9")  # env beats the file
    assert run(capsys, "--config", str(cfg), "index", "--corpus", CORPUS, "--out", str(tmp_path / "o"))[0] == 0
    code, _, _ = run(capsys, "--config", str(cfg), "index", "--corpus", CORPUS, "--out", str(tmp_path / "p"),
                     "--synonymy-threshold", "3")  # flag beats env
    assert code == 1


@pytest.mark.parametrize("command,flags", [
    ("index", ["--corpus", "--out", "--extractor", "--synonymy-threshold", "--embedder", "--force"]),
    ("query", ["--graph", "--question", "--mode", "--max-steps", "--top-k", "--trace"]),
    ("eval", ["--graph", "--dataset", "--format", "--metrics", "--judge", "--report", "--jobs"]),
    ("stats", ["--graph"]),
])
def test_help(command, flags, capsys):
    with pytest.raises(SystemExit) as info:
        main([command, "--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for flag in flags:
        assert flag in out
