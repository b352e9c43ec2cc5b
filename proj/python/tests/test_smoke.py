import json
import math
import os
from pathlib import Path

import pytest

import dynact

FIXTURES = Path(os.environ.get("DYNACT_FIXTURES_DIR", Path(__file__).resolve().parents[2] / "tests" / "fixtures"))


def test_parse_response_extracts_first_block():
    thought, code = dynact.parse_response("Think.\n```python\nprint(1)\n```\n```python\nprint(2)\n```")
    assert thought == "Think."
    assert code == "print(1)"
    assert dynact.parse_response("no code here")[1] is None


def test_score_answer():
    assert dynact.score_answer("1,234", "1234")
    assert dynact.score_answer("Paris ", "paris")
    assert not dynact.score_answer("0x10", "16")


def test_embedding_is_unit_norm_and_ranking_is_stable():
    v = dynact.embed("Read a CSV file")
    assert len(v) == 256
    assert math.isclose(sum(x * x for x in v), 1.0, abs_tol=1e-9)
    docs = {"b_fn": "same text", "a_fn": "same text", "other": "unrelated words"}
    names = [n for n, _ in dynact.rank(docs, "same text", 2)]
    assert names == ["a_fn", "b_fn"]


def test_coverage_of_a_trajectory_dict():
    traj = {
        "task_id": "x",
        "success": True,
        "steps": [
            {"index": 1, "status": "ok", "defined_functions": [{"name": "helper", "source": "def helper(): pass"}]},
            {"index": 2, "status": "ok"},
            {"index": 3, "status": "ok"},
            {"index": 4, "status": "ok"},
        ],
    }
    cov, literal, novel = dynact.coverage(traj, {"submit_final_answer"})
    assert cov == 0.75 and literal == 0.75 and novel == 1


def test_complexity():
    src = "def f(xs):\n    for x in xs:\n        if x:\n            return x\n"
    assert dynact.cyclomatic_complexity(src) == 3
    with pytest.raises(dynact.DynactError):
        dynact.cyclomatic_complexity("def f(:\n")


def test_mock_executor_keeps_state_and_calls_back():
    ex = dynact.MockExecutor()
    assert ex.execute("x = 41")["ok"]
    r = ex.execute("print(x + 1)\nsubmit_final_answer(x + 1)")
    assert r["stdout"] == "42\n"
    assert r["final_answer"] == "42"
    ex.set_retrieval_handler(lambda q, k: f"asked {q} {k}")
    assert ex.execute("get_relevant_actions('sum', 2)")["stdout"] == "asked sum 2\n"
    ex.reset()
    assert ex.execute("x")["error"]["type"] == "NameError"


def test_scripted_run(tmp_path, monkeypatch):
    suite = FIXTURES / "ablation"
    monkeypatch.chdir(suite)
    code, text = dynact.run(
        {
            "dataset": str(suite / "tasks.jsonl"),
            "library": str(tmp_path / "lib"),
            "out": str(tmp_path / "out"),
            "transcript": str(suite / "transcript.jsonl"),
            "mock_executor": True,
            "max_steps": 2,
        }
    )
    assert code == 0, text
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["correct"] == 6
    assert (tmp_path / "out" / "reports" / "coverage.json").exists()
    assert dynact.report(str(tmp_path / "out"))[0] == 0
