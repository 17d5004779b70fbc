import io
import json

import pytest

from conftest import FIXTURES
from helpers import with_flips
from raclab.cli import main
from raclab.gateway import CountingReasoner


def run(*argv, factory=None):
    buf = io.StringIO()
    code = main(list(argv), reasoner_factory=factory, out=buf)
    return code, buf.getvalue()


def test_progress_prints_three_states():
    code, text = run("progress", "-d", "blocksworld", "-p", "bw-p01", "-a", "pickup a, stack a b")
    assert code == 0
    lines = text.splitlines()
    assert lines[1] == "> action: (pickup a)"
    assert [ln for ln in lines if not ln.startswith(">")][-1] == "(clear a) (handempty) (on a b) (ontable b)"
    assert sum(1 for ln in lines if ln.startswith("(")) == 3


def test_progress_from_files(tmp_path):
    from importlib import resources

    src = resources.files("raclab") / "data" / "domains" / "blocksworld"
    (tmp_path / "bw.dom").write_text((src / "domain.pddl").read_text())
    (tmp_path / "annotations.json").write_text((src / "annotations.json").read_text())
    (tmp_path / "p.pddl").write_text((src / "problems" / "bw-p01.pddl").read_text())
    code, text = run("progress", "-d", str(tmp_path / "bw.dom"), "-p", str(tmp_path / "p.pddl"), "-a", "pickup a")
    assert code == 0 and "(holding a)" in text


def test_check_reports_unsatisfied_preconditions():
    assert run("check", "-d", "bw", "-p", "bw-p01", "-a", "pickup a")[0] == 0
    code, text = run("check", "-d", "bw", "-p", "bw-p01", "-a", "unstack a b")
    assert code == 1
    assert "(on a b)" in text


def test_answer():
    code, text = run("answer", "-d", "bw", "-p", "bw-p01", "-a", "pickup a, stack a b", "-q", "holds (on a b)")
    assert code == 0 and json.loads(text)["answer"] == "true"
    code, text = run("answer", "-d", "bw", "-p", "bw-p01", "-a", "pickup a", "-q", "choose A: holds (handempty); B: holds (holding a)")
    assert json.loads(text) == {"answer": "B", "evidence": {"satisfied": ["B"]}}


@pytest.mark.parametrize("argv", [["fly"], [], ["progress", "-d", "bw"], ["run-bench", "-i", "x.jsonl", "--mode", "replay"]])
def test_usage_errors_exit_two(argv):
    assert run(*argv)[0] == 2


def test_live_mode_without_key(monkeypatch):
    monkeypatch.delenv("RACLAB_API_KEY", raising=False)
    assert run("run-bench", "-i", str(FIXTURES / "bw12.jsonl"), "--mode", "live")[0] == 2


def test_audit_with_three_flips(tmp_path, mixed20):
    path = tmp_path / "flipped.jsonl"
    path.write_text(with_flips(mixed20, {0, 9, 19}))
    code, text = run("audit", "-i", str(path), "--out", str(tmp_path / "out"))
    assert code == 1
    assert [ln.split()[1] for ln in text.splitlines() if ln.startswith("FLAG")] == ["mix-001:", "mix-010:", "mix-020:"]
    patch = (tmp_path / "out" / "audit.patch.jsonl").read_text().splitlines()
    assert len(patch) == 3
    assert json.loads((tmp_path / "out" / "audit.json").read_text())["flagged"] == 3


def test_clean_audit_exits_zero():
    assert run("audit", "-i", str(FIXTURES / "bw12.jsonl"))[0] == 0


def test_render_prompts_makes_no_reasoner_calls():
    counters = []

    def factory(cfg, registry):
        counters.append(CountingReasoner())
        return counters[-1]

    code, text = run("render-prompts", "-i", str(FIXTURES / "bw12.jsonl"), "--mode", "mock", factory=factory)
    assert code == 0
    assert sum(len(c.calls) for c in counters) == 0
    assert text.count("=== bw-") == 12
    assert "[ACTION TO EXECUTE]:" in text
    code, text = run("render-prompts", "-i", str(FIXTURES / "bw12.jsonl"), "--method", "zero_shot",
                     "--question-id", "bw-001", factory=factory)
    assert code == 0 and "[PROBLEM]:" in text
    assert sum(len(c.calls) for c in counters) == 0


def test_mock_bench_is_deterministic(tmp_path):
    first = run("run-bench", "-i", str(FIXTURES / "mixed20.jsonl"), "--mode", "mock", "--method", "sc")
    second = run("run-bench", "-i", str(FIXTURES / "mixed20.jsonl"), "--mode", "mock", "--method", "sc", "--format", "markdown")
    assert first == second
    assert first[0] == 0


def test_bench_with_method_errors_exits_one(tmp_path):
    cache = tmp_path / "cache"
    cache.mkdir()
    code, _ = run("run-bench", "-i", str(FIXTURES / "bw12.jsonl"), "--mode", "replay", "--cache-dir", str(cache))
    assert code == 1
