"""Acceptance checks, one test per criterion.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion number.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter
from pathlib import Path

import pytest
from hypothesis import given, settings

import bruteforce
from conftest import FIXTURES, domain_source
from helpers import Scripted, make_instance, with_flips
from strategies import PROBLEMS, groundings, random_state, random_walk, walks
from raclab.cli import main
from raclab.config import Config
from raclab.core import Literal, State, state_diff
from raclab.domain import ground_term, parse_state_text, render_state_canonical
from raclab.engine import is_applicable, progress
from raclab.errors import AnswerParseError
from raclab.gateway import CountingReasoner, Reasoner
from raclab.harness import ErrorLabel, accuracy, audit_labels, classify_error, load_instances, oracle_trace, oracle_verdict
from raclab.mock import SymbolicMockReasoner
from raclab.pipeline import MethodKind, majority_vote, normalize_answer, run_baseline, run_prorac
from raclab.query import Choice, QueryKind
from raclab.questions import QuestionSpec
from raclab.registry import bundled

REG = bundled()
SEED = 20240611
DOMAINS = ("blocksworld", "depots", "grippers")


def as_tuples(s: State):
    return {(f.predicate, *f.args) for f in s}


def init_of(domain, problem):
    return REG.get(domain).problems[problem].init


# -- 1 -------------------------------------------------------------------------

@pytest.mark.criterion(1, "engine matches brute-force evaluator (>=60 sequences, 3 domains, lengths 0-19)")
def test_engine_matches_bruteforce(sequences):
    assert len(sequences) >= 60
    assert {rec["domain"] for rec in sequences} == set(DOMAINS)
    lengths = {len(rec["actions"]) for rec in sequences}
    assert min(lengths) == 0 and max(lengths) == 19
    schemas = {d: bruteforce.load_schemas(domain_source(d)) for d in DOMAINS}
    mismatches = []
    for n, rec in enumerate(sequences):
        entry = REG.get(rec["domain"])
        p = entry.problems[rec["problem"]]
        expected_states, expected_fail = bruteforce.run(
            schemas[rec["domain"]], as_tuples(p.init), [bruteforce.parse_term(a) for a in rec["actions"]])
        t = progress(p.init, [ground_term(entry.domain, a, p.objects) for a in rec["actions"]])
        if t.failure_index != expected_fail or [as_tuples(s) for s in t.states] != [set(s) for s in expected_states]:
            mismatches.append(n)
    assert mismatches == []


# -- 2 -------------------------------------------------------------------------

def assert_frame_and_effects(before, a, after):
    added, removed = state_diff(before, after)
    assert added <= a.add and removed <= a.delete, a.canonical()
    assert a.add <= after.fluents, a.canonical()
    assert not (a.delete & after.fluents), a.canonical()


@pytest.mark.criterion(2, "frame and effect invariants on every applicable step (>=1000 steps)")
def test_frame_and_effect_invariants_seeded(registry, sequences):
    steps = 0
    for rec in sequences:
        entry = registry.get(rec["domain"])
        p = entry.problems[rec["problem"]]
        t = progress(p.init, [ground_term(entry.domain, a, p.objects) for a in rec["actions"]])
        for i in range(len(t.states) - 1):
            assert_frame_and_effects(t.states[i], t.actions[i], t.states[i + 1])
            steps += 1
    rng = random.Random(SEED)
    while steps < 1200:
        domain, problem = rng.choice(PROBLEMS)
        actions = random_walk(rng, domain, problem, rng.randint(1, 19))
        t = progress(init_of(domain, problem), actions)
        assert t.executable
        for i, a in enumerate(actions):
            assert_frame_and_effects(t.states[i], a, t.states[i + 1])
            steps += 1
    assert steps >= 1000


@pytest.mark.criterion(2, "frame and effect invariants on every applicable step (>=1000 steps)")
@settings(max_examples=150, deadline=None)
@given(walks(max_length=19))
def test_frame_and_effect_invariants_generated(walk):
    domain, problem, actions = walk
    t = progress(init_of(domain, problem), actions)
    assert t.executable
    for i, a in enumerate(actions):
        assert_frame_and_effects(t.states[i], a, t.states[i + 1])


# -- 3 -------------------------------------------------------------------------

@pytest.mark.criterion(3, "canonical state text round-trips (fixture states and 500 random states)")
def test_state_round_trip(registry, sequences):
    fixture_states = []
    for name in DOMAINS:
        entry = registry.get(name)
        fixture_states += [(entry, p.init) for p in entry.problems.values()]
    for rec in sequences:
        entry = registry.get(rec["domain"])
        p = entry.problems[rec["problem"]]
        t = progress(p.init, [ground_term(entry.domain, a, p.objects) for a in rec["actions"]])
        fixture_states += [(entry, s) for s in t.states]
    rng = random.Random(SEED)
    generated = []
    for _ in range(500):
        domain, problem = rng.choice(PROBLEMS)
        generated.append((registry.get(domain), random_state(rng, domain, problem)))
    assert len(generated) == 500
    for entry, s in fixture_states + generated:
        assert parse_state_text(render_state_canonical(s), entry.domain) == s


# -- 4 -------------------------------------------------------------------------

@pytest.mark.criterion(4, "mock ProRAC verdicts equal oracle verdicts on all structured fixtures")
@pytest.mark.parametrize("pipeline_mode", ["structured", "nl"])
def test_prorac_ceiling(registry, bw12, mixed20, mislabeled, pipeline_mode):
    instances = bw12 + mixed20 + [mislabeled]
    kinds = set()
    for inst in instances:
        spec = inst.spec()
        kinds.add("mcq" if spec.is_mcq else f"{spec.kind.value}/{spec.validation}" if spec.kind is QueryKind.VALIDATION else spec.kind.value)
    assert {"projection", "executability", "plan_verification", "validation/three_way", "mcq"} <= kinds

    mock = SymbolicMockReasoner(registry)
    cfg = Config(pipeline_mode=pipeline_mode)
    disagreements = []
    for inst in instances:
        got = normalize_answer(run_prorac(inst, cfg, mock).answer.answer)
        want = normalize_answer(oracle_verdict(inst).answer)
        if got != want:
            disagreements.append((inst.question_id, got, want))
    assert disagreements == []


# -- 5 -------------------------------------------------------------------------

ON_ANY = {
    "blocksworld": "(handempty)",
    "depots": "(available hoist0)",
    "grippers": "(free robot1 lgripper1)",
}


def projection(lit_text, domain):
    from raclab.domain import parse_literals_text

    return QuestionSpec(QueryKind.PROJECTION, parse_literals_text(lit_text, REG.get(domain).domain))


@pytest.mark.criterion(5, "call-count law 3+2k+1 and short-circuit at every failure index")
def test_call_count_law(registry, cfg):
    mock = SymbolicMockReasoner(registry)
    rng = random.Random(SEED)
    for domain in DOMAINS:
        problem = f"{'bw' if domain == 'blocksworld' else domain}-p01"
        for k in range(0, 8):
            actions = [a.canonical() for a in random_walk(rng, domain, problem, k)]
            inst = make_instance(REG.get(domain), problem, actions, projection(ON_ANY[domain], domain))
            counter = CountingReasoner(mock)
            run_prorac(inst, cfg, counter)
            assert len(actions) == k
            assert len(counter.calls) == 3 + 2 * k + 1


@pytest.mark.criterion(5, "call-count law 3+2k+1 and short-circuit at every failure index")
def test_short_circuit_at_every_index(registry, cfg):
    mock = SymbolicMockReasoner(registry)
    rng = random.Random(SEED + 1)
    length = 6
    for domain in DOMAINS:
        problem = f"{'bw' if domain == 'blocksworld' else domain}-p01"
        walk = random_walk(rng, domain, problem, length)
        assert len(walk) == length
        for i in range(length):
            state = progress(init_of(domain, problem), walk[:i]).final
            blocked = sorted((a for a in groundings(domain, problem) if not is_applicable(state, a).applicable),
                             key=lambda a: a.canonical())
            actions = [a.canonical() for a in walk[:i] + [rng.choice(blocked)] + walk[i + 1:]]
            inst = make_instance(REG.get(domain), problem, actions, projection(ON_ANY[domain], domain))
            spy = Scripted(mock)
            run = run_prorac(inst, cfg, spy)
            assert run.failure_index == i
            assert run.answer.answer == "false"
            assert len(spy.stages) == 3 + 2 * i + 1
            stages = Counter(spy.stages)
            assert (stages["check"], stages["progress"], stages["query"]) == (i + 1, i, 0)


# -- 6 -------------------------------------------------------------------------

@pytest.mark.criterion(6, "audit flags exactly the 3 injected flips and the mislabeled depots instance")
def test_audit_precision_and_recall(tmp_path, mixed20, mislabeled):
    flips = {3, 11, 17}
    path = tmp_path / "audit.jsonl"
    text = with_flips(mixed20, flips) + with_flips([mislabeled], set())
    path.write_text(text)
    report = audit_labels(load_instances(path))
    expected = {mixed20[i].question_id for i in flips} | {mislabeled.question_id}
    flagged = {e.question_id for e in report.flagged}
    true_positives = len(flagged & expected)
    precision = true_positives / len(flagged)
    recall = true_positives / len(expected)
    assert (precision, recall) == (1.0, 1.0)
    assert len(flagged) == 4

    by_id = {e.question_id: e for e in report.flagged}
    for i in flips:
        e = by_id[mixed20[i].question_id]
        assert e.oracle == mixed20[i].gold
    dep = by_id[mislabeled.question_id]
    assert (dep.gold, dep.oracle) == ("true", "false")
    assert dep.evidence["failure_index"] == 1
    assert dep.evidence["action"] == "(drop hoist1 crate2 pallet1 depot1)"
    assert dep.evidence["unsatisfied"] == ["(lifting hoist1 crate2)"]


# -- 7 -------------------------------------------------------------------------

FAULT_LABELS = {
    "flip-executability": ErrorLabel.QUALIFICATION_ERROR,
    "mutate-unrelated-fluent": ErrorLabel.FRAME_VIOLATION,
    "drop-effect": ErrorLabel.EFFECT_MISS,
    "corrupt-extraction": ErrorLabel.EXTRACTION_ERROR,
}


def fault_cases():
    rng = random.Random(SEED + 7)
    cases = []
    for fault in FAULT_LABELS:
        for n in range(10):
            domain = DOMAINS[n % 3]
            problem = f"{'bw' if domain == 'blocksworld' else domain}-p01"
            walk = random_walk(rng, domain, problem, rng.randint(2, 8))
            step = rng.randrange(len(walk))
            cases.append((fault, domain, problem, [a.canonical() for a in walk], step))
    return cases


@pytest.mark.criterion(7, "fault-injected runs classified into the right error category (40 cases)")
def test_error_taxonomy(registry, cfg):
    cases = fault_cases()
    assert len(cases) == 40
    assert Counter(c[0] for c in cases) == {f: 10 for f in FAULT_LABELS}
    wrong = []
    for fault, domain, problem, actions, step in cases:
        inst = make_instance(REG.get(domain), problem, actions, projection(ON_ANY[domain], domain))
        run = run_prorac(inst, cfg, SymbolicMockReasoner(registry, fault=fault, fault_step=step))
        label = classify_error(run, oracle_trace(inst))
        if label is not FAULT_LABELS[fault]:
            wrong.append((fault, domain, step, label))
    assert wrong == []


# -- 8 -------------------------------------------------------------------------

def counted_vote(samples):
    """Vote by explicit counting: highest count, then alphabetical order."""
    tallies = {}
    for s in samples:
        if s is not None:
            tallies[s] = tallies.get(s, 0) + 1
    if not tallies:
        return None
    ranked = sorted(tallies.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[0][0]


class Samples(Reasoner):
    def __init__(self, texts):
        self.texts = texts

    def complete(self, req):
        return list(self.texts)[: req.n]


def sample_text(answer):
    return "I am unsure." if answer is None else f"Reasoning.\nFinal Answer: {answer}"


@pytest.mark.criterion(8, "self-consistency vote matches brute-force counting on every 5-sample pattern")
def test_majority_vote_boolean_patterns(bw12):
    inst = next(i for i in bw12 if i.answer_type == "bool")
    patterns = list(itertools.product(["true", "false"], repeat=5))
    assert len(patterns) == 32
    cfg = Config()
    for pattern in patterns:
        texts = [sample_text(a.capitalize()) for a in pattern]
        res = run_baseline(inst, MethodKind.SELF_CONSISTENCY, cfg, Samples(texts))
        assert res.verdict.answer == counted_vote(pattern)
    for pattern in itertools.product(["true", "false", None], repeat=5):
        want = counted_vote(pattern)
        if want is None:
            with pytest.raises(AnswerParseError):
                majority_vote(pattern)
        else:
            assert majority_vote(pattern) == want


@pytest.mark.criterion(8, "self-consistency vote matches brute-force counting on every 5-sample pattern")
def test_majority_vote_choice_ties(registry, bw):
    for pattern in itertools.product(["a", "b", "c", None], repeat=5):
        want = counted_vote(pattern)
        if want is not None:
            assert majority_vote(pattern) == want
    spec = QuestionSpec(None, choices={
        "A": Choice(literals=frozenset({Literal.pos("clear", "a")})),
        "B": Choice(literals=frozenset({Literal.pos("holding", "a")})),
    })
    inst = make_instance(bw, "bw-p01", ["(pickup a)"], spec)
    texts = [sample_text(x) for x in ("A", "A", "B", "B", None)]
    res = run_baseline(inst, MethodKind.SELF_CONSISTENCY, Config(), Samples(texts))
    assert res.verdict.answer == "a"


# -- 9 -------------------------------------------------------------------------

def tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.criterion(9, "replayed run-bench is byte-identical across runs")
@pytest.mark.parametrize("method", ["prorac", "self_consistency"])
def test_replay_determinism(tmp_path, method):
    instances = str(FIXTURES / "mixed20.jsonl")
    cache = tmp_path / "cache"
    base = ["run-bench", "-i", instances, "--method", method, "--cache-dir", str(cache)]
    assert main(base + ["--mode", "record", "--record-backend", "mock", "--out", str(tmp_path / "rec")]) == 0
    assert main(base + ["--mode", "replay", "--out", str(tmp_path / "r1")]) == 0
    assert main(base + ["--mode", "replay", "--out", str(tmp_path / "r2"), "--parallelism", "1"]) == 0
    first, second = tree_bytes(tmp_path / "r1"), tree_bytes(tmp_path / "r2")
    assert "table.md" in first and "table.csv" in first
    assert sum(name.startswith("runs") for name in first) == 20
    assert first == second


# -- 10 ------------------------------------------------------------------------

@pytest.mark.criterion(10, "accuracy rounding: 40/45 gives 88.89, checked for every c/45")
def test_accuracy_rounding_brute_force():
    assert str(accuracy(40, 45)) == "88.89"
    for c in range(46):
        hundredths = (20000 * c + 45) // 90  # round half up of 10000*c/45
        assert str(accuracy(c, 45)) == f"{hundredths // 100}.{hundredths % 100:02d}", c
