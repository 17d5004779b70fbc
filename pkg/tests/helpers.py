"""Reasoners and instance builders shared by the pipeline-level tests."""

from __future__ import annotations

from raclab.gateway import Completion, Reasoner
from raclab.prompts import SEPARATOR

STAGE_MARKERS = (
    ("query", "[FINAL STATE]:"),
    ("state_extractor", "[INITIAL STATE]:"),
    ("action_extractor", "[PLAN]:"),
    ("question_extractor", "[QUESTION]:"),
    ("progress", "[ACTION TO EXECUTE]:"),
    ("check", "[ACTION]:"),
    ("baseline", "[PROBLEM]:"),
)


def stage_of(prompt: str) -> str:
    tail = prompt.rsplit(SEPARATOR, 1)[-1]
    for stage, marker in STAGE_MARKERS:
        if marker in tail:
            return stage
    raise AssertionError(f"unrecognised prompt: {tail[:80]!r}")


class Scripted(Reasoner):
    """Answers from a per-stage override, falling back to ``inner``."""

    def __init__(self, inner: Reasoner | None = None, **overrides):
        self.inner = inner
        self.overrides = overrides
        self.stages: list[str] = []

    def complete_traced(self, req):
        stage = stage_of(req.prompt)
        self.stages.append(stage)
        if stage in self.overrides:
            value = self.overrides[stage]
            texts = value(req) if callable(value) else [value] * req.n
            return Completion(tuple(texts))
        return self.inner.complete_traced(req)

    def complete(self, req):
        return list(self.complete_traced(req).texts)


def make_instance(entry, problem: str, actions, spec, qid: str = "t-001", category: str | None = None, answer=None):
    """An Instance whose gold answer is the oracle's, built from canonical terms and a QuestionSpec."""
    from raclab.domain import ground_term
    from raclab.engine import progress
    from raclab.harness import parse_instance
    from raclab.nl import render_state_nl
    from raclab.query import QueryKind
    from raclab.questions import evaluate_spec, render_question

    p = entry.problems[problem]
    ground = [ground_term(entry.domain, a, p.objects) for a in actions]
    if answer is None:
        answer = evaluate_spec(progress(p.init, ground), spec).answer
    if category is None:
        category = "projection" if spec.is_mcq else spec.kind.value
    structured = {"problem": problem, "actions": [a.canonical() for a in ground]}
    if spec.is_mcq:
        structured["choices"] = {
            letter: ({"applicable": c.action.canonical()} if c.action is not None
                     else {"holds": [lit.canonical() for lit in sorted(c.literals)]})
            for letter, c in spec.choices.items()
        }
    elif spec.kind is QueryKind.PROJECTION:
        structured["query"] = [lit.canonical() for lit in sorted(spec.literals)]
    elif spec.kind is not QueryKind.EXECUTABILITY:
        structured["goal"] = [lit.canonical() for lit in sorted(spec.literals)]
    rec = {
        "question_id": qid,
        "domain_name": entry.name,
        "question_category": category,
        "answer_type": spec.answer_type,
        "question": render_question(ground, spec, entry.annotations),
        "answer": answer,
        "plan_length": len(ground),
        "initial_state_nl": render_state_nl(p.init, entry.annotations, p.objects),
        "structured": structured,
    }
    if spec.kind is QueryKind.VALIDATION:
        rec["validation_semantics"] = spec.validation
    return parse_instance(rec)


def flipped_label(inst) -> str:
    """A gold answer that disagrees with the instance's current one."""
    gold = inst.gold
    if inst.answer_type == "bool":
        return "False" if gold == "true" else "True"
    if inst.answer_type == "class":
        return "invalid" if gold != "invalid" else "plan"
    return "none" if gold != "none" else "A"


def with_flips(instances, indices):
    """Copies of ``instances`` as JSONL text with the labels at ``indices`` flipped."""
    import json

    lines = []
    for i, inst in enumerate(instances):
        rec = dict(inst.record)
        if i in indices:
            rec["answer"] = flipped_label(inst)
        lines.append(json.dumps(rec))
    return "".join(line + "\n" for line in lines)
