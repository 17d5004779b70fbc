"""Prompt templates, answer formats and the worked demonstrations shown to the reasoner.

Templates are plain text files under ``prompts/`` with ``{named}`` slots.
The textual contracts the pipeline parses are:

* extractors answer in one paragraph;
* structured states are a line ``STATE: (p a) (q b) ...`` in canonical form;
* structured questions carry a line ``QUERY: holds ...`` or ``QUERY: choose ...``;
* every judgement ends with a ``Final Answer: ...`` line.

The same rationale writers produce the demonstrations and the symbolic mock's
responses, so the mock answers in exactly the layout the examples teach.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .core import Fluent, Literal, State
from .domain import GroundAction
from .engine import is_applicable, progress
from .nl import (
    NlAnnotations,
    join_items,
    render_action_nl,
    render_fluent_nl,
    render_literal_nl,
    render_state_nl,
)
from .query import Choice, QueryKind, Verdict
from .questions import QuestionSpec, evaluate_spec, render_ask, render_query_structured, render_question

SEPARATOR = "----------"
EXAMPLE_SEPARATOR = "\n\n---------------\n\n"
STATE_PREFIX = "STATE:"
QUERY_PREFIX = "QUERY:"
COT_SUFFIX = "Let's think step by step."
NO_ACTIONS = "No actions."

STAGES = ("state_extractor", "action_extractor", "question_extractor", "check", "progress", "query", "baseline")

STATE_FORMAT = {
    "structured": f"Answer with a single line that starts with {STATE_PREFIX} followed by every true fact in canonical form, for example {STATE_PREFIX} (clear a) (handempty).",
    "nl": "Answer with a single paragraph holding one sentence per object: the object name, a colon, then its properties separated by commas.",
}
PROGRESS_FORMAT = {
    "structured": f"End with a line that starts with {STATE_PREFIX} followed by every fact of the new state in canonical form.",
    "nl": "End with a paragraph that gives the new state of every object, one sentence per object in the same layout as the current state.",
}
QUESTION_FORMAT = {
    "structured": f"Below the paragraph add one line that starts with {QUERY_PREFIX} and encodes the question either as holds followed by canonical literals or as choose followed by lettered options.",
    "nl": "",
}
ANSWER_FORMAT = {
    "bool": 'The last paragraph must read "Final Answer: True" or "Final Answer: False".',
    "mcq": 'The last paragraph must read "Final Answer: " followed by the letter of the correct option, or "none" when no option is correct.',
    "class": 'The last paragraph must read "Final Answer: " followed by plan, applicable or invalid.',
}


@functools.lru_cache(maxsize=None)
def template(stage: str) -> str:
    if stage not in STAGES:
        raise KeyError(f"unknown prompt stage {stage!r}")
    return (resources.files("raclab") / "prompts" / f"{stage}.txt").read_text(encoding="utf-8")


def render_prompt(stage: str, **slots: str) -> str:
    slots = {
        k: slots.get(k, "")
        for k in ("domain_description", "examples", "current_state", "action", "question", "format_instructions")
    }
    text = template(stage).format(**slots)
    # an empty instruction slot should not leave a double space behind
    return re.sub(r"  +", " ", text).rstrip() + "\n"


def squash(text: str) -> str:
    """Collapse all whitespace so embedded inputs stay one paragraph."""
    return " ".join(text.split())


def sentence(text: str) -> str:
    text = text.strip()
    return text[:1].upper() + text[1:] + ("" if text.endswith((".", "?", "!")) else ".")


# -- state text -------------------------------------------------------------------

def state_text(s: State, ann: NlAnnotations, objects: Iterable[str], mode: str) -> str:
    """The state as carried between steps: canonical line or object-grouped prose."""
    if mode == "structured":
        return s.canonical()
    return render_state_nl(s, ann, objects)


def state_answer(s: State, ann: NlAnnotations, objects: Iterable[str], mode: str) -> str:
    if mode == "structured":
        return f"{STATE_PREFIX} {s.canonical()}".rstrip()
    return render_state_nl(s, ann, objects)


def state_clauses(s: State, ann: NlAnnotations) -> str:
    """Flat clause list, the way benchmark initial states are written."""
    if not len(s):
        return "Nothing holds."
    return sentence(join_items([render_fluent_nl(f, ann) for f in s]))


def _lits(lits: Iterable[Literal], ann: NlAnnotations) -> str:
    return join_items([render_literal_nl(lit, ann) for lit in sorted(lits)])


def _fluents(fs: Iterable[Fluent], ann: NlAnnotations) -> str:
    return join_items([render_fluent_nl(f, ann) for f in sorted(fs)])


def final_answer(answer: str, answer_type: str) -> str:
    if answer_type == "bool":
        return f"Final Answer: {answer.capitalize()}"
    return f"Final Answer: {answer}"


# -- rationales -------------------------------------------------------------------

def explain_check(a: GroundAction, ann: NlAnnotations, applicable: bool, unsatisfied: Iterable[Literal] = ()) -> str:
    unsatisfied = sorted(unsatisfied)
    act = render_action_nl(a, ann)
    if a.precondition:
        need = f"To {act} we need that {_lits(a.precondition, ann)}."
    else:
        need = f"The action {act} has no preconditions."
    if applicable:
        found = "Each of these holds in the current state."
        verdict = "Every precondition is met, so the action is executable."
    else:
        missing = unsatisfied or sorted(a.precondition)[:1]
        found = sentence(f"in the current state it is false that {_lits(missing, ann)}") if missing else "The current state rules the action out."
        verdict = "A precondition is violated, so the action is not executable."
    return (
        f"Step 1: compare the preconditions with the current state. {need} {found}\n\n"
        f"Step 2: decide. {verdict}\n\n"
        f"{final_answer('true' if applicable else 'false', 'bool')}"
    )


def explain_progress(
    a: GroundAction, ann: NlAnnotations, new_state: State, objects: Iterable[str], mode: str
) -> str:
    act = render_action_nl(a, ann)
    parts = [f"Executing the action {act}"]
    if a.add:
        parts.append(f"makes true that {_fluents(a.add, ann)}")
    if a.delete:
        parts.append(f"makes false that {_fluents(a.delete, ann)}")
    effect = parts[0] + (" " + " and ".join(parts[1:]) if parts[1:] else " changes nothing")
    return (
        f"{effect}. Every other property keeps its value.\n\n"
        f"{state_answer(new_state, ann, objects, mode)}"
    )


def explain_query(spec: QuestionSpec, v: Verdict, ann: NlAnnotations) -> str:
    if spec.is_mcq:
        satisfied = list(v.evidence.get("satisfied", []))
        if satisfied:
            why = f"Checking every option against the final state, option {satisfied[0]} is the first one that holds."
        else:
            why = "Checking every option against the final state, none of them holds."
    elif spec.kind is QueryKind.EXECUTABILITY or (spec.kind is QueryKind.VALIDATION and spec.validation == "is_applicable"):
        why = "Every action in the sequence was executable."
    elif not spec.literals:
        why = "The question asks for nothing, so it holds trivially."
    else:
        failing = v.evidence.get("failing")
        if failing:
            why = f"The question asks whether {_lits(spec.literals, ann)}. Not all of them hold in the final state."
        else:
            why = f"The question asks whether {_lits(spec.literals, ann)}. All of them hold in the final state."
    return f"{why}\n\n{final_answer(v.answer, spec.answer_type)}"


# -- demonstrations ---------------------------------------------------------------

@dataclass(frozen=True)
class Demonstrations:
    state_extractor: str
    action_extractor: str
    question_extractor: str
    check: str
    progress: str
    query: str
    two_shot: str

    def for_stage(self, stage: str) -> str:
        return getattr(self, stage)


def _example(n: int, body: str) -> str:
    return f"(Example {n})\n\n{body}"


def _examples(*bodies: str) -> str:
    return EXAMPLE_SEPARATOR.join(_example(i + 1, b) for i, b in enumerate(bodies))


def _demo_plan(d, s0: State, objects) -> tuple[GroundAction, GroundAction, GroundAction]:
    """Two consecutive applicable actions and one inapplicable action at ``s0``."""
    actions = sorted(d.groundings(objects), key=lambda a: a.canonical())
    for first in actions:
        if not is_applicable(s0, first).applicable or first.add <= s0.fluents:
            continue
        s1 = s0.update(first.add, first.delete)
        for second in actions:
            if (
                is_applicable(s1, second).applicable
                and not second.add <= s1.fluents
                and s1.update(second.add, second.delete) != s0
            ):
                break
        else:
            continue
        break
    else:
        raise ValueError("demo problem admits no two-step sequence with visible effects")
    bad = next(a for a in actions if not is_applicable(s0, a).applicable)
    return first, second, bad


def question_answer(spec: QuestionSpec, mode: str, ann: NlAnnotations) -> str:
    ask = render_ask(spec, ann)
    if mode == "structured":
        return f"{ask}\n{QUERY_PREFIX} {render_query_structured(spec)}"
    return ask


def plan_answer(actions: Iterable[GroundAction], ann: NlAnnotations) -> str:
    sentences = [sentence(render_action_nl(a, ann)) for a in actions]
    return " ".join(sentences) if sentences else NO_ACTIONS


def build_demonstrations(entry, mode: str) -> Demonstrations:
    return _build_demonstrations(entry, mode)


@functools.lru_cache(maxsize=None)
def _build_demonstrations(entry, mode: str) -> Demonstrations:
    ann, d, demo = entry.annotations, entry.domain, entry.demo
    objects = demo.objects
    s0 = demo.init
    first, second, bad = _demo_plan(d, s0, objects)
    trace = progress(s0, [first, second])
    s1, s2 = trace.states[1], trace.states[2]

    def st(s):
        return state_text(s, ann, objects, mode)

    # a projection that holds (one added fact, one deleted fact) and one that fails
    gained = sorted(second.add - s1.fluents)[:1]
    lost = sorted(second.delete - second.add)[:1]
    true_q = frozenset([Literal(f, True) for f in gained] + [Literal(f, False) for f in lost])
    false_q = frozenset(Literal(f, True) for f in sorted(second.delete - second.add)[:1]) or frozenset(
        [Literal(sorted(s0.fluents - s2.fluents)[0], True)] if s0.fluents - s2.fluents else []
    )
    proj_true = QuestionSpec(QueryKind.PROJECTION, true_q)
    proj_false = QuestionSpec(QueryKind.PROJECTION, false_q)
    exe = QuestionSpec(QueryKind.EXECUTABILITY)

    q_proj = render_question([first, second], proj_true, ann)
    q_exe_bad = render_question([bad], exe, ann)
    q_empty = render_question([], proj_true, ann)

    state_ex = _examples(
        f"[INITIAL STATE]: {state_clauses(s0, ann)}\n\nAnswer:\n\n{state_answer(s0, ann, objects, mode)}",
        f"[INITIAL STATE]: {state_clauses(s1, ann)}\n\nAnswer:\n\n{state_answer(s1, ann, objects, mode)}",
    )
    action_ex = _examples(
        f"[PLAN]: {q_proj}\n\nAnswer:\n\n{plan_answer([first, second], ann)}",
        f"[PLAN]: {q_empty}\n\nAnswer:\n\n{NO_ACTIONS}",
    )
    question_ex = _examples(
        f"[QUESTION]: {q_proj}\n\nAnswer:\n\n{question_answer(proj_true, mode, ann)}",
        f"[QUESTION]: {q_exe_bad}\n\nAnswer:\n\n{question_answer(exe, mode, ann)}",
    )
    bad_check = is_applicable(s0, bad)
    check_ex = _examples(
        f"[CURRENT STATE]: {st(s0)}\n\n[ACTION]: {sentence(render_action_nl(first, ann))}\n\nAnswer:\n\n"
        + explain_check(first, ann, True),
        f"[CURRENT STATE]: {st(s0)}\n\n[ACTION]: {sentence(render_action_nl(bad, ann))}\n\nAnswer:\n\n"
        + explain_check(bad, ann, False, bad_check.unsatisfied),
    )
    progress_ex = _examples(
        f"[CURRENT STATE]: {st(s0)}\n\n[ACTION TO EXECUTE]: {sentence(render_action_nl(first, ann))}\n\nAnswer:\n\n"
        + explain_progress(first, ann, s1, objects, mode),
        f"[CURRENT STATE]: {st(s1)}\n\n[ACTION TO EXECUTE]: {sentence(render_action_nl(second, ann))}\n\nAnswer:\n\n"
        + explain_progress(second, ann, s2, objects, mode),
    )
    final_only = progress(s2, [])
    v_true = evaluate_spec(final_only, proj_true)
    v_false = evaluate_spec(final_only, proj_false)
    query_ex = _examples(
        f"[FINAL STATE]: {st(s2)}\n\n[QUESTION]: {question_answer(proj_true, mode, ann)}\n\nAnswer:\n\n"
        + explain_query(proj_true, v_true, ann),
        f"[FINAL STATE]: {st(s2)}\n\n[QUESTION]: {question_answer(proj_false, mode, ann)}\n\nAnswer:\n\n"
        + explain_query(proj_false, v_false, ann),
    )
    two_shot = _examples(
        _worked(s0, objects, [first, second], proj_true, ann),
        _worked(s0, objects, [bad], exe, ann),
    ) + "\n\n"
    return Demonstrations(state_ex, action_ex, question_ex, check_ex, progress_ex, query_ex, two_shot)


def _worked(s0: State, objects, actions, spec: QuestionSpec, ann: NlAnnotations) -> str:
    """A fully reasoned baseline example: objects, checks, effects, then the answer."""
    t = progress(s0, actions)
    lines = [
        f"[STATE DESCRIPTION]: {render_state_nl(s0, ann, objects)}",
        f"[PROBLEM]: {render_question(actions, spec, ann)}",
        "Answer:",
        f"The objects involved are {join_items(sorted(objects))}.",
    ]
    for i, check in enumerate(t.checks):
        a = t.actions[i]
        lines.append(f"Action {i + 1}: " + explain_check(a, ann, check.applicable, check.unsatisfied).rsplit("\n\n", 1)[0])
        if not check.applicable:
            break
        lines.append(f"After action {i + 1} the state is: {render_state_nl(t.states[i + 1], ann, objects)}")
    v = evaluate_spec(t, spec)
    lines.append(explain_query(spec, v, ann) if t.executable else final_answer(v.answer, spec.answer_type))
    return "\n\n".join(lines)


def choice_spec(choices: dict[str, Choice]) -> QuestionSpec:
    return QuestionSpec(None, choices=choices)
