"""Question phrasing: render a structured question as text and read it back.

Two surface forms exist.  The natural-language form is what benchmark
instances carry (``Given the initial condition, the following actions are
performed: ... Is it true that ...?``).  The structured form is the one-line
``QUERY`` payload the structured pipeline asks extractors to produce::

    holds (on a b) (not (clear b))
    choose A: holds (clear a); B: applicable (pickup a)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import Literal
from .domain import Domain, GroundAction, ground_term, parse_literals_text
from .errors import ParseError
from .nl import NlAnnotations, join_items, render_action_nl, render_literal_nl
from .engine import Trace
from .query import (
    Choice,
    QueryKind,
    Verdict,
    classify_sequence,
    eval_choice,
    eval_executability,
    eval_plan_verification,
    eval_projection,
)

ActionTerm = tuple[str, tuple[str, ...]]

VALIDATION_SEMANTICS = ("three_way", "is_plan", "is_applicable")

_INTRO_RE = re.compile(r"the following actions? (?:is |are )?(?:planned to be )?performed\s*:\s*", re.IGNORECASE)
_CHOICE_RE = re.compile(r"\s*([A-Z])\.\s+")


@dataclass(frozen=True)
class QuestionSpec:
    """What a question asks, independent of wording."""

    kind: QueryKind | None  # None for multiple choice
    literals: frozenset[Literal] = frozenset()
    choices: Mapping[str, Choice] = field(default_factory=dict)
    validation: str = "three_way"

    @property
    def is_mcq(self) -> bool:
        return self.kind is None

    @property
    def answer_type(self) -> str:
        if self.is_mcq:
            return "mcq"
        if self.kind is QueryKind.VALIDATION and self.validation == "three_way":
            return "class"
        return "bool"


@dataclass(frozen=True)
class ParsedQuestion:
    actions: tuple[ActionTerm, ...]
    spec: QuestionSpec


# -- natural language ------------------------------------------------------------

def _lits_nl(lits, ann: NlAnnotations) -> str:
    return join_items([render_literal_nl(lit, ann) for lit in sorted(lits)])


def render_intro(actions: Sequence[GroundAction], ann: NlAnnotations, planned: bool = False) -> str:
    if not actions:
        return "Given the initial condition, no actions are performed."
    verb = "planned to be performed" if planned else "performed"
    return (
        f"Given the initial condition, the following actions are {verb}: "
        f"{join_items([render_action_nl(a, ann) for a in actions])}."
    )


def render_ask(spec: QuestionSpec, ann: NlAnnotations) -> str:
    """The interrogative part alone (what a question extractor should return)."""
    if spec.is_mcq:
        parts = []
        if any(c.action is not None for c in spec.choices.values()):
            parts.append("Which of the following actions is executable next?")
            for letter in sorted(spec.choices):
                parts.append(f"{letter}. {render_action_nl(spec.choices[letter].action, ann)}.")
        else:
            parts.append("Which of the following is true in the resulting state?")
            for letter in sorted(spec.choices):
                parts.append(f"{letter}. {_lits_nl(spec.choices[letter].literals, ann)}.")
        return " ".join(parts)
    kind = spec.kind
    if kind is QueryKind.EXECUTABILITY:
        return "Is it possible to execute it, True or False?"
    if kind is QueryKind.PROJECTION:
        if not spec.literals:
            return "Is it true that nothing is required? True or False?"
        return f"Is it true that {_lits_nl(spec.literals, ann)}? True or False?"
    goal = f"The goal is that {_lits_nl(spec.literals, ann)}." if spec.literals else "The goal is empty."
    if kind is QueryKind.PLAN_VERIFICATION:
        return f"{goal} Does the sequence of actions reach the goal, True or False?"
    if spec.validation == "is_plan":
        return f"{goal} Is the sequence of actions a valid plan, True or False?"
    if spec.validation == "is_applicable":
        return f"{goal} Is the sequence of actions applicable, True or False?"
    return f"{goal} Is the sequence of actions a plan, applicable but not a plan, or invalid?"


def render_question(actions: Sequence[GroundAction], spec: QuestionSpec, ann: NlAnnotations) -> str:
    intro = render_intro(actions, ann, planned=spec.kind is QueryKind.EXECUTABILITY)
    return f"{intro} {render_ask(spec, ann)}"


def parse_question(text: str, ann: NlAnnotations) -> ParsedQuestion:
    """Inverse of ``render_question`` (also accepts ``render_ask`` output alone)."""
    grammar = ann.grammar
    actions: list[ActionTerm] = []
    rest = text
    m = _INTRO_RE.search(text)
    if m:
        res = grammar.parse_action_list(text, m.end())
        if res is None:
            raise ParseError(f"cannot read the action sequence in {text[m.end():m.end() + 80]!r}")
        actions, end = res
        rest = text[end:]
    return ParsedQuestion(tuple(actions), parse_ask(rest, ann))


def parse_plan(text: str, ann: NlAnnotations) -> list[ActionTerm]:
    """Just the performed actions of a question (empty when none are listed)."""
    m = _INTRO_RE.search(text)
    if not m:
        return []
    res = ann.grammar.parse_action_list(text, m.end())
    if res is None:
        raise ParseError(f"cannot read the action sequence in {text[m.end():m.end() + 80]!r}")
    return res[0]


def _literals_after(text: str, marker: str, ann: NlAnnotations) -> frozenset[Literal]:
    i = text.lower().find(marker)
    if i < 0:
        raise ParseError(f"expected {marker!r} in {text[:80]!r}")
    start = i + len(marker)
    if text[start:].lower().startswith("nothing is required"):
        return frozenset()
    res = ann.grammar.parse_literal_list(text, start)
    if res is None:
        raise ParseError(f"cannot read conditions in {text[start:start + 80]!r}")
    return frozenset(res[0])


def parse_ask(text: str, ann: NlAnnotations) -> QuestionSpec:
    low = text.lower()
    if "which of the following" in low:
        return QuestionSpec(None, choices=_parse_choices(text, ann, actions="which of the following actions" in low))
    if "possible to execute" in low:
        return QuestionSpec(QueryKind.EXECUTABILITY)
    if "the goal is" in low:
        goal = frozenset() if "the goal is empty" in low else _literals_after(text, "the goal is that ", ann)
        if "reach the goal" in low:
            return QuestionSpec(QueryKind.PLAN_VERIFICATION, goal)
        if "valid plan" in low:
            return QuestionSpec(QueryKind.VALIDATION, goal, validation="is_plan")
        if "applicable, true or false" in low:
            return QuestionSpec(QueryKind.VALIDATION, goal, validation="is_applicable")
        if "or invalid" in low:
            return QuestionSpec(QueryKind.VALIDATION, goal, validation="three_way")
        raise ParseError(f"unrecognised goal question {text[:80]!r}")
    if "is it true that" in low:
        return QuestionSpec(QueryKind.PROJECTION, _literals_after(text, "is it true that ", ann))
    raise ParseError(f"unrecognised question {text[:80]!r}")


def _parse_choices(text: str, ann: NlAnnotations, actions: bool) -> dict[str, Choice]:
    grammar = ann.grammar
    start = text.find("?")
    if start < 0:
        raise ParseError("multiple-choice question without '?'")
    pos = start + 1
    out: dict[str, Choice] = {}
    while True:
        m = _CHOICE_RE.match(text, pos)
        if not m:
            break
        letter = m.group(1)
        if actions:
            res = grammar.parse_action_list(text, m.end())
            if res is None or len(res[0]) != 1:
                raise ParseError(f"cannot read option {letter}")
            out[letter] = Choice(action=grammar.ground(res[0][0]))
        else:
            res = grammar.parse_literal_list(text, m.end())
            if res is None:
                raise ParseError(f"cannot read option {letter}")
            out[letter] = Choice(literals=frozenset(res[0]))
        pos = res[1]
    if not out:
        raise ParseError("multiple-choice question without options")
    return out


# -- structured one-line payload ---------------------------------------------

def _lits_canon(lits) -> str:
    return " ".join(lit.canonical() for lit in sorted(lits))


def render_query_structured(spec: QuestionSpec) -> str:
    if spec.is_mcq:
        parts = []
        for letter in sorted(spec.choices):
            c = spec.choices[letter]
            if c.action is not None:
                parts.append(f"{letter}: applicable {c.action.canonical()}")
            else:
                parts.append(f"{letter}: holds {_lits_canon(c.literals)}".rstrip())
        return "choose " + "; ".join(parts)
    if spec.kind is QueryKind.EXECUTABILITY or (
        spec.kind is QueryKind.VALIDATION and spec.validation == "is_applicable"
    ):
        return "holds"
    return f"holds {_lits_canon(spec.literals)}".rstrip()


def parse_query_structured(text: str, d: Domain, objects=None) -> QuestionSpec:
    """Read a structured payload; ``holds`` payloads come back as projections."""
    text = text.strip()
    if text.startswith("choose"):
        choices = {}
        for part in text[len("choose"):].split(";"):
            m = re.fullmatch(r"\s*([A-Z])\s*:\s*(holds|applicable)\s*(.*?)\s*", part)
            if not m:
                raise ParseError(f"malformed option {part!r}")
            letter, how, payload = m.groups()
            if how == "applicable":
                choices[letter] = Choice(action=ground_term(d, payload, objects))
            else:
                choices[letter] = Choice(literals=parse_literals_text(payload, d, objects))
        return QuestionSpec(None, choices=choices)
    m = re.fullmatch(r"holds\b(.*)", text, re.DOTALL)
    if not m:
        raise ParseError(f"structured query must start with 'holds' or 'choose': {text[:60]!r}")
    return QuestionSpec(QueryKind.PROJECTION, parse_literals_text(m.group(1), d, objects))


def evaluate_spec(t: Trace, spec: QuestionSpec) -> Verdict:
    """Oracle answer to ``spec`` over the trace ``t``."""
    if spec.is_mcq:
        return eval_choice(t, spec.choices)
    if spec.kind is QueryKind.EXECUTABILITY:
        return eval_executability(t)
    if spec.kind is QueryKind.PROJECTION:
        return eval_projection(t, spec.literals)
    if spec.kind is QueryKind.PLAN_VERIFICATION:
        return eval_plan_verification(t, spec.literals)
    if spec.validation == "is_plan":
        return eval_plan_verification(t, spec.literals)
    if spec.validation == "is_applicable":
        return eval_executability(t)
    return classify_sequence(t, spec.literals)
