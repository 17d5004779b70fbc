"""Answering projection, executability, plan-verification and validation questions from a Trace."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .core import Literal, literal_holds
from .domain import GroundAction
from .engine import Trace, is_applicable

BOOL_ANSWERS = ("true", "false")
CLASS_ANSWERS = ("plan", "applicable", "invalid")
NO_CHOICE = "none"


class QueryKind(str, enum.Enum):
    PROJECTION = "projection"
    EXECUTABILITY = "executability"
    PLAN_VERIFICATION = "plan_verification"
    VALIDATION = "validation"


@dataclass(frozen=True)
class Query:
    kind: QueryKind
    literals: frozenset[Literal] = frozenset()
    about_step: int | None = None

    def __post_init__(self):
        if self.kind is QueryKind.EXECUTABILITY and self.literals:
            raise ValueError("executability queries carry no literals")


@dataclass(frozen=True)
class Choice:
    """One multiple-choice option: literals that must hold, or an action that must be applicable."""

    literals: frozenset[Literal] = frozenset()
    action: GroundAction | None = None


@dataclass(frozen=True)
class Verdict:
    answer: str
    evidence: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.answer in ("false", "invalid") and not self.evidence:
            raise ValueError(f"a {self.answer!r} verdict needs evidence")

    def to_json(self) -> dict:
        return {"answer": self.answer, "evidence": dict(self.evidence)}

    @property
    def as_bool(self) -> bool | None:
        return {"true": True, "false": False}.get(self.answer)


def _lits(lits: Iterable[Literal]) -> list[str]:
    return sorted(lit.canonical() for lit in lits)


def _failure_evidence(t: Trace) -> dict:
    i = t.failure_index
    return {"failure_index": i, "action": t.actions[i].canonical(), "unsatisfied": _lits(t.checks[i].unsatisfied)}


def eval_projection(t: Trace, q: Iterable[Literal], step: int | None = None) -> Verdict:
    """True iff the sequence executes and every literal holds at the end (or at ``step``)."""
    q = frozenset(q)
    if step is not None:
        if step >= len(t.states):
            return Verdict("false", _failure_evidence(t) if not t.executable else {"step": step})
        state = t.states[step]
    else:
        if not t.executable:
            return Verdict("false", _failure_evidence(t))
        state = t.final
    failing = [lit for lit in q if not literal_holds(state, lit)]
    if failing:
        return Verdict("false", {"failing": _lits(failing)})
    return Verdict("true", {})


def eval_executability(t: Trace) -> Verdict:
    if t.executable:
        return Verdict("true", {})
    return Verdict("false", _failure_evidence(t))


def eval_plan_verification(t: Trace, goal: Iterable[Literal]) -> Verdict:
    exe = eval_executability(t)
    if exe.answer == "false":
        return exe
    return eval_projection(t, goal)


def classify_sequence(t: Trace, goal: Iterable[Literal]) -> Verdict:
    """Three-way validation: ``plan``, ``applicable`` (executes, misses goal) or ``invalid``."""
    if not t.executable:
        return Verdict("invalid", _failure_evidence(t))
    proj = eval_projection(t, goal)
    if proj.answer == "true":
        return Verdict("plan", {})
    return Verdict("applicable", dict(proj.evidence))


def eval_choice(t: Trace, choices: Mapping[str, Choice]) -> Verdict:
    """The first option (by letter) that holds in the final state.

    Literal options must all hold; action options must be applicable.  When
    the sequence itself fails, or no option holds, the answer is ``none``.
    """
    if not t.executable:
        return Verdict(NO_CHOICE, _failure_evidence(t))
    satisfied = [letter for letter in sorted(choices) if choice_holds(t, choices[letter])]
    if not satisfied:
        return Verdict(NO_CHOICE, {"satisfied": []})
    return Verdict(satisfied[0], {"satisfied": satisfied})


def choice_holds(t: Trace, c: Choice) -> bool:
    if c.action is not None:
        return is_applicable(t.final, c.action).applicable
    return all(literal_holds(t.final, lit) for lit in c.literals)


def evaluate(query: Query, t: Trace) -> Verdict:
    if query.kind is QueryKind.PROJECTION:
        return eval_projection(t, query.literals, query.about_step)
    if query.kind is QueryKind.EXECUTABILITY:
        return eval_executability(t)
    if query.kind is QueryKind.PLAN_VERIFICATION:
        return eval_plan_verification(t, query.literals)
    return classify_sequence(t, query.literals)
