"""Deterministic STRIPS progression with full trace recording."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import Literal, State, literal_holds
from .domain import GroundAction
from .errors import NotApplicable


@dataclass(frozen=True)
class ApplicabilityResult:
    applicable: bool
    unsatisfied: frozenset[Literal] = frozenset()

    def __post_init__(self):
        if self.applicable != (not self.unsatisfied):
            raise ValueError("applicable must hold exactly when nothing is unsatisfied")


@dataclass(frozen=True)
class Trace:
    """States S0..Sm visited while progressing ``actions``.

    ``checks[i]`` is the applicability verdict for ``actions[i]``; checks stop
    at the first failure, whose index is ``failure_index``.
    """

    states: tuple[State, ...]
    actions: tuple[GroundAction, ...]
    checks: tuple[ApplicabilityResult, ...] = ()
    failure_index: int | None = None

    @property
    def initial(self) -> State:
        return self.states[0]

    @property
    def final(self) -> State:
        return self.states[-1]

    @property
    def executable(self) -> bool:
        return self.failure_index is None

    def report(self) -> str:
        """Line-oriented rendering: states, ``> action:`` and ``! failed at`` lines."""
        lines = [self.states[0].canonical()]
        for i, check in enumerate(self.checks):
            lines.append(f"> action: {self.actions[i].canonical()}")
            if not check.applicable:
                lits = " ".join(sorted(lit.canonical() for lit in check.unsatisfied))
                lines.append(f"! failed at {i}: {lits}")
                break
            lines.append(self.states[i + 1].canonical())
        return "\n".join(lines) + "\n"


def is_applicable(s: State, a: GroundAction) -> ApplicabilityResult:
    unsatisfied = frozenset(lit for lit in a.precondition if not literal_holds(s, lit))
    return ApplicabilityResult(not unsatisfied, unsatisfied)


def apply_action(s: State, a: GroundAction) -> State:
    check = is_applicable(s, a)
    if not check.applicable:
        raise NotApplicable(a, check.unsatisfied)
    return s.update(add=a.add, remove=a.delete)


def progress(s0: State, actions: Sequence[GroundAction]) -> Trace:
    states = [s0]
    checks = []
    failure = None
    for i, a in enumerate(actions):
        check = is_applicable(states[-1], a)
        checks.append(check)
        if not check.applicable:
            failure = i
            break
        states.append(states[-1].update(add=a.add, remove=a.delete))
    return Trace(tuple(states), tuple(actions), tuple(checks), failure)
