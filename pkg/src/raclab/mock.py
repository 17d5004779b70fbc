"""A reasoner that answers pipeline prompts by running the symbolic oracle.

It recognises each prompt shape by its bracketed markers, parses the embedded
state, action or question with the registered domain, and writes the oracle's
answer in the layout the pipeline expects.  Faults can be switched on to
produce the characteristic mistakes of a language model:

``flip-executability``
    the executability verdict of one step is inverted.
``mutate-unrelated-fluent``
    one step's successor state gains a fact the action does not touch.
``drop-effect``
    one step's successor state misses one of the action's effects.
``corrupt-extraction``
    the extracted initial state loses a fact.

Faults fire at the first step with index >= ``fault_step`` where they can take
effect.  Step counters are per thread and restart with every state extraction,
so one mock may serve many concurrent pipeline runs.
"""

from __future__ import annotations

import re
import threading

from .core import State
from .domain import GroundAction, infer_object_types, parse_state_text
from .engine import is_applicable, progress
from .errors import MockUnparseablePrompt, RacError
from .gateway import Completion, Reasoner, ReasonerRequest
from .nl import render_state_nl
from .prompts import (
    QUERY_PREFIX,
    SEPARATOR,
    STATE_PREFIX,
    explain_check,
    explain_progress,
    explain_query,
    final_answer,
    plan_answer,
    question_answer,
    sentence,
    state_answer,
)
from .questions import QuestionSpec, evaluate_spec, parse_ask, parse_plan, parse_query_structured, parse_question
from .registry import DomainEntry, DomainRegistry, bundled

FAULTS = ("flip-executability", "mutate-unrelated-fluent", "drop-effect", "corrupt-extraction")


def _section(text: str, marker: str) -> str | None:
    """Text after ``[MARKER]:`` up to the next blank line."""
    m = re.search(re.escape(marker) + r"[ \t]*(.*?)(?:\n[ \t]*\n|\Z)", text, re.DOTALL)
    return m.group(1).strip() if m else None


class SymbolicMockReasoner(Reasoner):
    def __init__(self, registry: DomainRegistry | None = None, fault: str | None = None, fault_step: int = 0):
        if fault is not None and fault not in FAULTS:
            raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
        self.registry = registry or bundled()
        self.fault = fault
        self.fault_step = fault_step
        self._local = threading.local()

    # per-thread counters
    def _counters(self) -> dict:
        if not hasattr(self._local, "c"):
            self._local.c = {"check": 0, "progress": 0, "fired": False}
        return self._local.c

    def _reset(self) -> None:
        self._local.c = {"check": 0, "progress": 0, "fired": False}

    def _armed(self, fault: str, step: int) -> bool:
        c = self._counters()
        return self.fault == fault and not c["fired"] and step >= self.fault_step

    def complete_traced(self, req: ReasonerRequest) -> Completion:
        text = self.respond(req.prompt)
        return Completion(tuple([text] * req.n), cached=False, latency=0.0)

    def complete(self, req: ReasonerRequest) -> list[str]:
        return list(self.complete_traced(req).texts)

    # -- dispatch ------------------------------------------------------------

    def respond(self, prompt: str) -> str:
        entry = self.registry.find_in_text(prompt)
        if entry is None:
            raise MockUnparseablePrompt("prompt carries no registered domain description")
        cut = prompt.rfind(SEPARATOR)
        tail = prompt[cut + len(SEPARATOR):] if cut >= 0 else prompt
        try:
            if "[PROBLEM]:" in tail:
                return self._baseline(entry, tail)
            if "[FINAL STATE]:" in tail:
                return self._query(entry, tail)
            if "[ACTION TO EXECUTE]:" in tail:
                return self._progress(entry, tail)
            if "[CURRENT STATE]:" in tail and "[ACTION]:" in tail:
                return self._check(entry, tail)
            if "[INITIAL STATE]:" in tail:
                return self._extract_state(entry, tail)
            if "[PLAN]:" in tail:
                return self._extract_plan(entry, tail)
            if "[QUESTION]:" in tail:
                return self._extract_question(entry, tail)
        except MockUnparseablePrompt:
            raise
        except RacError as exc:
            raise MockUnparseablePrompt(f"cannot read prompt: {exc}") from exc
        raise MockUnparseablePrompt("prompt matches no known template shape")

    # -- helpers -------------------------------------------------------------

    @staticmethod
    def _mode(tail: str) -> str:
        return "structured" if STATE_PREFIX in tail or QUERY_PREFIX in tail else "nl"

    @staticmethod
    def _read_state(entry: DomainEntry, text: str | None) -> tuple[State, set[str]]:
        text = (text or "").strip()
        if text.startswith(STATE_PREFIX):
            text = text[len(STATE_PREFIX):].strip()
        if not text or text.startswith("("):
            s = parse_state_text(text, entry.domain)
            return s, s.objects()
        return entry.annotations.grammar.parse_state(text)

    @staticmethod
    def _action(entry: DomainEntry, text: str | None) -> GroundAction:
        if not text:
            raise MockUnparseablePrompt("prompt has no action")
        grammar = entry.annotations.grammar
        return grammar.ground(grammar.parse_action(text))

    # -- stages --------------------------------------------------------------

    def _extract_state(self, entry, tail):
        self._reset()
        s, objects = self._read_state(entry, _section(tail, "[INITIAL STATE]:"))
        if self.fault == "corrupt-extraction" and len(s):
            s = State(s.sorted()[1:])
        return state_answer(s, entry.annotations, objects, self._mode(tail))

    def _extract_plan(self, entry, tail):
        ann = entry.annotations
        terms = parse_plan(_section(tail, "[PLAN]:") or "", ann)
        return plan_answer([ann.grammar.ground(t) for t in terms], ann)

    def _extract_question(self, entry, tail):
        ann = entry.annotations
        spec = parse_question(_section(tail, "[QUESTION]:") or "", ann).spec
        return question_answer(spec, self._mode(tail), ann)

    def _check(self, entry, tail):
        s, _ = self._read_state(entry, _section(tail, "[CURRENT STATE]:"))
        a = self._action(entry, _section(tail, "[ACTION]:"))
        c = self._counters()
        step = c["check"]
        c["check"] += 1
        res = is_applicable(s, a)
        ok = res.applicable
        if self._armed("flip-executability", step):
            c["fired"] = True
            ok = not ok
        unsatisfied = res.unsatisfied if not ok else ()
        return explain_check(a, entry.annotations, ok, unsatisfied)

    def _progress(self, entry, tail):
        d, ann = entry.domain, entry.annotations
        s, objects = self._read_state(entry, _section(tail, "[CURRENT STATE]:"))
        a = self._action(entry, _section(tail, "[ACTION TO EXECUTE]:"))
        c = self._counters()
        step = c["progress"]
        c["progress"] += 1
        new = s.update(a.add, a.delete)
        if self._armed("mutate-unrelated-fluent", step):
            types = infer_object_types(d, list(s) + list(new), [a])
            touched = a.add | a.delete
            extra = next((f for f in sorted(d.all_fluents(types)) if f not in new and f not in touched), None)
            if extra is not None:
                new = new.update(add=[extra])
                c["fired"] = True
        elif self._armed("drop-effect", step):
            fresh = sorted(a.add - s.fluents)
            kept = sorted(a.delete & s.fluents)
            if fresh:
                new = new.update(remove=[fresh[0]])
                c["fired"] = True
            elif kept:
                new = new.update(add=[kept[0]])
                c["fired"] = True
        return explain_progress(a, ann, new, objects | new.objects(), self._mode(tail))

    def _spec_from(self, entry, block: str) -> QuestionSpec:
        ann = entry.annotations
        lines = block.splitlines()
        payload = next((ln.strip()[len(QUERY_PREFIX):] for ln in reversed(lines) if ln.strip().startswith(QUERY_PREFIX)), None)
        ask = " ".join(ln for ln in lines if not ln.strip().startswith(QUERY_PREFIX))
        spec = parse_ask(ask, ann)
        if payload is None:
            return spec
        structured = parse_query_structured(payload, entry.domain)
        if spec.is_mcq:
            return QuestionSpec(None, choices=structured.choices)
        return QuestionSpec(spec.kind, structured.literals, validation=spec.validation)

    def _query(self, entry, tail):
        s, _ = self._read_state(entry, _section(tail, "[FINAL STATE]:"))
        spec = self._spec_from(entry, _section(tail, "[QUESTION]:") or "")
        v = evaluate_spec(progress(s, []), spec)
        return explain_query(spec, v, entry.annotations)

    def _baseline(self, entry, tail):
        ann = entry.annotations
        s, objects = self._read_state(entry, _section(tail, "[STATE DESCRIPTION]:"))
        pq = parse_question(_section(tail, "[PROBLEM]:") or "", ann)
        t = progress(s, [ann.grammar.ground(term) for term in pq.actions])
        v = evaluate_spec(t, pq.spec)
        if t.executable:
            why = f"Tracking the state through all {len(t.actions)} actions gives: {render_state_nl(t.final, ann, objects)}"
        else:
            why = sentence(f"action {t.failure_index + 1} cannot be executed")
        return f"{why}\n\n{final_answer(v.answer, pq.spec.answer_type)}"
