"""STRIPS-subset domains and problems: parsing, validation and grounding.

The accepted grammar is a small slice of PDDL::

    (define (domain NAME)
      (:requirements ...)            ; optional, ignored
      (:types T* [- PARENT] ...)
      (:predicates (p ?v [- T] ...) ...)
      (:action NAME
        :parameters (?v [- T] ...)
        :precondition (and LIT*)
        :effect (and LIT*)))

A negated effect literal is a delete effect.  Problems follow the matching
``(define (problem NAME) (:domain D) (:objects ...) (:init ...) (:goal ...))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .core import Fluent, Literal, State, normalize_name
from .errors import (
    ArityMismatch,
    InvalidName,
    ParseError,
    TypeMismatch,
    UnknownSchema,
    ValidationError,
)
from .sexpr import Atom, SExpr, SList, read_all, read_one

ROOT_TYPE = "object"


@dataclass(frozen=True)
class AtomTemplate:
    """A predicate applied to variables (``?x``) of an action schema."""

    predicate: str
    terms: tuple[str, ...]

    def ground(self, binding: Mapping[str, str]) -> Fluent:
        return Fluent(self.predicate, tuple(binding[t] for t in self.terms))

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate, *self.terms)) + ")"


@dataclass(frozen=True)
class Predicate:
    name: str
    params: tuple[tuple[str, str], ...]  # (variable, type)

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(v.lstrip("?") for v, _ in self.params)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, str], ...]
    precondition: tuple[tuple[AtomTemplate, bool], ...]
    add: tuple[AtomTemplate, ...]
    delete: tuple[AtomTemplate, ...]

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(v.lstrip("?") for v, _ in self.params)


@dataclass(frozen=True)
class GroundAction:
    schema: str
    args: tuple[str, ...]
    precondition: frozenset[Literal]
    add: frozenset[Fluent]
    delete: frozenset[Fluent]

    def canonical(self) -> str:
        return "(" + " ".join((self.schema, *self.args)) + ")"

    def __str__(self) -> str:
        return self.canonical()


@dataclass(frozen=True)
class Domain:
    name: str
    types: Mapping[str, str | None]  # type -> parent (None only for the root)
    predicates: Mapping[str, Predicate]
    schemas: Mapping[str, ActionSchema]

    def is_subtype(self, t: str, ancestor: str) -> bool:
        seen = set()
        cur: str | None = t
        while cur is not None and cur not in seen:
            if cur == ancestor:
                return True
            seen.add(cur)
            cur = self.types.get(cur)
        return False

    def compatible(self, a: str, b: str) -> bool:
        return self.is_subtype(a, b) or self.is_subtype(b, a)

    def groundings(self, objects: Mapping[str, str]) -> Iterator[GroundAction]:
        """Every type-correct grounding of every schema, in sorted order."""
        for name in sorted(self.schemas):
            schema = self.schemas[name]
            pools = [
                sorted(o for o, t in objects.items() if self.is_subtype(t, ptype))
                for _, ptype in schema.params
            ]
            for combo in itertools.product(*pools):
                yield ground_action(self, name, combo)

    def all_fluents(self, objects: Mapping[str, str]) -> Iterator[Fluent]:
        """Every type-correct ground fluent over ``objects``."""
        for name in sorted(self.predicates):
            pred = self.predicates[name]
            pools = [
                sorted(o for o, t in objects.items() if self.is_subtype(t, ptype))
                for _, ptype in pred.params
            ]
            for combo in itertools.product(*pools):
                yield Fluent(name, combo)


@dataclass(frozen=True)
class Problem:
    name: str
    domain: str
    objects: Mapping[str, str]
    init: State
    goal: frozenset[Literal] | None = None


# -- helpers over s-expressions ----------------------------------------------

def _name(expr: SExpr, what: str = "name") -> str:
    if not isinstance(expr, Atom):
        raise ParseError(f"expected {what}", expr.line, expr.column)
    try:
        return normalize_name(expr.text)
    except InvalidName:
        raise ParseError(f"malformed {what} {expr.text!r}", expr.line, expr.column) from None


def _var(expr: SExpr) -> str:
    if not isinstance(expr, Atom) or not expr.text.startswith("?"):
        raise ParseError("expected a ?variable", expr.line, expr.column)
    try:
        return "?" + normalize_name(expr.text[1:])
    except InvalidName:
        raise ParseError(f"malformed variable {expr.text!r}", expr.line, expr.column) from None


def _keyword(expr: SExpr) -> str | None:
    if isinstance(expr, Atom) and expr.text.startswith(":"):
        return expr.text.lower()
    return None


def _typed_list(items: Iterable[SExpr], item_parser) -> list[tuple[str, str]]:
    """Parse ``a b - t c - u d`` into ``[(a, t), (b, t), (c, u), (d, object)]``."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    items = list(items)
    i = 0
    while i < len(items):
        it = items[i]
        if isinstance(it, Atom) and it.text == "-":
            if i + 1 >= len(items) or not pending:
                raise ParseError("dangling type marker '-'", it.line, it.column)
            tname = _name(items[i + 1], "type name")
            out.extend((p, tname) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(item_parser(it))
        i += 1
    out.extend((p, ROOT_TYPE) for p in pending)
    return out


def _conjunction(expr: SExpr) -> list[SExpr]:
    if isinstance(expr, SList) and len(expr) and isinstance(expr[0], Atom) and expr[0].text.lower() == "and":
        return list(expr[1:])
    if isinstance(expr, SList) and len(expr) == 0:
        return []
    return [expr]


def _literal_template(expr: SExpr) -> tuple[AtomTemplate, bool, SExpr]:
    positive = True
    if isinstance(expr, SList) and len(expr) == 2 and isinstance(expr[0], Atom) and expr[0].text.lower() == "not":
        positive = False
        expr = expr[1]
    if not isinstance(expr, SList) or len(expr) == 0:
        raise ParseError("expected (predicate term*)", expr.line, expr.column)
    head = _name(expr[0], "predicate name")
    for bad in ("and", "or", "forall", "exists", "when", "imply"):
        if head == bad:
            raise ParseError(f"'{bad}' is outside the supported STRIPS subset", expr.line, expr.column)
    terms = []
    for t in expr[1:]:
        if isinstance(t, Atom) and t.text.startswith("?"):
            terms.append(_var(t))
        else:
            terms.append(_name(t, "term"))
    return AtomTemplate(head, tuple(terms)), positive, expr


def _define_header(expr: SExpr, kind: str) -> tuple[str, list[SExpr]]:
    if not isinstance(expr, SList) or len(expr) < 2 or not isinstance(expr[0], Atom) or expr[0].text.lower() != "define":
        raise ParseError("expected (define ...)", expr.line, expr.column)
    head = expr[1]
    if (
        not isinstance(head, SList)
        or len(head) != 2
        or not isinstance(head[0], Atom)
        or head[0].text.lower() != kind
    ):
        raise ParseError(f"expected ({kind} NAME)", head.line, head.column)
    return _name(head[1], f"{kind} name"), list(expr[2:])


# -- domain ------------------------------------------------------------------

def parse_domain(text: str) -> Domain:
    """Parse and fully validate a domain definition."""
    if not text.strip():
        raise ParseError("empty domain text", 1, 1)
    name, sections = _define_header(read_one(text), "domain")

    types: dict[str, str | None] = {ROOT_TYPE: None}
    predicates: dict[str, Predicate] = {}
    schemas: dict[str, ActionSchema] = {}
    raw_actions: list[SList] = []

    for sec in sections:
        if not isinstance(sec, SList) or not sec.items:
            raise ParseError("expected a (:section ...)", sec.line, sec.column)
        key = _keyword(sec[0])
        if key == ":requirements":
            continue
        if key == ":types":
            for child, parent in _typed_list(sec[1:], lambda e: _name(e, "type name")):
                if child == ROOT_TYPE:
                    continue
                if child in types and types[child] not in (ROOT_TYPE, parent):
                    raise ValidationError(f"type {child} declared with two parents", child)
                types[child] = parent
        elif key == ":predicates":
            for p in sec[1:]:
                if not isinstance(p, SList) or not p.items:
                    raise ParseError("expected (predicate ?var*)", p.line, p.column)
                pname = _name(p[0], "predicate name")
                if pname in predicates:
                    raise ValidationError(f"predicate {pname} declared twice", pname)
                predicates[pname] = Predicate(pname, tuple(_typed_list(p[1:], _var)))
        elif key == ":action":
            raw_actions.append(sec)
        else:
            raise ParseError(f"unsupported section {sec[0]}", sec.line, sec.column)

    for t, parent in types.items():
        if parent is not None and parent not in types:
            # PDDL lets a parent be introduced implicitly
            types[parent] = ROOT_TYPE
    _check_acyclic(types)

    for pred in predicates.values():
        for _, t in pred.params:
            if t not in types:
                raise ValidationError(f"predicate {pred.name} uses undeclared type {t}", t)

    for sec in raw_actions:
        schema = _parse_action(sec, types, predicates)
        if schema.name in schemas:
            raise ValidationError(f"action {schema.name} declared twice", schema.name)
        schemas[schema.name] = schema

    return Domain(name, types, predicates, schemas)


def _check_acyclic(types: Mapping[str, str | None]) -> None:
    for t in types:
        seen = set()
        cur: str | None = t
        while cur is not None:
            if cur in seen:
                raise ValidationError(f"type hierarchy has a cycle through {t}", t)
            seen.add(cur)
            cur = types.get(cur)


def _parse_action(sec: SList, types, predicates) -> ActionSchema:
    if len(sec) < 2:
        raise ParseError("action needs a name", sec.line, sec.column)
    name = _name(sec[1], "action name")
    fields: dict[str, SExpr] = {}
    rest = list(sec[2:])
    if len(rest) % 2:
        raise ParseError(f"action {name}: keyword without value", sec.line, sec.column)
    for k, v in zip(rest[::2], rest[1::2]):
        key = _keyword(k)
        if key not in (":parameters", ":precondition", ":effect"):
            raise ParseError(f"action {name}: unexpected {k}", k.line, k.column)
        fields[key] = v

    params_expr = fields.get(":parameters")
    params: list[tuple[str, str]] = []
    if params_expr is not None:
        if not isinstance(params_expr, SList):
            raise ParseError("expected (?var ...)", params_expr.line, params_expr.column)
        params = _typed_list(params_expr.items, _var)
    ptypes = dict(params)
    if len(ptypes) != len(params):
        raise ValidationError(f"action {name} repeats a parameter", name)
    for v, t in params:
        if t not in types:
            raise ValidationError(f"action {name}: parameter {v} has undeclared type {t}", t)

    def checked(expr: SExpr) -> tuple[AtomTemplate, bool]:
        atom, positive, where = _literal_template(expr)
        pred = predicates.get(atom.predicate)
        if pred is None:
            raise ValidationError(
                f"action {name} references undeclared predicate {atom.predicate}", atom.predicate
            )
        if len(atom.terms) != pred.arity:
            raise ValidationError(
                f"action {name}: {atom} has arity {len(atom.terms)}, "
                f"{atom.predicate} expects {pred.arity}",
                atom.predicate,
            )
        for term, (_, ptype) in zip(atom.terms, pred.params):
            if not term.startswith("?"):
                raise ValidationError(f"action {name}: constant {term} not supported", term)
            if term not in ptypes:
                raise ValidationError(f"action {name}: variable {term} is not a parameter", term)
            if ptypes[term] not in types or not _compatible(types, ptypes[term], ptype):
                raise ValidationError(
                    f"action {name}: {term} of type {ptypes[term]} cannot fill {ptype} in {atom}", term
                )
        return atom, positive

    pre = tuple(checked(e) for e in _conjunction(fields.get(":precondition", SList((), 0, 0))))
    effects = [checked(e) for e in _conjunction(fields.get(":effect", SList((), 0, 0)))]
    add = tuple(a for a, pos in effects if pos)
    delete = tuple(a for a, pos in effects if not pos)
    return ActionSchema(name, tuple(params), pre, add, delete)


def _compatible(types, a: str, b: str) -> bool:
    def sub(t, anc):
        cur = t
        while cur is not None:
            if cur == anc:
                return True
            cur = types.get(cur)
        return False

    return sub(a, b) or sub(b, a)


# -- problems and states -----------------------------------------------------

def _object_map(objects) -> dict[str, str] | None:
    if objects is None:
        return None
    if isinstance(objects, Mapping):
        return {normalize_name(k): normalize_name(v) for k, v in objects.items()}
    return {normalize_name(o): ROOT_TYPE for o in objects}


def validate_fluent(d: Domain, f: Fluent, objects: Mapping[str, str] | None = None) -> None:
    pred = d.predicates.get(f.predicate)
    if pred is None:
        raise ValidationError(f"unknown predicate {f.predicate}", f.predicate)
    if f.arity != pred.arity:
        raise ArityMismatch(
            f"{f.canonical()} has arity {f.arity}, {f.predicate} expects {pred.arity}", f.predicate
        )
    if objects is None:
        return
    for arg, (_, ptype) in zip(f.args, pred.params):
        if arg not in objects:
            raise ValidationError(f"unknown object {arg} in {f.canonical()}", arg)
        if objects[arg] != ROOT_TYPE and not d.is_subtype(objects[arg], ptype):
            raise TypeMismatch(f"{arg} of type {objects[arg]} cannot fill {ptype} in {f.canonical()}", arg)


def parse_problem(text: str, d: Domain) -> Problem:
    if not text.strip():
        raise ParseError("empty problem text", 1, 1)
    name, sections = _define_header(read_one(text), "problem")
    dom_name = None
    objects: dict[str, str] = {}
    init: list[Fluent] = []
    goal: list[Literal] | None = None
    for sec in sections:
        if not isinstance(sec, SList) or not sec.items:
            raise ParseError("expected a (:section ...)", sec.line, sec.column)
        key = _keyword(sec[0])
        if key == ":domain":
            dom_name = _name(sec[1], "domain name")
        elif key == ":objects":
            for o, t in _typed_list(sec[1:], lambda e: _name(e, "object name")):
                if o in objects:
                    raise ValidationError(f"object {o} declared twice", o)
                objects[o] = t
        elif key == ":init":
            for e in sec[1:]:
                atom, positive, where = _literal_template(e)
                if not positive:
                    raise ParseError("negative literal in :init", where.line, where.column)
                init.append(Fluent(atom.predicate, atom.terms))
        elif key == ":goal":
            goal = []
            for e in _conjunction(sec[1]) if len(sec) > 1 else []:
                atom, positive, _ = _literal_template(e)
                goal.append(Literal(Fluent(atom.predicate, atom.terms), positive))
        elif key == ":requirements":
            continue
        else:
            raise ParseError(f"unsupported section {sec[0]}", sec.line, sec.column)
    if dom_name is None:
        raise ValidationError("problem does not name its domain")
    if dom_name != d.name:
        raise ValidationError(f"problem is for domain {dom_name}, not {d.name}", dom_name)
    for o, t in objects.items():
        if t not in d.types:
            raise ValidationError(f"object {o} has undeclared type {t}", t)
    for f in init:
        validate_fluent(d, f, objects)
    if goal is not None:
        for lit in goal:
            validate_fluent(d, lit.fluent, objects)
    return Problem(name, d.name, objects, State(init), frozenset(goal) if goal is not None else None)


def parse_state_text(text: str, d: Domain, objects=None) -> State:
    """Parse the canonical state form ``(p a b) (q c) ...``; empty text is the empty state."""
    objs = _object_map(objects)
    fluents = []
    for e in read_all(text):
        atom, positive, where = _literal_template(e)
        if not positive:
            raise ParseError("states list true fluents only", where.line, where.column)
        if any(t.startswith("?") for t in atom.terms):
            raise ParseError("variables are not allowed in a state", where.line, where.column)
        f = Fluent(atom.predicate, atom.terms)
        validate_fluent(d, f, objs)
        fluents.append(f)
    return State(fluents)


def parse_literals_text(text: str, d: Domain, objects=None) -> frozenset[Literal]:
    objs = _object_map(objects)
    out = set()
    for e in read_all(text):
        atom, positive, where = _literal_template(e)
        if any(t.startswith("?") for t in atom.terms):
            raise ParseError("variables are not allowed here", where.line, where.column)
        f = Fluent(atom.predicate, atom.terms)
        validate_fluent(d, f, objs)
        out.add(Literal(f, positive))
    return frozenset(out)


def render_state_canonical(s: State) -> str:
    return s.canonical()


# -- grounding ---------------------------------------------------------------

def parse_action_term(text: str) -> tuple[str, tuple[str, ...]]:
    """Read ``(stack a b)`` or ``stack a b`` into ``("stack", ("a", "b"))``."""
    stripped = text.strip().rstrip(".").strip()
    if not stripped:
        raise ParseError("empty action term", 1, 1)
    if not stripped.startswith("("):
        stripped = f"({stripped})"
    expr = read_one(stripped)
    if not isinstance(expr, SList) or not expr.items:
        raise ParseError("expected (action arg*)", expr.line, expr.column)
    return _name(expr[0], "action name"), tuple(_name(a, "object name") for a in expr[1:])


def ground_action(d: Domain, name: str, args: Iterable[str], objects=None) -> GroundAction:
    """Instantiate schema ``name`` with ``args``.

    When ``objects`` (name -> type) is supplied, arguments must be declared
    objects of a compatible type.  Deletes that are re-added by the same
    grounding are dropped, which is what delete-then-add application does
    anyway, so every GroundAction has disjoint add and delete sets.
    """
    name = normalize_name(name)
    args = tuple(normalize_name(a) for a in args)
    schema = d.schemas.get(name)
    if schema is None:
        raise UnknownSchema(f"unknown action {name}", name)
    if len(args) != schema.arity:
        raise ArityMismatch(f"{name} takes {schema.arity} arguments, got {len(args)}", name)
    objs = _object_map(objects)
    if objs is not None:
        for a, (v, ptype) in zip(args, schema.params):
            if a not in objs:
                raise ValidationError(f"unknown object {a}", a)
            if objs[a] != ROOT_TYPE and not d.is_subtype(objs[a], ptype):
                raise TypeMismatch(f"{a} of type {objs[a]} cannot fill {v} - {ptype} of {name}", a)
    binding = {v: a for (v, _), a in zip(schema.params, args)}
    pre = frozenset(Literal(t.ground(binding), pos) for t, pos in schema.precondition)
    add = frozenset(t.ground(binding) for t in schema.add)
    delete = frozenset(t.ground(binding) for t in schema.delete) - add
    return GroundAction(name, args, pre, add, delete)


def ground_term(d: Domain, text: str, objects=None) -> GroundAction:
    name, args = parse_action_term(text)
    return ground_action(d, name, args, objects)


def infer_object_types(d: Domain, fluents: Iterable[Fluent], actions: Iterable[GroundAction] = ()) -> dict[str, str]:
    """Guess the most specific type of every object from where it appears.

    Used when only state text is at hand (no problem file).
    """
    seen: dict[str, set[str]] = {}
    for f in fluents:
        pred = d.predicates.get(f.predicate)
        if pred is None:
            continue
        for a, (_, t) in zip(f.args, pred.params):
            seen.setdefault(a, set()).add(t)
    for act in actions:
        schema = d.schemas.get(act.schema)
        if schema is None:
            continue
        for a, (_, t) in zip(act.args, schema.params):
            seen.setdefault(a, set()).add(t)
    out = {}
    for obj, ts in seen.items():
        best = ROOT_TYPE
        for t in ts:
            if d.is_subtype(t, best):
                best = t
        out[obj] = best
    return out
