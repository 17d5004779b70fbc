"""Ground atoms, literals and closed-world states."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import InvalidName, ParseError
from .sexpr import Atom, SExpr, SList, read_all, read_one

__all__ = [
    "Fluent",
    "Literal",
    "State",
    "normalize_name",
    "literal_holds",
    "state_diff",
    "parse_fluent",
    "parse_literal",
    "parse_literals",
    "fluent_from_sexpr",
    "literal_from_sexpr",
]

_NAME_RE = re.compile(r"[a-z][a-z0-9_-]*")


def normalize_name(raw: str) -> str:
    """Trim and lowercase an identifier, rejecting anything malformed.

    >>> normalize_name("  Hoist1 ")
    'hoist1'
    """
    if not isinstance(raw, str):
        raise InvalidName(f"name must be text, got {type(raw).__name__}")
    name = raw.strip().lower()
    if not name:
        raise InvalidName("empty name")
    if not _NAME_RE.fullmatch(name):
        raise InvalidName(f"malformed name {raw!r}")
    return name


@dataclass(frozen=True)
class Fluent:
    predicate: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "predicate", normalize_name(self.predicate))
        object.__setattr__(self, "args", tuple(normalize_name(a) for a in self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    def canonical(self) -> str:
        return "(" + " ".join((self.predicate, *self.args)) + ")"

    def __str__(self) -> str:
        return self.canonical()

    def __lt__(self, other: "Fluent") -> bool:
        return self.canonical() < other.canonical()


@dataclass(frozen=True)
class Literal:
    fluent: Fluent
    positive: bool = True

    def negate(self) -> "Literal":
        return Literal(self.fluent, not self.positive)

    def canonical(self) -> str:
        text = self.fluent.canonical()
        return text if self.positive else f"(not {text})"

    def __str__(self) -> str:
        return self.canonical()

    def __lt__(self, other: "Literal") -> bool:
        return self.canonical() < other.canonical()

    @classmethod
    def pos(cls, predicate: str, *args: str) -> "Literal":
        return cls(Fluent(predicate, args), True)

    @classmethod
    def neg(cls, predicate: str, *args: str) -> "Literal":
        return cls(Fluent(predicate, args), False)


class State:
    """An immutable set of fluents; anything absent is false."""

    __slots__ = ("_fluents", "_hash")

    def __init__(self, fluents: Iterable[Fluent] = ()):
        fs = frozenset(fluents)
        for f in fs:
            if not isinstance(f, Fluent):
                raise TypeError(f"State holds Fluent values, got {f!r}")
        self._fluents = fs
        self._hash = hash(fs)

    @property
    def fluents(self) -> frozenset[Fluent]:
        return self._fluents

    def __contains__(self, f: object) -> bool:
        return f in self._fluents

    def __iter__(self) -> Iterator[Fluent]:
        return iter(self.sorted())

    def __len__(self) -> int:
        return len(self._fluents)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, State):
            return self._fluents == other._fluents
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"State({self.canonical()!r})"

    def sorted(self) -> list[Fluent]:
        return sorted(self._fluents, key=Fluent.canonical)

    def canonical(self) -> str:
        return " ".join(f.canonical() for f in self.sorted())

    def objects(self) -> set[str]:
        return {a for f in self._fluents for a in f.args}

    def update(self, add: Iterable[Fluent] = (), remove: Iterable[Fluent] = ()) -> "State":
        """Delete first, then add."""
        return State((self._fluents - frozenset(remove)) | frozenset(add))


def literal_holds(s: State, lit: Literal) -> bool:
    return (lit.fluent in s) == lit.positive


def state_diff(before: State, after: State) -> tuple[frozenset[Fluent], frozenset[Fluent]]:
    """Return ``(added, removed)`` going from ``before`` to ``after``."""
    return after.fluents - before.fluents, before.fluents - after.fluents


# -- syntax-only readers (no domain validation) ------------------------------

def _atom_text(expr: SExpr) -> str:
    if not isinstance(expr, Atom):
        raise ParseError("expected a name", expr.line, expr.column)
    try:
        return normalize_name(expr.text)
    except InvalidName as exc:
        raise ParseError(str(exc), expr.line, expr.column) from None


def fluent_from_sexpr(expr: SExpr) -> Fluent:
    if not isinstance(expr, SList) or len(expr) == 0:
        raise ParseError("expected (predicate arg*)", expr.line, expr.column)
    head = _atom_text(expr[0])
    if head == "not":
        raise ParseError("negation is not allowed here", expr.line, expr.column)
    return Fluent(head, tuple(_atom_text(a) for a in expr[1:]))


def literal_from_sexpr(expr: SExpr) -> Literal:
    if (
        isinstance(expr, SList)
        and len(expr) == 2
        and isinstance(expr[0], Atom)
        and expr[0].text.lower() == "not"
    ):
        return Literal(fluent_from_sexpr(expr[1]), False)
    return Literal(fluent_from_sexpr(expr), True)


def parse_fluent(text: str) -> Fluent:
    return fluent_from_sexpr(read_one(text))


def parse_literal(text: str) -> Literal:
    return literal_from_sexpr(read_one(text))


def parse_literals(text: str) -> list[Literal]:
    return [literal_from_sexpr(e) for e in read_all(text)]
