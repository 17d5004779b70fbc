"""Minimal s-expression reader for the STRIPS subset and canonical texts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import ParseError


@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class SList:
    items: tuple["SExpr", ...]
    line: int
    column: int

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        return iter(self.items)


SExpr = Union[Atom, SList]


def tokenize(text: str) -> list[tuple[str, int, int]]:
    """Split ``text`` into ``(token, line, column)``; ``;`` starts a comment."""
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            tokens.append((ch, line, col))
            i += 1
            col += 1
            continue
        start, start_col = i, col
        while i < n and not text[i].isspace() and text[i] not in "();":
            i += 1
            col += 1
        tokens.append((text[start:i], line, start_col))
    return tokens


def read_all(text: str) -> list[SExpr]:
    """Read every top-level expression in ``text``."""
    tokens = tokenize(text)
    pos = 0
    out: list[SExpr] = []

    def read() -> SExpr:
        nonlocal pos
        tok, line, col = tokens[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unexpected ')'", line, col)
        if tok != "(":
            return Atom(tok, line, col)
        items = []
        while True:
            if pos >= len(tokens):
                raise ParseError("unclosed '('", line, col)
            if tokens[pos][0] == ")":
                pos += 1
                return SList(tuple(items), line, col)
            items.append(read())

    while pos < len(tokens):
        out.append(read())
    return out


def read_one(text: str) -> SExpr:
    exprs = read_all(text)
    if not exprs:
        raise ParseError("empty input", 1, 1)
    if len(exprs) > 1:
        extra = exprs[1]
        raise ParseError("trailing content after expression", extra.line, extra.column)
    return exprs[0]
