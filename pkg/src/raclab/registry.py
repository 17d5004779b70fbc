"""Domains known to the toolkit, each with its annotations and problems."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .domain import Domain, Problem, parse_domain, parse_problem
from .errors import ValidationError
from .nl import NlAnnotations, load_annotations

ALIASES = {"bw": "blocksworld", "gripper": "grippers"}


@dataclass(frozen=True, eq=False)
class DomainEntry:
    domain: Domain
    annotations: NlAnnotations
    problems: Mapping[str, Problem] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.domain.name

    @property
    def description(self) -> str:
        return self.annotations.description

    @property
    def demo(self) -> Problem:
        """Problem the prompt demonstrations are built from."""
        for name in sorted(self.problems):
            if name.endswith("-demo"):
                return self.problems[name]
        if not self.problems:
            raise ValidationError(f"domain {self.name} has no problems to build demonstrations from", self.name)
        return self.problems[sorted(self.problems)[0]]


def load_entry(domain_text: str, annotations_text: str, problem_texts: Iterable[str] = ()) -> DomainEntry:
    d = parse_domain(domain_text)
    ann = load_annotations(annotations_text, d)
    problems = {}
    for text in problem_texts:
        p = parse_problem(text, d)
        problems[p.name] = p
    return DomainEntry(d, ann, problems)


def load_entry_dir(path: str | Path) -> DomainEntry:
    """Read ``domain.pddl``, ``annotations.json`` and ``problems/*.pddl`` from a directory."""
    path = Path(path)
    problems = sorted((path / "problems").glob("*.pddl")) if (path / "problems").is_dir() else []
    return load_entry(
        (path / "domain.pddl").read_text(),
        (path / "annotations.json").read_text(),
        [p.read_text() for p in problems],
    )


class DomainRegistry:
    def __init__(self, entries: Iterable[DomainEntry] = ()):
        self._entries: dict[str, DomainEntry] = {}
        for e in entries:
            self.register(e)

    def register(self, entry: DomainEntry) -> None:
        if entry.name in self._entries:
            raise ValidationError(f"domain {entry.name} registered twice", entry.name)
        self._entries[entry.name] = entry

    def get(self, name: str) -> DomainEntry:
        key = name.strip().lower()
        key = ALIASES.get(key, key)
        try:
            return self._entries[key]
        except KeyError:
            raise ValidationError(f"unknown domain {name!r}", name) from None

    def __contains__(self, name: str) -> bool:
        key = name.strip().lower()
        return ALIASES.get(key, key) in self._entries

    def names(self) -> list[str]:
        return sorted(self._entries)

    def problem(self, name: str) -> tuple[DomainEntry, Problem]:
        for entry in self._entries.values():
            if name in entry.problems:
                return entry, entry.problems[name]
        raise ValidationError(f"unknown problem {name!r}", name)

    def find_in_text(self, text: str) -> DomainEntry | None:
        """The domain whose description appears verbatim in ``text``."""
        for name in self.names():
            entry = self._entries[name]
            if entry.description and entry.description in text:
                return entry
        return None


@functools.lru_cache(maxsize=None)
def bundled() -> DomainRegistry:
    root = resources.files("raclab") / "data" / "domains"
    reg = DomainRegistry()
    for sub in sorted(root.iterdir(), key=lambda p: p.name):
        if sub.is_dir():
            with resources.as_file(sub) as path:
                reg.register(load_entry_dir(path))
    return reg
