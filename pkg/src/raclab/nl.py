"""Natural-language annotations: rendering states/actions and reading them back.

Annotations live in a JSON sidecar next to the domain file::

    {
      "domain": "blocksworld",
      "description": "...",
      "action_templates": {"stack": ["stack {x} on top of {y}", ...]},
      "fluent_templates": {"on": ["{x} is on top of {y}", "{x} is on {y}"]},
      "zero_arity_templates": {"handempty": "the hand is empty"}
    }

Each template value is a string or a list of strings.  The first entry is the
canonical phrasing used for rendering; every entry is accepted when reading
text back.  Fluent templates are clauses whose canonical form starts with the
first parameter (the subject); the object-grouped property is the clause with
the leading ``{subject} is`` removed, so ``"{x} is clear"`` yields ``clear``.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

from .core import Fluent, Literal, State, normalize_name
from .domain import Domain, GroundAction, ground_action
from .errors import MissingTemplate, ParseError, ValidationError

NAME_PATTERN = r"[A-Za-z][A-Za-z0-9_-]*"
_SEP_RE = re.compile(r"\s*,\s*and\s+|\s*,\s*|\s+and\s+", re.IGNORECASE)
_END_RE = re.compile(r"\s*(?:[.?!]|$)")
WORLD = "World"
NO_PROPERTIES = "(no properties)"


def _as_tuple(v) -> tuple[str, ...]:
    if isinstance(v, str):
        return (v,)
    if isinstance(v, (list, tuple)) and v and all(isinstance(x, str) for x in v):
        return tuple(v)
    raise ValidationError(f"template must be a string or a non-empty list of strings, got {v!r}")


def placeholders(template: str) -> list[str]:
    return [f for _, f, _, _ in string.Formatter().parse(template) if f]


def display_name(obj: str) -> str:
    return obj[:1].upper() + obj[1:]


def negate_clause(clause: str) -> str:
    if " is " in clause:
        return clause.replace(" is ", " is not ", 1)
    return "it is not the case that " + clause


@dataclass(frozen=True)
class NlAnnotations:
    domain: str
    description: str
    action_templates: Mapping[str, tuple[str, ...]]
    fluent_templates: Mapping[str, tuple[str, ...]]
    zero_arity_templates: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    domain_def: Domain | None = field(default=None, compare=False, repr=False)

    def bind(self, d: Domain) -> "NlAnnotations":
        """Check coverage and placeholders against ``d`` and attach it."""
        if self.domain != d.name:
            raise ValidationError(f"annotations are for {self.domain}, not {d.name}", self.domain)
        for name, schema in d.schemas.items():
            temps = self.action_templates.get(name)
            if not temps:
                raise MissingTemplate(f"no action template for {name}")
            for t in temps:
                if sorted(placeholders(t)) != sorted(schema.param_names):
                    raise ValidationError(f"template {t!r} must use exactly {schema.param_names}", name)
            if "," in temps[0]:
                raise ValidationError(f"canonical action template for {name} contains a comma", name)
        for name, pred in d.predicates.items():
            if pred.arity == 0:
                if not self.zero_arity_templates.get(name):
                    raise MissingTemplate(f"no zero-arity template for {name}")
                continue
            temps = self.fluent_templates.get(name)
            if not temps:
                raise MissingTemplate(f"no fluent template for {name}")
            for t in temps:
                if sorted(placeholders(t)) != sorted(pred.param_names):
                    raise ValidationError(f"template {t!r} must use exactly {pred.param_names}", name)
            subject = pred.param_names[0]
            if not temps[0].startswith("{" + subject + "}"):
                raise ValidationError(f"canonical template for {name} must start with {{{subject}}}", name)
            if "," in temps[0]:
                raise ValidationError(f"canonical fluent template for {name} contains a comma", name)
        extra = (set(self.action_templates) - set(d.schemas)) | (
            set(self.fluent_templates) | set(self.zero_arity_templates)
        ) - set(d.predicates)
        if extra:
            raise ValidationError(f"templates for undeclared symbols: {sorted(extra)}")
        return NlAnnotations(
            self.domain,
            self.description,
            self.action_templates,
            self.fluent_templates,
            self.zero_arity_templates,
            d,
        )

    @property
    def d(self) -> Domain:
        if self.domain_def is None:
            raise ValidationError("annotations are not bound to a domain; call bind()")
        return self.domain_def

    def property_phrase(self, predicate: str) -> str:
        """Object-grouped phrase for ``predicate`` (subject placeholder removed)."""
        pred = self.d.predicates[predicate]
        clause = self.fluent_templates[predicate][0]
        return _strip_subject(clause, pred.param_names[0])

    @cached_property
    def grammar(self) -> "NlGrammar":
        return NlGrammar(self)


def _strip_subject(clause: str, subject: str) -> str:
    return re.sub(r"^\{" + re.escape(subject) + r"\}\s+(?:is\s+)?", "", clause)


def load_annotations(text: str, d: Domain | None = None) -> NlAnnotations:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"annotations are not valid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    missing = {"domain", "description", "action_templates", "fluent_templates"} - set(doc)
    if missing:
        raise ValidationError(f"annotations missing keys {sorted(missing)}")
    ann = NlAnnotations(
        domain=normalize_name(doc["domain"]),
        description=doc["description"].strip(),
        action_templates={normalize_name(k): _as_tuple(v) for k, v in doc["action_templates"].items()},
        fluent_templates={normalize_name(k): _as_tuple(v) for k, v in doc["fluent_templates"].items()},
        zero_arity_templates={
            normalize_name(k): _as_tuple(v) for k, v in doc.get("zero_arity_templates", {}).items()
        },
    )
    return ann.bind(d) if d is not None else ann


# -- rendering ---------------------------------------------------------------

def _fmt(template: str, names: Sequence[str], values: Sequence[str]) -> str:
    return template.format(**dict(zip(names, values)))


def render_fluent_nl(f: Fluent, ann: NlAnnotations) -> str:
    pred = ann.d.predicates[f.predicate]
    if pred.arity == 0:
        return ann.zero_arity_templates[f.predicate][0]
    return _fmt(ann.fluent_templates[f.predicate][0], pred.param_names, f.args)


def render_literal_nl(lit: Literal, ann: NlAnnotations) -> str:
    clause = render_fluent_nl(lit.fluent, ann)
    return clause if lit.positive else negate_clause(clause)


def render_state_nl(s: State, ann: NlAnnotations, objects: Iterable[str] = ()) -> str:
    """One ``Object: prop, prop.`` sentence per object, then ``World: ...``."""
    groups: dict[str, list[str]] = {normalize_name(o): [] for o in objects}
    world: list[str] = []
    for f in s.sorted():
        if f.predicate not in ann.d.predicates:
            raise MissingTemplate(f"no template for {f.predicate}")
        pred = ann.d.predicates[f.predicate]
        if pred.arity == 0:
            temps = ann.zero_arity_templates.get(f.predicate)
            if not temps:
                raise MissingTemplate(f"no zero-arity template for {f.predicate}")
            world.append(temps[0])
            continue
        if not ann.fluent_templates.get(f.predicate):
            raise MissingTemplate(f"no fluent template for {f.predicate}")
        phrase = _fmt(ann.property_phrase(f.predicate), pred.param_names, f.args)
        groups.setdefault(f.args[0], []).append(phrase)
    sentences = [
        f"{display_name(obj)}: {', '.join(props) if props else NO_PROPERTIES}."
        for obj, props in sorted(groups.items())
    ]
    if world:
        sentences.append(f"{WORLD}: {', '.join(world)}.")
    return " ".join(sentences)


def render_action_nl(a: GroundAction, ann: NlAnnotations) -> str:
    temps = ann.action_templates.get(a.schema)
    if not temps:
        raise MissingTemplate(f"no action template for {a.schema}")
    schema = ann.d.schemas[a.schema]
    return _fmt(temps[0], schema.param_names, a.args)


def join_items(items: Sequence[str]) -> str:
    """``a``, ``a and b``, ``a, b and c``."""
    if len(items) <= 1:
        return "".join(items)
    return ", ".join(items[:-1]) + " and " + items[-1]


# -- reading rendered text back ---------------------------------------------

def compile_template(template: str) -> re.Pattern:
    out = []
    seen = set()
    for literal, fname, _, _ in string.Formatter().parse(template):
        if literal:
            parts = re.split(r"\s+", literal)
            out.append(r"\s+".join(re.escape(p) for p in parts))
        if fname:
            if fname in seen:
                out.append(f"(?P={fname})")
            else:
                seen.add(fname)
                out.append(f"(?P<{fname}>{NAME_PATTERN})")
    return re.compile("".join(out), re.IGNORECASE)


@dataclass(frozen=True)
class _Item:
    regex: re.Pattern
    build: Callable[[re.Match], object]


def parse_sequence(text: str, start: int, items: Sequence[_Item]) -> tuple[list, int] | None:
    """Read ``item (sep item)*`` from ``start`` up to a sentence end.

    Separators are commas and ``and``.  Backtracks, so templates that contain
    commas themselves are fine.  Returns the values and the end offset, or
    None when no complete reading exists.
    """
    memo: dict[int, tuple[list, int] | None] = {}

    def go(pos: int):
        if pos in memo:
            return memo[pos]
        memo[pos] = None
        for item in items:
            m = item.regex.match(text, pos)
            if not m:
                continue
            try:
                value = item.build(m)
            except (ValidationError, ValueError):
                continue
            after = m.end()
            end = _END_RE.match(text, after)
            if end:
                memo[pos] = ([value], end.end())
                return memo[pos]
            sep = _SEP_RE.match(text, after)
            if sep:
                rest = go(sep.end())
                if rest is not None:
                    memo[pos] = ([value, *rest[0]], rest[1])
                    return memo[pos]
        return None

    return go(start)


class NlGrammar:
    """Inverse of the renderers, driven by every template variant."""

    def __init__(self, ann: NlAnnotations):
        self.ann = ann
        d = ann.d
        self.action_items: list[_Item] = []
        for name in sorted(ann.action_templates):
            schema = d.schemas[name]
            for t in ann.action_templates[name]:
                self.action_items.append(_Item(compile_template(t), self._action_builder(name, schema.param_names)))
        self.clause_items: list[_Item] = []
        self.literal_items: list[_Item] = []
        self.properties: list[tuple[str, re.Pattern, str, tuple[str, ...]]] = []
        for name in sorted(d.predicates):
            pred = d.predicates[name]
            temps = (
                ann.zero_arity_templates.get(name, ()) if pred.arity == 0 else ann.fluent_templates.get(name, ())
            )
            for t in temps:
                build = self._fluent_builder(name, pred.param_names)
                self.clause_items.append(_Item(compile_template(t), build))
                self.literal_items.append(_Item(compile_template(t), _positive(build)))
                self.literal_items.append(_Item(compile_template(negate_clause(t)), _negative(build)))
                if pred.arity:
                    for subject in pred.param_names:
                        if t.startswith("{" + subject + "}"):
                            phrase = _strip_subject(t, subject)
                            self.properties.append((name, compile_template(phrase), subject, pred.param_names))
        # longer templates first so that "on top of {y}" wins over "on {y}"
        for items in (self.action_items, self.clause_items, self.literal_items):
            items.sort(key=lambda it: -len(it.regex.pattern))
        self.properties.sort(key=lambda p: -len(p[1].pattern))

    @staticmethod
    def _action_builder(name, params):
        return lambda m: (name, tuple(normalize_name(m.group(p)) for p in params))

    @staticmethod
    def _fluent_builder(name, params):
        return lambda m: Fluent(name, tuple(normalize_name(m.group(p)) for p in params))

    def ground(self, term: tuple[str, tuple[str, ...]], objects=None) -> GroundAction:
        return ground_action(self.ann.d, term[0], term[1], objects)

    def parse_action(self, sentence: str) -> tuple[str, tuple[str, ...]]:
        s = sentence.strip().rstrip(".").strip()
        for item in self.action_items:
            m = item.regex.fullmatch(s)
            if m:
                return item.build(m)
        raise ParseError(f"no action template matches {sentence!r}")

    def parse_action_list(self, text: str, start: int = 0):
        return parse_sequence(text, start, self.action_items)

    def parse_literal_list(self, text: str, start: int = 0):
        return parse_sequence(text, start, self.literal_items)

    def parse_state(self, text: str) -> tuple[State, set[str]]:
        """Read either rendered form back into a state plus the objects named.

        Accepts the object-grouped form produced by ``render_state_nl`` and a
        flat clause list (``a is clear, b is on the table and ...``).
        """
        text = text.strip()
        if not text:
            return State(), set()
        if re.match(rf"{NAME_PATTERN}\s*:", text):
            return self._parse_grouped(text)
        res = parse_sequence(text, 0, self.clause_items)
        if res is None or text[res[1]:].strip():
            raise ParseError(f"cannot read state description: {text[:80]!r}")
        fluents = res[0]
        return State(fluents), {a for f in fluents for a in f.args}

    def _parse_grouped(self, text: str) -> tuple[State, set[str]]:
        fluents: list[Fluent] = []
        objects: set[str] = set()
        pos = 0
        sentence_re = re.compile(rf"\s*({NAME_PATTERN})\s*:\s*([^.]*)\.")
        while pos < len(text):
            m = sentence_re.match(text, pos)
            if not m:
                if text[pos:].strip():
                    raise ParseError(f"cannot read state sentence at {text[pos:pos + 60]!r}")
                break
            pos = m.end()
            subject, body = m.group(1), m.group(2).strip()
            if subject == WORLD:
                for phrase in _split_props(body):
                    fluents.append(self._zero_arity(phrase))
                continue
            obj = normalize_name(subject)
            objects.add(obj)
            if body == NO_PROPERTIES or not body:
                continue
            for phrase in _split_props(body):
                f = self._property(obj, phrase)
                fluents.append(f)
                objects.update(f.args)
        return State(fluents), objects

    def _zero_arity(self, phrase: str) -> Fluent:
        for item in self.clause_items:
            m = item.regex.fullmatch(phrase)
            if m:
                f = item.build(m)
                if f.arity == 0:
                    return f
        raise ParseError(f"unknown world property {phrase!r}")

    def _property(self, obj: str, phrase: str) -> Fluent:
        for name, regex, subject, params in self.properties:
            m = regex.fullmatch(phrase)
            if not m:
                continue
            values = {p: obj if p == subject else normalize_name(m.group(p)) for p in params}
            return Fluent(name, tuple(values[p] for p in params))
        raise ParseError(f"unknown property {phrase!r} of {obj}")


def _split_props(body: str) -> list[str]:
    return [p.strip() for p in body.split(",") if p.strip()]


def _positive(build):
    return lambda m: Literal(build(m), True)


def _negative(build):
    return lambda m: Literal(build(m), False)
