"""Benchmark instances, suite execution, accuracy tables, label audits and error labels."""

from __future__ import annotations

import csv
import enum
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .config import Config
from .core import Literal, State, parse_fluent, state_diff
from .domain import (
    GroundAction,
    ground_term,
    infer_object_types,
    parse_literals_text,
    validate_fluent,
)
from .engine import Trace, is_applicable, progress
from .errors import IncomparableRun, RacError, SchemaError, UnauditableInstance
from .gateway import Reasoner
from .pipeline import (
    ANSWER_TYPES,
    MethodKind,
    PipelineRun,
    baseline_record,
    normalize_answer,
    run_baseline,
    run_prorac,
    run_record,
)
from .query import CLASS_ANSWERS, NO_CHOICE, Choice, QueryKind, Verdict
from .questions import VALIDATION_SEMANTICS, QuestionSpec, evaluate_spec
from .registry import DomainRegistry, bundled

log = logging.getLogger(__name__)

FIELDS = (
    "question_id",
    "domain_name",
    "question_category",
    "answer_type",
    "question",
    "answer",
    "plan_length",
    "initial_state_nl",
    "structured",
)
REQUIRED = ("question_id", "domain_name", "question_category", "answer_type", "question", "answer", "plan_length")

CATEGORY_KINDS = {
    "projection": QueryKind.PROJECTION,
    "effects": QueryKind.PROJECTION,
    "fluent_tracking": QueryKind.PROJECTION,
    "state_tracking": QueryKind.PROJECTION,
    "progression": QueryKind.PROJECTION,
    "executability": QueryKind.EXECUTABILITY,
    "action_executability": QueryKind.EXECUTABILITY,
    "applicability": QueryKind.EXECUTABILITY,
    "plan_verification": QueryKind.PLAN_VERIFICATION,
    "validation": QueryKind.VALIDATION,
}
ANSWER_TYPE_ALIASES = {
    "bool": "bool",
    "boolean": "bool",
    "true_false_answer": "bool",
    "mcq": "mcq",
    "multiple_choice": "mcq",
    "multiple_choice_answer": "mcq",
    "class": "class",
}


@dataclass(frozen=True)
class StructuredBlock:
    init: State
    objects: Mapping[str, str]
    actions: tuple[GroundAction, ...]
    query: frozenset[Literal] = frozenset()
    goal: frozenset[Literal] = frozenset()
    choices: Mapping[str, Choice] = field(default_factory=dict)


@dataclass(frozen=True)
class Instance:
    question_id: str
    domain_name: str
    question_category: str
    answer_type: str
    question: str
    answer: str
    plan_length: int
    initial_state_nl: str | None = None
    structured: StructuredBlock | None = None
    validation_semantics: str = "three_way"
    record: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def kind(self) -> QueryKind | None:
        if self.answer_type == "mcq":
            return None
        return CATEGORY_KINDS[self.question_category]

    @property
    def gold(self) -> str:
        return normalize_answer(self.answer)

    def spec(self) -> QuestionSpec:
        """The question as a structured spec (structured instances only)."""
        sb = self.structured
        if sb is None:
            raise UnauditableInstance(f"{self.question_id} has no structured block")
        if self.kind is None:
            return QuestionSpec(None, choices=sb.choices)
        if self.kind is QueryKind.EXECUTABILITY:
            return QuestionSpec(QueryKind.EXECUTABILITY)
        if self.kind is QueryKind.PROJECTION:
            return QuestionSpec(QueryKind.PROJECTION, sb.query)
        if self.kind is QueryKind.PLAN_VERIFICATION:
            return QuestionSpec(QueryKind.PLAN_VERIFICATION, sb.goal)
        return QuestionSpec(QueryKind.VALIDATION, sb.goal, validation=self.validation_semantics)


# -- loading ------------------------------------------------------------------------

def _lits(d, items, objects) -> frozenset[Literal]:
    if isinstance(items, str):
        return parse_literals_text(items, d, objects)
    return parse_literals_text(" ".join(items), d, objects)


def _structured(raw: Mapping[str, Any], domain_name: str, registry: DomainRegistry) -> StructuredBlock:
    entry = registry.get(domain_name)
    d = entry.domain
    if "problem" in raw:
        if raw["problem"] not in entry.problems:
            raise SchemaError(f"unknown problem {raw['problem']!r} for domain {d.name}")
        p = entry.problems[raw["problem"]]
        init, objects = p.init, dict(p.objects)
    else:
        init_items = raw.get("init")
        if init_items is None:
            raise SchemaError("structured block needs 'init' or 'problem'")
        fluents = [parse_fluent(f) for f in init_items]
        objects = dict(raw.get("objects") or {})
        init = State(fluents)
    action_texts = raw.get("actions", [])
    if not objects:
        # infer from the state and from the action arguments
        loose = [ground_term(d, a) for a in action_texts]
        objects = infer_object_types(d, init, loose)
    for f in init:
        validate_fluent(d, f, objects)
    actions = tuple(ground_term(d, a, objects) for a in action_texts)
    choices = {}
    for letter, opt in sorted((raw.get("choices") or {}).items()):
        if not (isinstance(letter, str) and len(letter) == 1 and letter.isalpha()):
            raise SchemaError(f"choice labels are single letters, got {letter!r}")
        if "applicable" in opt:
            choices[letter.upper()] = Choice(action=ground_term(d, opt["applicable"], objects))
        else:
            choices[letter.upper()] = Choice(literals=_lits(d, opt.get("holds", []), objects))
    return StructuredBlock(
        init=init,
        objects=objects,
        actions=actions,
        query=_lits(d, raw.get("query", []), objects),
        goal=_lits(d, raw.get("goal", []), objects),
        choices=choices,
    )


def parse_instance(rec: Mapping[str, Any], registry: DomainRegistry | None = None) -> Instance:
    registry = registry or bundled()
    if not isinstance(rec, Mapping):
        raise SchemaError("record is not an object")
    missing = [k for k in REQUIRED if k not in rec or rec[k] is None]
    if missing:
        raise SchemaError(f"missing field(s): {', '.join(missing)}")
    answer_type = ANSWER_TYPE_ALIASES.get(str(rec["answer_type"]).lower())
    if answer_type is None:
        raise SchemaError(f"unknown answer_type {rec['answer_type']!r}")
    category = str(rec["question_category"]).lower()
    if category not in CATEGORY_KINDS:
        raise SchemaError(f"unknown question_category {category!r}")
    semantics = rec.get("validation_semantics", "three_way")
    if semantics not in VALIDATION_SEMANTICS:
        raise SchemaError(f"unknown validation_semantics {semantics!r}")
    if category == "validation" and answer_type != "mcq":
        want = "class" if semantics == "three_way" else "bool"
        if answer_type != want:
            raise SchemaError(f"validation with {semantics} semantics needs answer_type {want}")
    elif answer_type == "class":
        raise SchemaError("answer_type class is only for three-way validation")
    gold = normalize_answer(str(rec["answer"]))
    ok = {
        "bool": gold in ("true", "false"),
        "class": gold in CLASS_ANSWERS,
        "mcq": gold == NO_CHOICE or (len(gold) == 1 and gold.isalpha()),
    }[answer_type]
    if not ok:
        raise SchemaError(f"answer {rec['answer']!r} does not fit answer_type {answer_type}")
    try:
        plan_length = int(rec["plan_length"])
    except (TypeError, ValueError):
        raise SchemaError(f"plan_length must be an integer, got {rec['plan_length']!r}") from None
    if rec["domain_name"] not in registry:
        raise SchemaError(f"unknown domain {rec['domain_name']!r}")
    structured = None
    if rec.get("structured") is not None:
        try:
            structured = _structured(rec["structured"], rec["domain_name"], registry)
        except SchemaError:
            raise
        except (RacError, ValueError, TypeError, KeyError) as exc:
            raise SchemaError(f"structured block: {exc}") from None
        if len(structured.actions) != plan_length:
            raise SchemaError(f"plan_length {plan_length} but {len(structured.actions)} actions")
        if answer_type == "mcq" and not structured.choices:
            raise SchemaError("multiple-choice instance without choices")
    return Instance(
        question_id=str(rec["question_id"]),
        domain_name=registry.get(rec["domain_name"]).name,
        question_category=category,
        answer_type=answer_type,
        question=str(rec["question"]),
        answer=str(rec["answer"]),
        plan_length=plan_length,
        initial_state_nl=rec.get("initial_state_nl"),
        structured=structured,
        validation_semantics=semantics,
        record=dict(rec),
    )


def load_instances(path: str | Path, registry: DomainRegistry | None = None) -> list[Instance]:
    """Read a JSONL file; errors name the 1-based record number."""
    out = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        n = 0
        for line in fh:
            if not line.strip():
                continue
            n += 1
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON ({exc.msg})", n) from None
            try:
                inst = parse_instance(rec, registry)
            except SchemaError as exc:
                raise SchemaError(exc.args[0], n) from None
            if inst.question_id in seen:
                raise SchemaError(f"duplicate question_id {inst.question_id}", n)
            seen.add(inst.question_id)
            out.append(inst)
    return out


# -- oracle ---------------------------------------------------------------------------

def oracle_trace(inst: Instance) -> Trace:
    if inst.structured is None:
        raise UnauditableInstance(f"{inst.question_id} has no structured block")
    return progress(inst.structured.init, inst.structured.actions)


def oracle_verdict(inst: Instance) -> Verdict:
    return evaluate_spec(oracle_trace(inst), inst.spec())


# -- scoring -------------------------------------------------------------------------

def accuracy(correct: int, total: int) -> Decimal:
    """Percentage rounded half-up to two decimals."""
    if total == 0:
        return Decimal("0.00")
    return (Decimal(100 * correct) / Decimal(total)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class InstanceResult:
    question_id: str
    domain: str
    task: str
    method: str
    gold: str
    predicted: str | None
    error: str | None = None
    record: Mapping[str, Any] | None = field(default=None, compare=False)

    @property
    def correct(self) -> bool:
        return self.error is None and self.predicted == self.gold


@dataclass(frozen=True)
class Cell:
    correct: int
    incorrect: int
    errors: int

    @property
    def total(self) -> int:
        return self.correct + self.incorrect + self.errors

    @property
    def accuracy(self) -> Decimal:
        return accuracy(self.correct, self.total)


class ResultsTable:
    def __init__(self, results: Iterable[InstanceResult] = ()):
        self.results: tuple[InstanceResult, ...] = tuple(
            sorted(results, key=lambda r: (r.method, r.question_id))
        )

    def __add__(self, other: "ResultsTable") -> "ResultsTable":
        return ResultsTable(self.results + other.results)

    def methods(self) -> list[str]:
        return sorted({r.method for r in self.results})

    def columns(self) -> list[tuple[str, str]]:
        return sorted({(r.domain, r.task) for r in self.results})

    def cells(self) -> dict[tuple[str, str, str], Cell]:
        tally: dict[tuple[str, str, str], list[int]] = {}
        for r in self.results:
            c = tally.setdefault((r.domain, r.task, r.method), [0, 0, 0])
            if r.error is not None:
                c[2] += 1
            elif r.correct:
                c[0] += 1
            else:
                c[1] += 1
        return {k: Cell(*v) for k, v in sorted(tally.items())}

    def cell(self, domain: str, task: str, method: str) -> Cell | None:
        return self.cells().get((domain, task, method))

    def verdicts(self) -> dict[str, str | None]:
        return {f"{r.method}/{r.question_id}": r.predicted for r in self.results}


def emit_table(t: ResultsTable, fmt: str = "markdown") -> str:
    """Methods as rows, ``domain/task`` columns, two-decimal accuracies."""
    cols = t.columns()
    cells = t.cells()
    header = ["method"] + [f"{d}/{task}" for d, task in cols]
    rows = []
    for m in t.methods():
        row = [m]
        for d, task in cols:
            c = cells.get((d, task, m))
            row.append(f"{c.accuracy:.2f}" if c else "")
        rows.append(row)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown table format {fmt!r}")
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(" --- " for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


# -- running -------------------------------------------------------------------------

def run_instance(
    inst: Instance, method: MethodKind, cfg: Config, r: Reasoner, registry: DomainRegistry | None = None
) -> InstanceResult:
    try:
        if method is MethodKind.PRORAC:
            run = run_prorac(inst, cfg, r, registry=registry)
            verdict, record = run.answer, run_record(run, inst)
        else:
            res = run_baseline(inst, method, cfg, r, registry=registry)
            verdict, record = res.verdict, baseline_record(res, method, inst)
    except Exception as exc:  # scored as a method error, never fatal
        stage = getattr(exc, "stage", None)
        msg = f"{type(exc).__name__}: {exc}" + (f" (stage {stage})" if stage else "")
        log.warning("%s on %s: %s", method.value, inst.question_id, msg)
        return InstanceResult(inst.question_id, inst.domain_name, inst.question_category, method.value, inst.gold, None, msg)
    return InstanceResult(
        inst.question_id, inst.domain_name, inst.question_category, method.value,
        inst.gold, normalize_answer(verdict.answer), None, record,
    )


def run_suite(
    instances: Sequence[Instance],
    method: MethodKind,
    cfg: Config,
    r: Reasoner,
    registry: DomainRegistry | None = None,
) -> ResultsTable:
    with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
        results = list(pool.map(lambda inst: run_instance(inst, method, cfg, r, registry), instances))
    return ResultsTable(results)


# -- audit -----------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditEntry:
    question_id: str
    gold: str
    oracle: str
    evidence: Mapping[str, Any]

    @property
    def flagged(self) -> bool:
        return self.gold != self.oracle

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "gold": self.gold,
            "oracle": self.oracle,
            "flagged": self.flagged,
            "evidence": dict(self.evidence),
        }


@dataclass(frozen=True)
class AuditReport:
    entries: tuple[AuditEntry, ...]
    skipped: tuple[str, ...] = ()

    @property
    def flagged(self) -> list[AuditEntry]:
        return [e for e in self.entries if e.flagged]

    def to_json(self) -> dict:
        return {
            "audited": len(self.entries),
            "flagged": len(self.flagged),
            "skipped": list(self.skipped),
            "entries": [e.to_json() for e in self.entries],
        }

    def summary(self) -> str:
        lines = [f"audited {len(self.entries)}, flagged {len(self.flagged)}, skipped {len(self.skipped)}"]
        for e in self.flagged:
            ev = json.dumps(dict(e.evidence), sort_keys=True)
            lines.append(f"FLAG {e.question_id}: gold={e.gold} oracle={e.oracle} evidence={ev}")
        return "\n".join(lines) + "\n"

    def patch(self) -> str:
        """JSONL patch: one line per flagged instance, applied with ``apply_patch``."""
        lines = []
        for e in self.flagged:
            lines.append(json.dumps(
                {"question_id": e.question_id, "field": "answer", "old": e.gold, "new": e.oracle,
                 "evidence": dict(e.evidence)},
                sort_keys=True,
            ))
        return "".join(line + "\n" for line in lines)


def audit_instance(inst: Instance) -> AuditEntry:
    v = oracle_verdict(inst)
    return AuditEntry(inst.question_id, inst.gold, normalize_answer(v.answer), v.evidence)


def audit_labels(instances: Iterable[Instance], strict: bool = False) -> AuditReport:
    """Compare every gold label with the oracle.

    Instances without a structured block are skipped, or raise
    UnauditableInstance when ``strict``.
    """
    entries, skipped = [], []
    for inst in instances:
        if inst.structured is None:
            if strict:
                raise UnauditableInstance(f"{inst.question_id} has no structured block")
            skipped.append(inst.question_id)
            continue
        entries.append(audit_instance(inst))
    entries.sort(key=lambda e: e.question_id)
    return AuditReport(tuple(entries), tuple(sorted(skipped)))


def apply_patch(instances_text: str, patch_text: str) -> str:
    """Rewrite gold answers in a JSONL instance file according to an audit patch."""
    fixes = {}
    for line in patch_text.splitlines():
        if line.strip():
            p = json.loads(line)
            fixes[p["question_id"]] = p
    out = []
    for line in instances_text.splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        fix = fixes.get(str(rec.get("question_id")))
        if fix is not None:
            if normalize_answer(str(rec[fix["field"]])) != fix["old"]:
                raise SchemaError(f"patch for {rec['question_id']} expects {fix['old']!r}")
            new = fix["new"]
            rec[fix["field"]] = new.capitalize() if new in ("true", "false") else new.upper() if len(new) == 1 else new
        out.append(json.dumps(rec, ensure_ascii=False))
    return "".join(line + "\n" for line in out)


# -- error taxonomy ---------------------------------------------------------------

class ErrorLabel(str, enum.Enum):
    FRAME_VIOLATION = "FrameViolation"
    EFFECT_MISS = "EffectMiss"
    QUALIFICATION_ERROR = "QualificationError"
    EXTRACTION_ERROR = "ExtractionError"
    NONE = "None"


def classify_error(run: PipelineRun, oracle: Trace) -> ErrorLabel:
    """Label the first point where a structured run departs from the oracle."""
    if run.mode != "structured" or not run.states:
        raise IncomparableRun("only structured-mode runs can be compared with the oracle")
    if run.states[0] != oracle.initial or tuple(run.actions) != tuple(oracle.actions):
        return ErrorLabel.EXTRACTION_ERROR
    for i, (ok, _) in enumerate(run.step_checks):
        before = run.states[i]
        a = run.actions[i]
        if ok != is_applicable(before, a).applicable:
            return ErrorLabel.QUALIFICATION_ERROR
        if not ok:
            break
        after = run.states[i + 1]
        added, removed = state_diff(before, after)
        if not added <= a.add or not removed <= a.delete:
            return ErrorLabel.FRAME_VIOLATION
        if not a.add <= after.fluents or a.delete & after.fluents:
            return ErrorLabel.EFFECT_MISS
    return ErrorLabel.NONE


__all__ = [
    "Instance",
    "StructuredBlock",
    "load_instances",
    "parse_instance",
    "oracle_trace",
    "oracle_verdict",
    "accuracy",
    "InstanceResult",
    "Cell",
    "ResultsTable",
    "emit_table",
    "run_instance",
    "run_suite",
    "AuditEntry",
    "AuditReport",
    "audit_labels",
    "audit_instance",
    "apply_patch",
    "ErrorLabel",
    "classify_error",
    "ANSWER_TYPES",
]
