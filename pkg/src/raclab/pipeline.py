"""The three-stage reasoning pipeline and the prompting baselines it is compared with.

Stage one extracts the initial state, the action sequence and the question
with three extractor calls.  Stage two walks the actions one at a time: an
executability check, then (if the check passes) a progression call that
returns the successor state.  Stage three asks the question against the final
state.  A failed check ends the run without further calls.
"""

from __future__ import annotations

import enum
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Sequence

from .config import Config
from .core import State
from .domain import GroundAction, parse_state_text
from .errors import (
    AnswerParseError,
    ExtractionParseError,
    ParseError,
    PipelineError,
    RacError,
    StateParseError,
    ValidationError,
)
from .gateway import Reasoner, ReasonerRequest, Transcript, call
from .prompts import (
    ANSWER_FORMAT,
    COT_SUFFIX,
    NO_ACTIONS,
    PROGRESS_FORMAT,
    QUERY_PREFIX,
    QUESTION_FORMAT,
    STATE_FORMAT,
    STATE_PREFIX,
    Demonstrations,
    build_demonstrations,
    render_prompt,
    squash,
)
from .query import CLASS_ANSWERS, NO_CHOICE, Verdict
from .registry import DomainRegistry, bundled

log = logging.getLogger(__name__)

ANSWER_TYPES = ("bool", "mcq", "class")

_FINAL_RE = re.compile(r"^[\s*_#>-]*final\s+answer\s*[:：]\s*(.*?)\s*$", re.IGNORECASE | re.MULTILINE)
_MARKDOWN_RE = re.compile(r"^\s*(#{1,6}\s|[-*+]\s|\d+\.\s|```|>\s)|\*\*|__", re.MULTILINE)
_PARAGRAPH_RE = re.compile(r"\n\s*\n")
_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


class MethodKind(str, enum.Enum):
    ZERO_SHOT = "zero_shot"
    ZERO_SHOT_COT = "zero_shot_cot"
    TWO_SHOT_COT = "two_shot_cot"
    SELF_CONSISTENCY = "self_consistency"
    PRORAC = "prorac"

    @classmethod
    def parse(cls, text: str) -> "MethodKind":
        key = re.sub(r"[^a-z0-9]", "", text.lower())
        for m in cls:
            if key == m.value.replace("_", ""):
                return m
        aliases = {"0shot": cls.ZERO_SHOT, "0shotcot": cls.ZERO_SHOT_COT, "2shotcot": cls.TWO_SHOT_COT, "sc": cls.SELF_CONSISTENCY}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown method {text!r}; choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class Extraction:
    init_state_text: str
    action_texts: tuple[str, ...]
    query_text: str
    query_payload: str | None = None
    raw: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "action_texts", tuple(self.action_texts))
        for a in self.action_texts:
            if "," in a:
                raise ValueError(f"action text must be comma-free: {a!r}")

    @property
    def query_block(self) -> str:
        if self.query_payload is None:
            return self.query_text
        return f"{self.query_text}\n{QUERY_PREFIX} {self.query_payload}"


@dataclass
class PipelineRun:
    extraction: Extraction
    step_states: list[str]
    step_checks: list[tuple[bool, str]]
    answer: Verdict
    transcript: Transcript
    mode: str = "structured"
    # parsed forms, structured mode only
    states: tuple[State, ...] = ()
    actions: tuple[GroundAction, ...] = ()

    def __post_init__(self):
        if len(self.step_states) > len(self.extraction.action_texts) + 1:
            raise ValueError("more states than actions allow")
        for i, (ok, _) in enumerate(self.step_checks):
            if not ok and i != len(self.step_checks) - 1:
                raise ValueError("no step may follow a failed check")

    @property
    def failure_index(self) -> int | None:
        for i, (ok, _) in enumerate(self.step_checks):
            if not ok:
                return i
        return None


@dataclass(frozen=True)
class BaselineResult:
    verdict: Verdict
    transcript: Transcript
    samples: tuple[str | None, ...] = ()


@dataclass(frozen=True)
class StepContext:
    """What every reasoner call in one run shares."""

    domain_description: str
    examples: Demonstrations
    cfg: Config
    transcript: Transcript = field(default_factory=Transcript)


# -- response parsing ---------------------------------------------------------------

def normalize_answer(text: str) -> str:
    return re.sub(r"[\s.*`\"']+$", "", re.sub(r"^[\s*`\"']+", "", text)).lower()


def parse_final_answer(text: str, answer_type: str = "bool") -> str:
    """The value on the last ``Final Answer:`` line, normalized for ``answer_type``."""
    matches = _FINAL_RE.findall(text)
    if not matches:
        raise AnswerParseError("response has no 'Final Answer:' line")
    value = normalize_answer(matches[-1])
    if answer_type == "bool":
        m = re.match(r"(true|false)\b", value)
    elif answer_type == "mcq":
        m = re.match(rf"({NO_CHOICE}\b|[a-z](?![a-z0-9]))", value)
    elif answer_type == "class":
        m = re.match(rf"({'|'.join(CLASS_ANSWERS)})\b", value)
    else:
        raise ValueError(f"unknown answer type {answer_type!r}")
    if not m:
        raise AnswerParseError(f"cannot read a {answer_type} answer from {matches[-1]!r}")
    return m.group(1)


def _answer_verdict(answer: str, response: str, **extra) -> Verdict:
    tail = _FINAL_RE.findall(response)[-1].strip()
    return Verdict(answer, {"final_answer": tail, **extra})


def _one_paragraph(text: str, what: str) -> str:
    text = text.strip()
    if not text:
        raise ExtractionParseError(f"{what} extractor returned nothing")
    if _MARKDOWN_RE.search(text):
        raise ExtractionParseError(f"{what} extractor used markdown")
    if _PARAGRAPH_RE.search(text):
        raise ExtractionParseError(f"{what} extractor returned more than one paragraph")
    return text


def _state_line(text: str) -> str | None:
    """Content of the last ``STATE:`` block (the rest of its paragraph)."""
    lines = text.strip().splitlines()
    for i in range(len(lines) - 1, -1, -1):
        if lines[i].lstrip().startswith(STATE_PREFIX):
            block = [lines[i].lstrip()[len(STATE_PREFIX):]]
            for more in lines[i + 1:]:
                if not more.strip():
                    break
                block.append(more)
            return " ".join(" ".join(block).split())
    return None


def split_actions(paragraph: str) -> list[str]:
    paragraph = paragraph.strip()
    if not paragraph or paragraph.lower().rstrip(".") == NO_ACTIONS.lower().rstrip("."):
        return []
    out = []
    for s in _SENTENCE_RE.split(paragraph):
        s = s.strip().rstrip(".!?").strip()
        if not s:
            continue
        if "," in s:
            raise ExtractionParseError(f"action sentence contains a comma: {s!r}")
        out.append(s)
    return out


# -- stages -----------------------------------------------------------------------------

def _ask(ctx: StepContext, r: Reasoner, prompt: str, *, n: int = 1, temperature: float | None = None) -> list[str]:
    req = ReasonerRequest(
        messages=(("user", prompt),),
        model=ctx.cfg.model,
        temperature=ctx.cfg.temperature if temperature is None else temperature,
        max_tokens=ctx.cfg.max_tokens,
        n=n,
    )
    return call(r, req, ctx.transcript)


def extract_elements(
    question_text: str,
    domain_desc: str,
    examples: Demonstrations,
    r: Reasoner,
    *,
    initial_state_text: str | None = None,
    mode: str = "structured",
    cfg: Config | None = None,
    transcript: Transcript | None = None,
) -> Extraction:
    """Three extractor calls: initial state, action sequence, question."""
    ctx = StepContext(domain_desc, examples, cfg or Config(), transcript if transcript is not None else Transcript())
    question = squash(question_text)
    state_source = squash(initial_state_text) if initial_state_text else question

    state_raw = _ask(ctx, r, render_prompt(
        "state_extractor", domain_description=domain_desc, examples=examples.state_extractor,
        question=state_source, format_instructions=STATE_FORMAT[mode],
    ))[0]
    actions_raw = _ask(ctx, r, render_prompt(
        "action_extractor", domain_description=domain_desc, examples=examples.action_extractor, question=question,
    ))[0]
    question_raw = _ask(ctx, r, render_prompt(
        "question_extractor", domain_description=domain_desc, examples=examples.question_extractor,
        question=question, format_instructions=QUESTION_FORMAT[mode],
    ))[0]

    state_par = _one_paragraph(state_raw, "state")
    if mode == "structured":
        init = _state_line(state_par)
        if init is None:
            raise ExtractionParseError(f"state extractor gave no {STATE_PREFIX} line")
    else:
        init = state_par
    actions = split_actions(_one_paragraph(actions_raw, "action"))
    q_par = _one_paragraph(question_raw, "question")
    payload = None
    if mode == "structured":
        lines = q_par.splitlines()
        payload_lines = [ln for ln in lines if ln.strip().startswith(QUERY_PREFIX)]
        if not payload_lines:
            raise ExtractionParseError(f"question extractor gave no {QUERY_PREFIX} line")
        payload = payload_lines[-1].strip()[len(QUERY_PREFIX):].strip()
        q_par = " ".join(ln.strip() for ln in lines if not ln.strip().startswith(QUERY_PREFIX))
    return Extraction(init, tuple(actions), q_par, payload, (state_raw, actions_raw, question_raw))


def check_step_executability(
    state_text: str,
    action_text: str,
    domain_desc: str,
    examples: Demonstrations,
    r: Reasoner,
    *,
    cfg: Config | None = None,
    transcript: Transcript | None = None,
) -> tuple[bool, str]:
    ctx = StepContext(domain_desc, examples, cfg or Config(), transcript if transcript is not None else Transcript())
    text = _ask(ctx, r, render_prompt(
        "check", domain_description=domain_desc, examples=examples.check,
        current_state=state_text, action=_as_sentence(action_text),
    ))[0]
    return parse_final_answer(text, "bool") == "true", text


def progress_step(
    state_text: str,
    action_text: str,
    domain_desc: str,
    examples: Demonstrations,
    mode: str,
    r: Reasoner,
    *,
    domain=None,
    cfg: Config | None = None,
    transcript: Transcript | None = None,
) -> str:
    ctx = StepContext(domain_desc, examples, cfg or Config(), transcript if transcript is not None else Transcript())
    text = _ask(ctx, r, render_prompt(
        "progress", domain_description=domain_desc, examples=examples.progress,
        current_state=state_text, action=_as_sentence(action_text), format_instructions=PROGRESS_FORMAT[mode],
    ))[0]
    if mode == "structured":
        block = _state_line(text)
        if block is None:
            raise StateParseError(f"progression response has no {STATE_PREFIX} block")
        if domain is None:
            return block
        try:
            return parse_state_text(block, domain).canonical()
        except (ParseError, ValidationError) as exc:
            raise StateParseError(f"bad {STATE_PREFIX} block: {exc}") from None
    paragraphs = [p.strip() for p in _PARAGRAPH_RE.split(text.strip()) if p.strip()]
    if not paragraphs:
        raise StateParseError("empty progression response")
    return " ".join(paragraphs[-1].split())


def answer_query(
    final_state_text: str,
    query_text: str,
    domain_desc: str,
    r: Reasoner,
    *,
    answer_type: str = "bool",
    examples: Demonstrations | None = None,
    cfg: Config | None = None,
    transcript: Transcript | None = None,
) -> Verdict:
    ctx = StepContext(domain_desc, examples, cfg or Config(), transcript if transcript is not None else Transcript())
    text = _ask(ctx, r, render_prompt(
        "query", domain_description=domain_desc, examples=examples.query if examples else "",
        current_state=final_state_text, question=query_text, format_instructions=ANSWER_FORMAT[answer_type],
    ))[0]
    return _answer_verdict(parse_final_answer(text, answer_type), text, stage="query")


def _as_sentence(action_text: str) -> str:
    a = action_text.strip()
    return a[:1].upper() + a[1:] + ("" if a.endswith(".") else ".")


def short_circuit_answer(answer_type: str) -> str:
    return {"bool": "false", "class": "invalid", "mcq": NO_CHOICE}[answer_type]


def run_prorac(instance, cfg: Config, r: Reasoner, *, registry: DomainRegistry | None = None) -> PipelineRun:
    """Run the full pipeline on one instance.

    Errors propagate with a ``stage`` attribute (extract, check, progress,
    query) and the partial ``transcript`` attached.
    """
    registry = registry or bundled()
    entry = registry.get(instance.domain_name)
    mode = cfg.pipeline_mode
    examples = build_demonstrations(entry, mode)
    desc = entry.description
    tx = Transcript()
    answer_type = instance.answer_type
    stage = "extract"
    try:
        ext = extract_elements(
            instance.question, desc, examples, r,
            initial_state_text=getattr(instance, "initial_state_nl", None), mode=mode, cfg=cfg, transcript=tx,
        )
        states: list[State] = []
        actions: list[GroundAction] = []
        state = ext.init_state_text
        if mode == "structured":
            try:
                s0 = parse_state_text(state, entry.domain)
                grammar = entry.annotations.grammar
                actions = [grammar.ground(grammar.parse_action(a)) for a in ext.action_texts]
            except (ParseError, ValidationError) as exc:
                raise ExtractionParseError(f"extracted elements do not fit the domain: {exc}") from None
            state = s0.canonical()
            states.append(s0)
        step_states = [state]
        checks: list[tuple[bool, str]] = []
        verdict = None
        for i, action_text in enumerate(ext.action_texts):
            stage = "check"
            ok, why = check_step_executability(state, action_text, desc, examples, r, cfg=cfg, transcript=tx)
            checks.append((ok, why))
            if not ok:
                verdict = Verdict(
                    short_circuit_answer(answer_type),
                    {"failure_index": i, "action": action_text, "stage": "check"},
                )
                break
            stage = "progress"
            state = progress_step(
                state, action_text, desc, examples, mode, r,
                domain=entry.domain if mode == "structured" else None, cfg=cfg, transcript=tx,
            )
            step_states.append(state)
            if mode == "structured":
                states.append(parse_state_text(state, entry.domain))
        if verdict is None:
            stage = "query"
            verdict = answer_query(
                state, ext.query_block, desc, r, answer_type=answer_type, examples=examples, cfg=cfg, transcript=tx,
            )
    except RacError as exc:
        exc.stage = stage
        exc.transcript = tx
        raise
    return PipelineRun(ext, step_states, checks, verdict, tx, mode, tuple(states), tuple(actions))


# -- baselines --------------------------------------------------------------------------

def baseline_prompt(instance, kind: MethodKind, entry, mode: str = "nl") -> str:
    examples = ""
    if kind is MethodKind.TWO_SHOT_COT:
        examples = build_demonstrations(entry, mode).two_shot
    prompt = render_prompt(
        "baseline", domain_description=entry.description, examples=examples,
        current_state=squash(getattr(instance, "initial_state_nl", None) or ""),
        question=squash(instance.question), format_instructions=ANSWER_FORMAT[instance.answer_type],
    )
    if kind in (MethodKind.ZERO_SHOT_COT, MethodKind.SELF_CONSISTENCY):
        prompt = prompt.rstrip() + "\n\n" + COT_SUFFIX + "\n"
    return prompt


def majority_vote(answers: Sequence[str | None]) -> str:
    """Most frequent parsed answer; ties go to the lexicographically smallest."""
    counts = Counter(a for a in answers if a is not None)
    if not counts:
        raise AnswerParseError("no sample contained a readable final answer")
    best = max(counts.values())
    return min(a for a, c in counts.items() if c == best)


def run_baseline(
    instance, kind: MethodKind, cfg: Config, r: Reasoner, *, registry: DomainRegistry | None = None
) -> BaselineResult:
    if kind is MethodKind.PRORAC:
        raise ValueError("use run_prorac for the pipeline")
    registry = registry or bundled()
    entry = registry.get(instance.domain_name)
    tx = Transcript()
    ctx = StepContext(entry.description, build_demonstrations(entry, "nl"), cfg, tx)
    prompt = baseline_prompt(instance, kind, entry)
    if kind is MethodKind.SELF_CONSISTENCY:
        texts = _ask(ctx, r, prompt, n=cfg.sc_samples, temperature=cfg.sc_temperature)
    else:
        texts = _ask(ctx, r, prompt)
    samples: list[str | None] = []
    for t in texts:
        try:
            samples.append(parse_final_answer(t, instance.answer_type))
        except AnswerParseError:
            samples.append(None)
    answer = majority_vote(samples)
    votes = dict(sorted(Counter(s for s in samples if s is not None).items()))
    return BaselineResult(Verdict(answer, {"samples": samples, "votes": votes}), tx, tuple(samples))


# -- run records ------------------------------------------------------------------------

def run_record(run: PipelineRun, instance=None) -> dict[str, Any]:
    """Self-contained description of a pipeline run: inputs, every call, verdict."""
    ext = run.extraction
    steps = []
    for i, (ok, why) in enumerate(run.step_checks):
        steps.append({
            "index": i,
            "action": ext.action_texts[i],
            "executable": ok,
            "rationale": why,
            "state_after": run.step_states[i + 1] if ok and i + 1 < len(run.step_states) else None,
        })
    doc: dict[str, Any] = {"method": MethodKind.PRORAC.value, "mode": run.mode}
    if instance is not None:
        doc["inputs"] = instance_inputs(instance)
    doc.update({
        "extraction": {
            "initial_state": ext.init_state_text,
            "actions": list(ext.action_texts),
            "question": ext.query_text,
            "query_payload": ext.query_payload,
            "raw": list(ext.raw),
        },
        "steps": steps,
        "verdict": run.answer.to_json(),
        "calls": len(run.transcript),
        "total_latency": round(sum(e.latency for e in run.transcript), 6),
        "transcript": run.transcript.to_json(),
    })
    return doc


def baseline_record(res: BaselineResult, kind: MethodKind, instance=None) -> dict[str, Any]:
    doc: dict[str, Any] = {"method": kind.value}
    if instance is not None:
        doc["inputs"] = instance_inputs(instance)
    doc.update({
        "samples": list(res.samples),
        "verdict": res.verdict.to_json(),
        "calls": len(res.transcript),
        "total_latency": round(sum(e.latency for e in res.transcript), 6),
        "transcript": res.transcript.to_json(),
    })
    return doc


def instance_inputs(instance) -> dict[str, Any]:
    return {
        "question_id": instance.question_id,
        "domain_name": instance.domain_name,
        "question": instance.question,
        "initial_state_nl": getattr(instance, "initial_state_nl", None),
        "answer_type": instance.answer_type,
    }


__all__ = [
    "Extraction",
    "PipelineRun",
    "BaselineResult",
    "MethodKind",
    "PipelineError",
    "extract_elements",
    "check_step_executability",
    "progress_step",
    "answer_query",
    "run_prorac",
    "run_baseline",
    "majority_vote",
    "parse_final_answer",
    "run_record",
    "baseline_record",
]
