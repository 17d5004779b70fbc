"""Command-line entry point: ``raclab <subcommand> ...``.

Exit status is 0 on success, 1 when the command ran but found failures
(inapplicable action, flagged labels, per-instance errors) and 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

from .config import Config, load_config
from .domain import Problem, ground_term, parse_domain, parse_problem
from .engine import is_applicable, progress
from .errors import RacError, ReasonerError
from .gateway import CachingReasoner, LiveReasoner, Reasoner
from .harness import audit_labels, emit_table, load_instances, run_suite
from .mock import SymbolicMockReasoner
from .nl import load_annotations
from .pipeline import MethodKind, baseline_prompt, run_prorac
from .query import Query, QueryKind, eval_choice, evaluate
from .questions import parse_query_structured
from .registry import DomainEntry, DomainRegistry, bundled

log = logging.getLogger("raclab")

ReasonerFactory = Callable[[Config, DomainRegistry], Reasoner]


class UsageError(Exception):
    pass


def build_reasoner(cfg: Config, registry: DomainRegistry) -> Reasoner:
    """The reasoner selected by ``cfg.mode``."""
    if cfg.mode == "mock":
        return SymbolicMockReasoner(registry)
    if cfg.mode == "live":
        if not cfg.api_key():
            raise UsageError(f"mode live needs an API key in ${cfg.api_key_env}")
        return LiveReasoner(cfg)
    if not cfg.cache_dir:
        raise UsageError(f"mode {cfg.mode} needs --cache-dir")
    if cfg.mode == "replay":
        return CachingReasoner(cfg.cache_dir, "replay")
    if cfg.record_backend == "mock":
        inner: Reasoner = SymbolicMockReasoner(registry)
    else:
        if not cfg.api_key():
            raise UsageError(f"recording from the live backend needs an API key in ${cfg.api_key_env}")
        inner = LiveReasoner(cfg)
    return CachingReasoner(cfg.cache_dir, "record", inner)


# -- argument handling ---------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="raclab", description="Reasoning about actions: oracle, pipeline and benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    def domain_args(sp):
        sp.add_argument("-d", "--domain", required=True, help="bundled domain name or path to a domain file")
        sp.add_argument("--annotations", help="annotation sidecar (defaults to the bundled one or annotations.json next to the domain)")
        sp.add_argument("-p", "--problem", required=True, help="bundled problem name or path to a problem file")

    sp = sub.add_parser("progress", help="print the trace of an action sequence")
    domain_args(sp)
    sp.add_argument("-a", "--actions", default="", help='comma-separated action terms, e.g. "pickup a, stack a b"')

    sp = sub.add_parser("check", help="applicability of one action in the initial state")
    domain_args(sp)
    sp.add_argument("-a", "--actions", required=True, help="a single action term")

    sp = sub.add_parser("answer", help="evaluate a query after an action sequence")
    domain_args(sp)
    sp.add_argument("-a", "--actions", default="")
    sp.add_argument("-q", "--query", default="holds", help='"holds <literals>" or "choose A: ...; B: ..."')
    sp.add_argument("--kind", choices=[k.value for k in QueryKind], default=None,
                    help="how to read the literals of a holds query (default projection)")

    def bench_args(sp, method=True):
        sp.add_argument("-i", "--instances", required=True, help="JSONL instance file")
        if method:
            sp.add_argument("--method", default="prorac", help="prorac, zero_shot, zero_shot_cot, two_shot_cot or self_consistency")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--mode", choices=["live", "record", "replay", "mock"])
        sp.add_argument("--cache-dir")
        sp.add_argument("--record-backend", choices=["live", "mock"])
        sp.add_argument("--pipeline-mode", choices=["structured", "nl"])
        sp.add_argument("--parallelism", type=int)
        sp.add_argument("--model")
        sp.add_argument("--base-url")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("run-bench", help="run a method over instances and print the accuracy table")
    bench_args(sp)
    sp.add_argument("--format", choices=["markdown", "csv"], default="markdown")

    sp = sub.add_parser("audit", help="compare gold labels with the oracle")
    bench_args(sp, method=False)

    sp = sub.add_parser("render-prompts", help="print every prompt an instance would produce, without calling a reasoner")
    bench_args(sp)
    sp.add_argument("--question-id", help="only this instance")
    return p


def _entry(args) -> tuple[DomainEntry, Problem]:
    reg = bundled()
    path = Path(args.domain)
    if path.is_file():
        d = parse_domain(path.read_text())
        ann_path = Path(args.annotations) if args.annotations else path.with_name("annotations.json")
        if not ann_path.is_file():
            raise UsageError(f"no annotations found at {ann_path}")
        entry = DomainEntry(d, load_annotations(ann_path.read_text(), d), {})
    else:
        entry = reg.get(args.domain)
        if args.annotations:
            entry = DomainEntry(entry.domain, load_annotations(Path(args.annotations).read_text(), entry.domain), entry.problems)
    ppath = Path(args.problem)
    if ppath.is_file():
        problem = parse_problem(ppath.read_text(), entry.domain)
    elif args.problem in entry.problems:
        problem = entry.problems[args.problem]
    else:
        raise UsageError(f"unknown problem {args.problem!r}")
    return entry, problem


def _actions(entry: DomainEntry, problem: Problem, text: str):
    terms = [t.strip() for t in text.split(",") if t.strip()]
    return [ground_term(entry.domain, t, problem.objects) for t in terms]


def _config(args) -> Config:
    overrides = {
        "mode": args.mode,
        "cache_dir": args.cache_dir,
        "record_backend": args.record_backend,
        "pipeline_mode": args.pipeline_mode,
        "parallelism": args.parallelism,
        "model": args.model,
        "base_url": args.base_url,
    }
    try:
        return load_config(args.config, **overrides)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def _method(args) -> MethodKind:
    try:
        return MethodKind.parse(args.method)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- subcommands ------------------------------------------------------------------------

def cmd_progress(args, out) -> int:
    entry, problem = _entry(args)
    t = progress(problem.init, _actions(entry, problem, args.actions))
    out.write(t.report())
    return 0


def cmd_check(args, out) -> int:
    entry, problem = _entry(args)
    acts = _actions(entry, problem, args.actions)
    if len(acts) != 1:
        raise UsageError("check takes exactly one action")
    res = is_applicable(problem.init, acts[0])
    if res.applicable:
        out.write(f"applicable: {acts[0].canonical()}\n")
        return 0
    lits = " ".join(sorted(lit.canonical() for lit in res.unsatisfied))
    out.write(f"not applicable: {acts[0].canonical()}\nunsatisfied: {lits}\n")
    return 1


def cmd_answer(args, out) -> int:
    entry, problem = _entry(args)
    t = progress(problem.init, _actions(entry, problem, args.actions))
    kind = QueryKind(args.kind) if args.kind else None
    if kind is QueryKind.EXECUTABILITY:
        v = evaluate(Query(kind), t)
    elif args.query.strip().startswith("choose"):
        spec = parse_query_structured(args.query, entry.domain, problem.objects)
        v = eval_choice(t, spec.choices)
    else:
        spec = parse_query_structured(args.query, entry.domain, problem.objects)
        v = evaluate(Query(kind or QueryKind.PROJECTION, spec.literals), t)
    out.write(json.dumps(v.to_json(), sort_keys=True) + "\n")
    return 0


def cmd_run_bench(args, out, factory: ReasonerFactory) -> int:
    cfg = _config(args)
    method = _method(args)
    registry = bundled()
    instances = load_instances(args.instances, registry)
    r = factory(cfg, registry)
    table = run_suite(instances, method, cfg, r, registry)
    text = emit_table(table, args.format)
    out.write(text)
    if args.out:
        d = Path(args.out)
        (d / "runs").mkdir(parents=True, exist_ok=True)
        (d / "table.md").write_text(emit_table(table, "markdown"))
        (d / "table.csv").write_text(emit_table(table, "csv"))
        for res in table.results:
            doc = {
                "question_id": res.question_id,
                "method": res.method,
                "gold": res.gold,
                "predicted": res.predicted,
                "correct": res.correct,
                "error": res.error,
                "record": res.record,
            }
            name = f"{res.method}__{_safe(res.question_id)}.json"
            (d / "runs" / name).write_text(json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n")
    return 1 if any(res.error for res in table.results) else 0


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def cmd_audit(args, out) -> int:
    instances = load_instances(args.instances, bundled())
    report = audit_labels(instances)
    out.write(report.summary())
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "audit.json").write_text(json.dumps(report.to_json(), indent=1, sort_keys=True) + "\n")
        (d / "audit.patch.jsonl").write_text(report.patch())
    return 1 if report.flagged else 0


def cmd_render_prompts(args, out) -> int:
    """Prompts of every stage; per-step prompts are filled in with oracle states."""
    cfg = _config(args)
    method = _method(args)
    registry = bundled()
    instances = load_instances(args.instances, registry)
    if args.question_id:
        instances = [i for i in instances if i.question_id == args.question_id]
        if not instances:
            raise UsageError(f"no instance {args.question_id!r}")
    for inst in instances:
        out.write(f"=== {inst.question_id} [{method.value}]\n")
        if method is not MethodKind.PRORAC:
            out.write(baseline_prompt(inst, method, registry.get(inst.domain_name)))
            continue
        filler = _PromptCollector(SymbolicMockReasoner(registry))
        try:
            run_prorac(inst, cfg.with_overrides(mode="mock"), filler, registry=registry)
        except RacError as exc:
            out.write(f"(stopped at stage {getattr(exc, 'stage', '?')}: {exc})\n")
        for n, prompt in enumerate(filler.prompts, 1):
            out.write(f"--- prompt {n}\n{prompt}")
    return 0


class _PromptCollector(Reasoner):
    def __init__(self, inner: Reasoner):
        self.inner = inner
        self.prompts: list[str] = []

    def complete_traced(self, req):
        self.prompts.append(req.prompt)
        return self.inner.complete_traced(req)


def main(argv: Sequence[str] | None = None, reasoner_factory: ReasonerFactory | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    factory = reasoner_factory or build_reasoner
    try:
        if args.command == "progress":
            return cmd_progress(args, out)
        if args.command == "check":
            return cmd_check(args, out)
        if args.command == "answer":
            return cmd_answer(args, out)
        if args.command == "run-bench":
            return cmd_run_bench(args, out, factory)
        if args.command == "audit":
            return cmd_audit(args, out)
        return cmd_render_prompts(args, out)
    except UsageError as exc:
        print(f"raclab: {exc}", file=sys.stderr)
        return 2
    except (RacError, OSError) as exc:
        if isinstance(exc, ReasonerError):
            print(f"raclab: reasoner error: {exc}", file=sys.stderr)
        else:
            print(f"raclab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
