"""Regenerate the JSONL fixtures under tests/fixtures from a fixed seed.

Gold labels come from the symbolic oracle, so every generated instance is
consistent; tests inject label flips themselves.  Run from the repository
root: ``python3 scripts/make_fixtures.py``.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from raclab.core import Literal
from raclab.engine import is_applicable, progress
from raclab.nl import render_state_nl
from raclab.prompts import state_clauses
from raclab.query import Choice, QueryKind
from raclab.questions import QuestionSpec, evaluate_spec, render_question
from raclab.registry import bundled

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
SEED = 20240611

APPENDIX_QUESTION = (
    "Given the initial condition, the following actions are planned to be performed: at depot0, hoist0 lifts "
    "crate2 off pallet0, at depot1, hoist1 drops crate2 on pallet1, at distributor0, hoist3 unloads crate0 from "
    "truck0, at distributor2, hoist5 lifts crate0 off pallet5, at distributor2, hoist5 loads crate1 into truck0, "
    "crate1 is lifted from crate0 at distributor2 by hoist5, crate2 is unloaded by hoist1 from truck1 at depot1, "
    "crate3 is loaded by hoist2 into truck2 at depot2, from depot0, truck1 is driven to depot1, from depot2, "
    "truck2 is driven to distributor3, hoist0 loads crate2 into truck1 at depot0, hoist2 lifts crate3 from "
    "pallet2 at depot2, hoist3 drops crate0 on pallet3 at distributor0, hoist5 loads crate0 into truck0 at "
    "distributor2, hoist5 unloads crate1 from truck0 at distributor2, hoist6 drops crate3 on pallet6 at "
    "distributor3, hoist6 unloads crate3 from truck2 at distributor3, truck0 is driven to distributor0 from "
    "distributor2 and truck1 is driven to depot0 from depot1. Is it possible to execute it, True or False?"
)
APPENDIX_INIT = (
    "Crate0 is at distributor2, crate1 is clear of any crates, crate1 is located at distributor2, crate1 is on "
    "crate0, crate2 is clear of any crates, crate3 is clear, crate3 is located at depot2, depot0 is where crate2 "
    "is located, depot1 is where hoist1 is located, depot1 is where pallet1 is located, depot1 is where truck1 is "
    "located, depot2 is where pallet2 is located, depot2 is where truck2 is located, distributor0 is where "
    "pallet3 is located, distributor1 is where pallet4 is located, hoist0 is at depot0, hoist0 is available, "
    "hoist1 is available for work, hoist2 can be found located at depot2, hoist2 is available, hoist3 is "
    "accessible, hoist3 is located at distributor0, hoist4 is accessible, hoist4 is located at distributor1, "
    "hoist5 can be found located at distributor2, hoist5 is available, hoist6 is at distributor3, hoist6 is "
    "available for work, pallet0 can be found located at depot0, pallet0 has crate2 on it, pallet1 is clear, "
    "pallet2 has crate3 on it, pallet3 is clear, pallet4 is clear of any crates, pallet5 has crate0 on it, "
    "pallet5 is at distributor2, pallet6 is at distributor3, pallet6 is clear and truck0 can be found located "
    "at distributor2."
)
APPENDIX_ACTIONS = [
    "(lift hoist0 crate2 pallet0 depot0)",
    "(drop hoist1 crate2 pallet1 depot1)",
    "(unload hoist3 crate0 truck0 distributor0)",
    "(lift hoist5 crate0 pallet5 distributor2)",
    "(load hoist5 crate1 truck0 distributor2)",
    "(lift hoist5 crate1 crate0 distributor2)",
    "(unload hoist1 crate2 truck1 depot1)",
    "(load hoist2 crate3 truck2 depot2)",
    "(drive truck1 depot0 depot1)",
    "(drive truck2 depot2 distributor3)",
    "(load hoist0 crate2 truck1 depot0)",
    "(lift hoist2 crate3 pallet2 depot2)",
    "(drop hoist3 crate0 pallet3 distributor0)",
    "(load hoist5 crate0 truck0 distributor2)",
    "(unload hoist5 crate1 truck0 distributor2)",
    "(drop hoist6 crate3 pallet6 distributor3)",
    "(unload hoist6 crate3 truck2 distributor3)",
    "(drive truck0 distributor2 distributor0)",
    "(drive truck1 depot1 depot0)",
]

PROBLEMS = {
    "blocksworld": ["bw-p01", "bw-p02", "bw-p03"],
    "depots": ["depots-p01"],
    "grippers": ["grippers-p01"],
}


def walk(rng, entry, problem, length, fail_at=None):
    d = entry.domain
    pool = sorted(d.groundings(problem.objects), key=lambda a: a.canonical())
    s = problem.init
    out = []
    for i in range(length):
        if i == fail_at:
            bad = [a for a in pool if not is_applicable(s, a).applicable]
            a = rng.choice(bad)
        else:
            ok = [a for a in pool if is_applicable(s, a).applicable and not a.add <= s.fluents]
            a = rng.choice(ok)
        out.append(a)
        if is_applicable(s, a).applicable:
            s = s.update(a.add, a.delete)
    return out


def pick_literals(rng, entry, problem, final, want_true):
    d = entry.domain
    true_fs = sorted(final.fluents)
    false_fs = [
        f for f in d.all_fluents(problem.objects)
        if f not in final and len(set(f.args)) == len(f.args) and set(f.args) & set(final.objects())
    ]
    n = rng.randint(1, 3)
    lits = []
    for _ in range(n):
        if rng.random() < 0.5 and true_fs:
            lits.append(Literal(rng.choice(true_fs), True))
        else:
            lits.append(Literal(rng.choice(false_fs), False))
    if not want_true:
        if rng.random() < 0.5 and false_fs:
            lits[0] = Literal(rng.choice(false_fs), True)
        else:
            lits[0] = Literal(rng.choice(true_fs), False)
    return frozenset(lits)


def canon(lits):
    return [lit.canonical() for lit in sorted(lits)]


def make(rng, qid, entry, pname, category, answer_type, length, fail_at=None, semantics=None):
    ann = entry.annotations
    problem = entry.problems[pname]
    actions = walk(rng, entry, problem, length, fail_at)
    t = progress(problem.init, actions)
    structured = {"problem": pname, "actions": [a.canonical() for a in actions]}
    if answer_type == "mcq":
        if category == "applicability":
            pool = sorted(entry.domain.groundings(problem.objects), key=lambda a: a.canonical())
            good = [a for a in pool if is_applicable(t.final, a).applicable]
            bad = [a for a in pool if not is_applicable(t.final, a).applicable]
            opts = rng.sample(bad, 2) + ([rng.choice(good)] if good and rng.random() < 0.8 else rng.sample(bad, 1))
            rng.shuffle(opts)
            choices = {letter: Choice(action=a) for letter, a in zip("ABC", opts)}
            structured["choices"] = {k: {"applicable": c.action.canonical()} for k, c in choices.items()}
        else:
            lits = [pick_literals(rng, entry, problem, t.final, rng.random() < 0.4) for _ in range(3)]
            choices = {letter: Choice(literals=q) for letter, q in zip("ABC", lits)}
            structured["choices"] = {k: {"holds": canon(c.literals)} for k, c in choices.items()}
        spec = QuestionSpec(None, choices=choices)
    elif category == "action_executability":
        spec = QuestionSpec(QueryKind.EXECUTABILITY)
    elif category == "projection":
        q = pick_literals(rng, entry, problem, t.final, rng.random() < 0.5)
        spec = QuestionSpec(QueryKind.PROJECTION, q)
        structured["query"] = canon(q)
    else:
        q = pick_literals(rng, entry, problem, t.final, rng.random() < 0.5)
        kind = QueryKind.PLAN_VERIFICATION if category == "plan_verification" else QueryKind.VALIDATION
        spec = QuestionSpec(kind, q, validation=semantics or "three_way")
        structured["goal"] = canon(q)
    verdict = evaluate_spec(t, spec)
    answer = verdict.answer
    if answer in ("true", "false"):
        answer = answer.capitalize()
    init_nl = render_state_nl(problem.init, ann, problem.objects) if rng.random() < 0.5 else state_clauses(problem.init, ann)
    rec = {
        "question_id": qid,
        "domain_name": entry.name,
        "question_category": category,
        "answer_type": answer_type,
        "question": render_question(actions, spec, ann),
        "answer": answer,
        "plan_length": len(actions),
        "initial_state_nl": init_nl,
        "structured": structured,
    }
    if semantics:
        rec["validation_semantics"] = semantics
    return rec


def write(name, records):
    path = OUT / name
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records))
    print(f"wrote {len(records)} records to {path}")


def main():
    reg = bundled()
    rng = random.Random(SEED)
    bw = reg.get("blocksworld")

    plan = [
        ("projection", "bool", 2, None, None),
        ("projection", "bool", 4, None, None),
        ("projection", "bool", 3, 1, None),
        ("action_executability", "bool", 3, None, None),
        ("action_executability", "bool", 4, 2, None),
        ("action_executability", "bool", 1, 0, None),
        ("plan_verification", "bool", 5, None, None),
        ("plan_verification", "bool", 2, None, None),
        ("validation", "class", 3, None, "three_way"),
        ("validation", "class", 4, 3, "three_way"),
        ("applicability", "mcq", 2, None, None),
        ("progression", "mcq", 3, None, None),
    ]
    bw12 = [
        make(rng, f"bw-{i + 1:03d}", bw, PROBLEMS["blocksworld"][i % 3], cat, at, n, fail, sem)
        for i, (cat, at, n, fail, sem) in enumerate(plan)
    ]
    write("bw12.jsonl", bw12)

    mixed_plan = [
        ("blocksworld", "projection", "bool", 0, None, None),
        ("blocksworld", "plan_verification", "bool", 6, None, None),
        ("blocksworld", "validation", "bool", 3, None, "is_plan"),
        ("blocksworld", "validation", "bool", 4, 1, "is_applicable"),
        ("blocksworld", "progression", "mcq", 2, None, None),
        ("blocksworld", "action_executability", "bool", 7, None, None),
        ("blocksworld", "projection", "bool", 5, 4, None),
        ("depots", "projection", "bool", 4, None, None),
        ("depots", "action_executability", "bool", 5, 2, None),
        ("depots", "action_executability", "bool", 6, None, None),
        ("depots", "plan_verification", "bool", 3, None, None),
        ("depots", "validation", "class", 4, None, "three_way"),
        ("depots", "applicability", "mcq", 3, None, None),
        ("depots", "projection", "bool", 0, None, None),
        ("grippers", "projection", "bool", 5, None, None),
        ("grippers", "action_executability", "bool", 4, 3, None),
        ("grippers", "plan_verification", "bool", 6, None, None),
        ("grippers", "validation", "class", 5, 2, "three_way"),
        ("grippers", "progression", "mcq", 4, None, None),
        ("grippers", "applicability", "mcq", 2, None, None),
    ]
    mixed = []
    for i, (dom, cat, at, n, fail, sem) in enumerate(mixed_plan):
        entry = reg.get(dom)
        pname = PROBLEMS[dom][i % len(PROBLEMS[dom])]
        mixed.append(make(rng, f"mix-{i + 1:03d}", entry, pname, cat, at, n, fail, sem))
    write("mixed20.jsonl", mixed)

    write("depots_mislabeled.jsonl", [{
        "question_id": "d9f288db-6871-4608-be0a-0a6408599ee7",
        "domain_name": "depots",
        "instance_id": "Instance_3",
        "question_category": "action_executability",
        "question_name": "iter_1_question_1",
        "fluent_type": "all_fluents",
        "answer_type": "true_false_answer",
        "question": APPENDIX_QUESTION,
        "answer": "True",
        "plan_length": 19,
        "initial_state_nl": APPENDIX_INIT,
        "structured": {"problem": "depots-p02", "actions": APPENDIX_ACTIONS},
    }])

    seqs = []
    for dom, pnames in sorted(PROBLEMS.items()):
        entry = reg.get(dom)
        for j in range(25):
            pname = pnames[j % len(pnames)]
            length = j if j < 20 else rng.randint(0, 19)
            fail = rng.randrange(length) if length and rng.random() < 0.3 else None
            acts = walk(rng, entry, entry.problems[pname], length, fail)
            seqs.append({"domain": dom, "problem": pname, "actions": [a.canonical() for a in acts]})
    write("sequences.jsonl", seqs)


if __name__ == "__main__":
    main()
