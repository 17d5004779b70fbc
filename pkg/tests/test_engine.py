import pytest

from raclab.core import Fluent, Literal, State
from raclab.domain import ground_action, ground_term
from raclab.engine import ApplicabilityResult, apply_action, is_applicable, progress
from raclab.errors import NotApplicable


@pytest.fixture()
def bw_init(bw):
    return bw.problems["bw-p01"].init


def test_pickup_then_stack(bw, bw_init):
    t = progress(bw_init, [ground_term(bw.domain, "(pickup a)"), ground_term(bw.domain, "(stack a b)")])
    assert t.executable
    assert len(t.states) == 3
    assert t.final.canonical() == "(clear a) (handempty) (on a b) (ontable b)"


def test_unstack_from_table_fails_at_zero(bw, bw_init):
    t = progress(bw_init, [ground_term(bw.domain, "(unstack a b)")])
    assert t.failure_index == 0
    assert t.states == (bw_init,)
    assert t.checks[0].unsatisfied == {Literal.pos("on", "a", "b")}


def test_progression_halts_at_first_failure(bw, bw_init):
    acts = [ground_term(bw.domain, x) for x in ("(pickup a)", "(pickup b)", "(putdown a)")]
    t = progress(bw_init, acts)
    assert t.failure_index == 1
    assert len(t.states) == 2
    assert len(t.checks) == 2


def test_empty_sequence(bw_init):
    t = progress(bw_init, [])
    assert t.executable and t.states == (bw_init,)


def test_apply_action_raises(bw, bw_init):
    with pytest.raises(NotApplicable) as err:
        apply_action(bw_init, ground_term(bw.domain, "(stack a b)"))
    assert Literal.pos("holding", "a") in err.value.unsatisfied


def test_applicability_result_invariant():
    with pytest.raises(ValueError):
        ApplicabilityResult(True, frozenset({Literal.pos("p")}))
    with pytest.raises(ValueError):
        ApplicabilityResult(False)


def test_negative_precondition():
    from raclab.domain import parse_domain

    d = parse_domain("""(define (domain toggle) (:predicates (on))
      (:action switch-on :parameters () :precondition (not (on)) :effect (on)))""")
    a = ground_action(d, "switch-on", [])
    assert is_applicable(State(), a).applicable
    assert not is_applicable(State([Fluent("on", ())]), a).applicable


def test_trace_report(bw, bw_init):
    t = progress(bw_init, [ground_term(bw.domain, "(pickup a)"), ground_term(bw.domain, "(pickup b)")])
    lines = t.report().splitlines()
    assert lines[0] == bw_init.canonical()
    assert lines[1] == "> action: (pickup a)"
    assert lines[3] == "> action: (pickup b)"
    assert lines[4] == "! failed at 1: (handempty)"


def test_matches_bruteforce_on_fixtures(registry, sequences):
    import bruteforce
    from conftest import domain_source

    for rec in sequences:
        entry = registry.get(rec["domain"])
        problem = entry.problems[rec["problem"]]
        schemas = bruteforce.load_schemas(domain_source(entry.name))
        init = {(f.predicate, *f.args) for f in problem.init}
        states, fail = bruteforce.run(schemas, init, [bruteforce.parse_term(a) for a in rec["actions"]])
        t = progress(problem.init, [ground_term(entry.domain, a, problem.objects) for a in rec["actions"]])
        assert t.failure_index == fail
        assert [{(f.predicate, *f.args) for f in s} for s in t.states] == [set(s) for s in states]
