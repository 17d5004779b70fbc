import pytest

from raclab.core import Fluent, Literal, State
from raclab.domain import (
    ground_action,
    ground_term,
    parse_action_term,
    parse_domain,
    parse_problem,
    parse_state_text,
    render_state_canonical,
)
from raclab.errors import ArityMismatch, ParseError, TypeMismatch, UnknownSchema, ValidationError

BW_P01 = "(define (problem t) (:domain blocksworld) (:objects a b - block) (:init (ontable a) (ontable b) (clear a) (clear b) (handempty)))"


def test_bundled_blocksworld_shape(bw):
    assert len(bw.domain.schemas) == 4
    assert len(bw.domain.predicates) == 5


def test_undeclared_effect_predicate():
    text = """(define (domain d) (:predicates (p ?x))
      (:action a :parameters (?x) :precondition (and (p ?x)) :effect (and (q ?x))))"""
    with pytest.raises(ValidationError) as err:
        parse_domain(text)
    assert err.value.symbol == "q"


def test_empty_domain_text():
    with pytest.raises(ParseError):
        parse_domain("")


def test_parse_error_has_position():
    with pytest.raises(ParseError) as err:
        parse_domain("(define (domain d)\n  (:predicates (p ?x))")
    assert err.value.line >= 1


def test_problem_bw_p01(bw):
    p = bw.problems["bw-p01"]
    assert dict(p.objects) == {"a": "block", "b": "block"}
    assert p.init.canonical() == "(clear a) (clear b) (handempty) (ontable a) (ontable b)"


def test_problem_undeclared_object(bw):
    with pytest.raises(ValidationError):
        parse_problem(BW_P01.replace("(handempty)", "(handempty) (on a c)"), bw.domain)


def test_problem_wrong_domain(bw):
    with pytest.raises(ValidationError):
        parse_problem(BW_P01.replace("(:domain blocksworld)", "(:domain depots)"), bw.domain)


def test_state_text(bw):
    s = parse_state_text("(clear a) (handempty) (ontable a)", bw.domain)
    assert len(s) == 3
    assert parse_state_text("", bw.domain) == State()
    with pytest.raises(ValidationError):
        parse_state_text("(on a)", bw.domain)


def test_state_round_trip(bw):
    for p in bw.problems.values():
        assert parse_state_text(render_state_canonical(p.init), bw.domain) == p.init


def test_ground_pickup(bw):
    a = ground_action(bw.domain, "pickup", ["a"])
    assert a.precondition == {Literal.pos("clear", "a"), Literal.pos("ontable", "a"), Literal.pos("handempty")}
    assert a.add == {Fluent("holding", ("a",))}
    assert a.delete == {Fluent("ontable", ("a",)), Fluent("clear", ("a",)), Fluent("handempty", ())}


def test_grounding_errors(bw, depots):
    with pytest.raises(ArityMismatch):
        ground_action(bw.domain, "pickup", ["a", "b"])
    with pytest.raises(UnknownSchema):
        ground_action(bw.domain, "fly", ["a"])
    objects = depots.problems["depots-p01"].objects
    with pytest.raises(TypeMismatch):
        ground_action(depots.domain, "drive", ["hoist0", "depot0", "depot1"], objects)


def test_grounding_is_stable(bw):
    assert ground_action(bw.domain, "stack", ["a", "b"]) == ground_action(bw.domain, "stack", ["a", "b"])


def test_add_and_delete_disjoint_everywhere(registry):
    for name in registry.names():
        entry = registry.get(name)
        for p in entry.problems.values():
            for a in entry.domain.groundings(p.objects):
                assert not (a.add & a.delete), a.canonical()


def test_action_terms():
    assert parse_action_term("(stack a b)") == ("stack", ("a", "b"))
    assert parse_action_term("stack A b") == ("stack", ("a", "b"))


def test_ground_term_canonical(bw):
    assert ground_term(bw.domain, "stack a b").canonical() == "(stack a b)"
