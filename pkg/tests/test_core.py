import pytest

from raclab.core import (
    Fluent,
    Literal,
    State,
    literal_holds,
    normalize_name,
    parse_fluent,
    parse_literal,
    state_diff,
)
from raclab.errors import InvalidName, ParseError


@pytest.mark.parametrize("raw, expected", [("Crate0", "crate0"), ("  Hoist1 ", "hoist1"), ("a-b_c", "a-b_c")])
def test_normalize_name(raw, expected):
    assert normalize_name(raw) == expected


@pytest.mark.parametrize("raw", ["two words", "", "   ", "0abc", "a.b", "(x)"])
def test_normalize_name_rejects(raw):
    with pytest.raises(InvalidName):
        normalize_name(raw)


def test_fluent_canonical_forms():
    assert Fluent("On", ("A", "b")).canonical() == "(on a b)"
    assert Fluent("handempty", ()).canonical() == "(handempty)"
    assert Literal.neg("on", "a", "b").canonical() == "(not (on a b))"


def test_literal_holds_closed_world():
    s = State([Fluent("clear", ("a",))])
    assert literal_holds(s, Literal.pos("clear", "a"))
    assert not literal_holds(s, Literal.neg("clear", "a"))
    assert literal_holds(State(), Literal.neg("on", "a", "b"))


def test_negation_is_an_involution():
    lit = Literal.pos("on", "a", "b")
    assert lit.negate().negate() == lit
    assert lit.negate() != lit


def test_state_is_a_set():
    f = Fluent("clear", ("a",))
    assert State([f, f]) == State([f])
    assert len(State([f, f])) == 1
    assert State([Fluent("b", ()), f]).canonical() == "(b) (clear a)"


def test_state_diff_examples():
    a = State([Fluent("x", ())])
    assert state_diff(a, a) == (frozenset(), frozenset())
    before = State([Fluent("ontable", ("a",))])
    after = State([Fluent("holding", ("a",))])
    assert state_diff(before, after) == ({Fluent("holding", ("a",))}, {Fluent("ontable", ("a",))})
    x = Fluent("x", ())
    assert state_diff(State(), State([x])) == ({x}, frozenset())


def test_update_deletes_before_adding():
    f = Fluent("at", ("t", "d"))
    assert f in State([f]).update(add=[f], remove=[f])


def test_parse_fluent_and_literal():
    assert parse_fluent("(On A B)") == Fluent("on", ("a", "b"))
    assert parse_literal("(not (clear a))") == Literal.neg("clear", "a")
    with pytest.raises(ParseError):
        parse_fluent("(on a")
    with pytest.raises(ParseError):
        parse_fluent("")
