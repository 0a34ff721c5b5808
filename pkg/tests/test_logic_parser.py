import pytest
from hypothesis import given, strategies as st

from stormkit.errors import ParseError
from stormkit.logic import (
    Atom, Compound, EMPTY_LIST, Number, Variable,
    make_list, parse_goal, parse_program, parse_term, write_term,
)


def test_parses_facts_and_rules_in_order():
    clauses = parse_program("""
        % a fact base
        location(box(7), 2, 3).
        near(X) :- location(box(_), X, _).  # trailing comment
    """)
    assert len(clauses) == 2
    head, body = clauses[0]
    assert head == Compound("location", (Compound("box", (Number(7),)), Number(2), Number(3)))
    assert body == ()
    head, body = clauses[1]
    assert head == Compound("near", (Variable("X"),))
    assert len(body) == 1


def test_situation_clause_shape():
    clauses = parse_program("""
        situation(boxInFront, Box) :-
            location(box(Box), X, Y),
            newInstance(point, [X, Y], Front),
            baseObject(Base),
            send(Base, nextLocation, [], Front).
    """)
    (head, body), = clauses
    assert head == Compound("situation", (Atom("boxInFront"), Variable("Box")))
    assert [g.functor for g in body] == ["location", "newInstance", "baseObject", "send"]


def test_quoted_atoms_and_escapes():
    term = parse_term("'hello world'")
    assert term == Atom("hello world")
    assert parse_term(write_term(term)) == term
    tricky = Atom("it's a \\ test")
    assert parse_term(write_term(tricky)) == tricky


def test_lists_with_tails():
    term = parse_term("[1, 2 | T]")
    assert term == make_list([Number(1), Number(2)], Variable("T"))
    assert parse_term("[]") == EMPTY_LIST
    assert write_term(parse_term("[a, b, c]")) == "[a, b, c]"


def test_operator_precedence():
    term = parse_term("X is 2 + 3 * 4")
    assert term == Compound("is", (
        Variable("X"),
        Compound("+", (Number(2), Compound("*", (Number(3), Number(4))))),
    ))


def test_comparison_operators_parse():
    assert parse_term("X < 3").functor == "<"
    assert parse_term("X =:= Y").functor == "=:="
    assert parse_term("X =< -2") == Compound("=<", (Variable("X"), Number(-2)))


def test_anonymous_variables_are_distinct():
    term = parse_term("f(_, _)")
    assert term.args[0] != term.args[1]


def test_goal_conjunction():
    goals = parse_goal("location(box(B), X, Y), X < 5")
    assert len(goals) == 2


def test_parenthesized_conjunction_builds_pair():
    term = parse_term("not((a, b))")
    inner = term.args[0]
    assert inner == Compound(",", (Atom("a"), Atom("b")))


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_program("location(box(7), 2, 3)")  # missing final dot
    with pytest.raises(ParseError):
        parse_term("'unterminated")
    with pytest.raises(ParseError):
        parse_program("123 :- a.")


atoms = st.sampled_from(["a", "b", "hello world", "it's", "x_1"]).map(Atom)
numbers = (st.integers(-99, 99) | st.floats(-5, 5, allow_nan=False).map(lambda f: round(f, 3))).map(Number)
vars_ = st.sampled_from(["X", "Y", "Long_name", "_V"]).map(Variable)
terms = st.recursive(
    atoms | numbers | vars_,
    lambda ch: st.builds(Compound, st.sampled_from(["f", "g", "weird functor", "."]),
                         st.lists(ch, min_size=1, max_size=3).map(tuple)),
    max_leaves=10,
)


@given(terms)
def test_write_parse_roundtrip(term):
    assert parse_term(write_term(term)) == term
