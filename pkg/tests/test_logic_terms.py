import pytest
from hypothesis import given, strategies as st

from stormkit.logic import (
    Atom, Compound, HostValue, Number, Substitution, Variable,
    from_term, list_items, make_list, to_term, unify, variables,
)

atoms = st.sampled_from("abcdef").map(Atom)
numbers = st.integers(-5, 5).map(Number)
vars_ = st.sampled_from("XYZUVW").map(Variable)
terms = st.recursive(
    atoms | numbers | vars_,
    lambda children: st.builds(
        Compound,
        st.sampled_from("fgh"),
        st.lists(children, min_size=1, max_size=3).map(tuple),
    ),
    max_leaves=12,
)


def test_identical_atoms_unify_to_empty():
    assert unify(Atom("a"), Atom("a")) == Substitution()
    assert unify(Atom("a"), Atom("b")) is None


def test_structural_match_forces_bindings():
    lhs = Compound("location", (Compound("box", (Variable("B"),)), Variable("X"), Variable("Y")))
    rhs = Compound("location", (Compound("box", (Number(7),)), Number(2), Number(3)))
    subst = unify(lhs, rhs)
    assert subst is not None
    assert subst.resolve(Variable("B")) == Number(7)
    assert subst.resolve(Variable("X")) == Number(2)
    assert subst.resolve(Variable("Y")) == Number(3)


def test_occurs_check_rejects_cyclic_binding():
    x = Variable("X")
    assert unify(x, Compound("f", (x,))) is None


def test_host_values_unify_by_identity_only():
    payload = object()
    a, b = HostValue(payload), HostValue(payload)
    c = HostValue(object())
    assert unify(a, b) is not None
    assert unify(a, c) is None
    assert unify(a, Atom("a")) is None


def test_compound_requires_args():
    with pytest.raises(ValueError):
        Compound("f", ())


@given(terms, terms)
def test_unify_is_symmetric_and_agrees(t1, t2):
    s12 = unify(t1, t2)
    s21 = unify(t2, t1)
    assert (s12 is None) == (s21 is None)
    if s12 is not None:
        assert s12.resolve(t1) == s12.resolve(t2)
        assert s21.resolve(t1) == s21.resolve(t2)


@given(terms, terms)
def test_substitution_application_is_idempotent(t1, t2):
    subst = unify(t1, t2)
    if subst is not None:
        once = subst.resolve(t1)
        assert subst.resolve(once) == once


@given(terms, terms, terms)
def test_unifier_extends_existing_substitution(t1, t2, t3):
    base = unify(t2, t3)
    if base is None:
        return
    extended = unify(t1, t2, base)
    if extended is not None:
        for var in base:
            assert extended.resolve(var) == extended.resolve(base[var])


def test_list_roundtrip_and_lowering():
    lst = make_list([Number(1), Atom("b"), Number(3)])
    assert list_items(lst) == [Number(1), Atom("b"), Number(3)]
    assert from_term(lst) == [1, "b", 3]
    assert to_term([1, "b", 3]) == lst


def test_lifting_none_gives_void_atom():
    assert to_term(None) == Atom("void")
    assert to_term(True) == Atom("true")
    assert to_term(2.5) == Number(2.5)


def test_variables_in_first_occurrence_order():
    term = Compound("f", (Variable("Y"), Compound("g", (Variable("X"), Variable("Y")))))
    assert variables(term) == (Variable("Y"), Variable("X"))
