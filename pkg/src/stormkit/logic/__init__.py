"""Embedded logic engine: terms, clause modules, unification, resolution."""

from .engine import (
    Clause,
    DEFAULT_DEPTH_LIMIT,
    Engine,
    LogicModule,
    MentalState,
    MentalStateView,
    SolveContext,
)
from .parser import parse_goal, parse_program, parse_term, write_term
from .terms import (
    Atom,
    Compound,
    EMPTY_LIST,
    HostValue,
    Number,
    Substitution,
    Term,
    VOID,
    Variable,
    from_term,
    is_ground,
    list_items,
    make_list,
    struct,
    to_term,
    unify,
    variables,
)

PRELUDE = """
% small list library used by demos and tests
member(X, [X | _]).
member(X, [_ | T]) :- member(X, T).
append([], L, L).
append([H | T], L, [H | R]) :- append(T, L, R).
"""


def prelude_clauses() -> list[Clause]:
    return [Clause(h, b) for h, b in parse_program(PRELUDE)]


__all__ = [
    "Atom", "Clause", "Compound", "DEFAULT_DEPTH_LIMIT", "EMPTY_LIST", "Engine",
    "HostValue", "LogicModule", "MentalState", "MentalStateView", "Number",
    "SolveContext", "Substitution", "Term", "VOID", "Variable", "from_term",
    "is_ground", "list_items", "make_list", "parse_goal", "parse_program",
    "parse_term", "prelude_clauses", "struct", "to_term", "unify", "variables",
    "write_term",
]
