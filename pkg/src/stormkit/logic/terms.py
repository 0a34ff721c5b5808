"""Term algebra for the embedded logic engine.

Terms are immutable. Compound terms always have at least one argument;
a zero-argument "compound" is an Atom. Host values wrap opaque Python
objects and unify only when they hold the identical object.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Number:
    value: int | float


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple["Term", ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError("compound terms need at least one argument; use Atom")
        if not isinstance(self.args, tuple):
            object.__setattr__(self, "args", tuple(self.args))


class HostValue:
    """Opaque handle lifted into term space; unifies by handle identity only."""

    __slots__ = ("handle", "tag")

    def __init__(self, handle: object, tag: str = "host"):
        self.handle = handle
        self.tag = tag

    def __eq__(self, other: object) -> bool:
        return isinstance(other, HostValue) and other.handle is self.handle

    def __hash__(self) -> int:
        return hash((HostValue, id(self.handle)))

    def __repr__(self) -> str:
        return f"HostValue({self.tag}:{id(self.handle):#x})"


Term = Union[Variable, Atom, Number, Compound, HostValue]

EMPTY_LIST = Atom("[]")
VOID = Atom("void")
TRUE = Atom("true")
FAIL = Atom("fail")

_fresh_counter = itertools.count(1)


def struct(functor: str, *args: Term) -> Term:
    """Build Compound(functor, args), degrading to Atom for zero args."""
    return Compound(functor, tuple(args)) if args else Atom(functor)


def make_list(items: Iterable[Term], tail: Term = EMPTY_LIST) -> Term:
    """Build a cons-cell list term from Python items."""
    out = tail
    for item in reversed(list(items)):
        out = Compound(".", (item, out))
    return out


def list_items(term: Term) -> list[Term] | None:
    """Return the elements of a proper list term, or None if not one."""
    items: list[Term] = []
    while True:
        if term == EMPTY_LIST:
            return items
        if isinstance(term, Compound) and term.functor == "." and len(term.args) == 2:
            items.append(term.args[0])
            term = term.args[1]
        else:
            return None


def variables(term: Term) -> tuple[Variable, ...]:
    """All distinct variables in term, in first-occurrence order."""
    seen: dict[Variable, None] = {}

    def walk(t: Term) -> None:
        if isinstance(t, Variable):
            seen.setdefault(t, None)
        elif isinstance(t, Compound):
            for a in t.args:
                walk(a)

    walk(term)
    return tuple(seen)


def is_ground(term: Term) -> bool:
    if isinstance(term, Variable):
        return False
    if isinstance(term, Compound):
        return all(is_ground(a) for a in term.args)
    return True


def fresh_variable(hint: str = "G") -> Variable:
    return Variable(f"_{hint}{next(_fresh_counter)}")


def rename_term(term: Term, mapping: dict[Variable, Variable]) -> Term:
    """Rename variables apart, extending mapping with fresh names as needed."""
    if isinstance(term, Variable):
        if term not in mapping:
            mapping[term] = fresh_variable()
        return mapping[term]
    if isinstance(term, Compound):
        return Compound(term.functor, tuple(rename_term(a, mapping) for a in term.args))
    return term


class Substitution(Mapping):
    """An idempotent variable binding map.

    Bindings never map a variable to a term containing it (occurs check),
    so fully resolving a term is a terminating operation and applying a
    substitution twice equals applying it once.
    """

    __slots__ = ("_bindings",)

    def __init__(self, bindings: Mapping[Variable, Term] | None = None):
        self._bindings: dict[Variable, Term] = dict(bindings) if bindings else {}

    # Mapping interface
    def __getitem__(self, var: Variable) -> Term:
        return self._bindings[var]

    def __iter__(self) -> Iterator[Variable]:
        return iter(self._bindings)

    def __len__(self) -> int:
        return len(self._bindings)

    def __repr__(self) -> str:
        inner = ", ".join(f"{v.name}={t}" for v, t in sorted(
            self._bindings.items(), key=lambda kv: kv[0].name))
        return f"{{{inner}}}"

    def walk(self, term: Term) -> Term:
        """Follow variable bindings until an unbound variable or non-variable."""
        while isinstance(term, Variable) and term in self._bindings:
            term = self._bindings[term]
        return term

    def resolve(self, term: Term) -> Term:
        """Fully apply the substitution to term."""
        term = self.walk(term)
        if isinstance(term, Compound):
            return Compound(term.functor, tuple(self.resolve(a) for a in term.args))
        return term

    def bind(self, var: Variable, term: Term) -> "Substitution | None":
        """Extend with var=term, or None if the occurs check fails."""
        if self._occurs(var, term):
            return None
        out = Substitution(self._bindings)
        out._bindings[var] = term
        return out

    def _occurs(self, var: Variable, term: Term) -> bool:
        term = self.walk(term)
        if isinstance(term, Variable):
            return term == var
        if isinstance(term, Compound):
            return any(self._occurs(var, a) for a in term.args)
        return False

    def restrict(self, variables_: Iterable[Variable]) -> "Substitution":
        """Deep-resolved bindings for just the given variables (unbound ones drop out)."""
        out: dict[Variable, Term] = {}
        for v in variables_:
            resolved = self.resolve(v)
            if resolved != v:
                out[v] = resolved
        return Substitution(out)


EMPTY_SUBST = Substitution()


def unify(t1: Term, t2: Term, subst: Substitution = EMPTY_SUBST) -> Substitution | None:
    """Most general unifier extending subst, or None on failure."""
    t1, t2 = subst.walk(t1), subst.walk(t2)
    if isinstance(t1, Variable):
        if t1 == t2:
            return subst
        return subst.bind(t1, t2)
    if isinstance(t2, Variable):
        return subst.bind(t2, t1)
    if isinstance(t1, Atom) and isinstance(t2, Atom):
        return subst if t1.name == t2.name else None
    if isinstance(t1, Number) and isinstance(t2, Number):
        return subst if t1.value == t2.value else None
    if isinstance(t1, HostValue) or isinstance(t2, HostValue):
        return subst if t1 == t2 else None
    if isinstance(t1, Compound) and isinstance(t2, Compound):
        if t1.functor != t2.functor or len(t1.args) != len(t2.args):
            return None
        for a, b in zip(t1.args, t2.args):
            next_subst = unify(a, b, subst)
            if next_subst is None:
                return None
            subst = next_subst
        return subst
    return None


def to_term(value: object) -> Term:
    """Lift a Python value into term space.

    None becomes the atom `void` so skill-result positions stay uniform;
    booleans become true/fail atoms; sequences become list terms.
    """
    if value is None:
        return VOID
    if isinstance(value, (Variable, Atom, Number, Compound, HostValue)):
        return value
    if isinstance(value, bool):
        return TRUE if value else FAIL
    if isinstance(value, (int, float)):
        return Number(value)
    if isinstance(value, str):
        return Atom(value)
    if isinstance(value, (list, tuple)):
        return make_list([to_term(v) for v in value])
    return HostValue(value, tag=type(value).__name__)


def from_term(term: Term) -> object:
    """Lower a term to a plain Python value where one exists.

    Compound terms other than lists pass through unchanged; skills that
    want structure receive the term itself.
    """
    if isinstance(term, Number):
        return term.value
    if isinstance(term, Atom):
        return term.name
    if isinstance(term, HostValue):
        return term.handle
    items = list_items(term) if isinstance(term, Compound) else None
    if items is not None:
        return [from_term(i) for i in items]
    return term
