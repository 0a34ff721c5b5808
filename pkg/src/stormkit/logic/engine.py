"""Clause storage and SLD resolution.

The engine is a pure evaluator over a mental-state snapshot: resolution
picks the leftmost goal and tries clauses in module order, then clause
order, streaming one substitution per solution. A per-branch depth budget
bounds every derivation, so queries always terminate (deep branches are
pruned silently).

Goals whose functor matches a registered built-in name are executed by
the built-in (wrong arity raises UnknownBuiltin). Goals defined by no
clause and no built-in simply fail, which keeps queries over not-yet-
populated belief modules quiet.
"""

from __future__ import annotations

import threading
from collections.abc import Callable, Iterable, Iterator, Mapping
from dataclasses import dataclass, field

from ..errors import LogicError, NoAgentContext, UnknownBuiltin, UnknownConstructor
from .parser import parse_goal, parse_program, write_term
from .terms import (
    Atom,
    Compound,
    HostValue,
    Number,
    Substitution,
    Term,
    Variable,
    list_items,
    rename_term,
    unify,
    variables,
)

DEFAULT_DEPTH_LIMIT = 512


@dataclass(frozen=True)
class Clause:
    head: Term
    body: tuple[Term, ...] = ()

    def __post_init__(self):
        if isinstance(self.head, (Variable, Number, HostValue)):
            raise LogicError(f"clause head must be an atom or compound: {self.head}")

    @property
    def is_fact(self) -> bool:
        return not self.body

    def rename(self) -> "Clause":
        mapping: dict[Variable, Variable] = {}
        head = rename_term(self.head, mapping)
        body = tuple(rename_term(g, mapping) for g in self.body)
        return Clause(head, body)

    def __str__(self) -> str:
        if self.is_fact:
            return f"{write_term(self.head)}."
        return f"{write_term(self.head)} :- " + ", ".join(write_term(g) for g in self.body) + "."


def _indicator(term: Term) -> tuple[str, int]:
    if isinstance(term, Atom):
        return term.name, 0
    if isinstance(term, Compound):
        return term.functor, len(term.args)
    raise LogicError(f"not a callable term: {term}")


class LogicModule:
    """A named, ordered clause list; order determines solution order."""

    def __init__(self, name: str, clauses: Iterable[Clause] = ()):
        self.name = name
        self.clauses: list[Clause] = list(clauses)

    def assertz(self, clause: Clause) -> None:
        self.clauses.append(clause)

    def retract_first(self, pattern: Term) -> bool:
        for i, clause in enumerate(self.clauses):
            if unify(pattern, clause.rename().head) is not None:
                del self.clauses[i]
                return True
        return False

    def __len__(self) -> int:
        return len(self.clauses)


class MentalStateView(Mapping):
    """Immutable snapshot of a mental state, safe to solve against."""

    def __init__(self, modules: dict[str, tuple[Clause, ...]]):
        self._modules = modules

    def __getitem__(self, name: str) -> tuple[Clause, ...]:
        return self._modules[name]

    def __iter__(self):
        return iter(self._modules)

    def __len__(self):
        return len(self._modules)

    def with_module(self, name: str, clauses: Iterable[Clause]) -> "MentalStateView":
        merged = dict(self._modules)
        merged[name] = tuple(clauses)
        return MentalStateView(merged)

    def defines(self, functor: str, arity: int) -> bool:
        for clauses in self._modules.values():
            for clause in clauses:
                if _indicator(clause.head) == (functor, arity):
                    return True
        return False


ChangeObserver = Callable[[str, str, Term], None]

CORE_MODULES = ("beliefs", "situations", "goals")


class MentalState:
    """Named logic modules with serialized writes and snapshot reads."""

    def __init__(self, modules: Iterable[str] = CORE_MODULES):
        self._lock = threading.Lock()
        self._modules: dict[str, LogicModule] = {name: LogicModule(name) for name in modules}
        self._observers: list[ChangeObserver] = []

    def observe(self, fn: ChangeObserver) -> None:
        self._observers.append(fn)

    def _notify(self, module: str, kind: str, term: Term) -> None:
        for fn in self._observers:
            fn(module, kind, term)

    @property
    def module_names(self) -> tuple[str, ...]:
        return tuple(self._modules)

    def add_module(self, name: str, clauses: Iterable[Clause] = ()) -> None:
        with self._lock:
            if name in self._modules:
                self._modules[name].clauses.extend(clauses)
            else:
                self._modules[name] = LogicModule(name, clauses)

    def load_text(self, module: str, text: str) -> int:
        """Parse clause text into a module; returns the clause count loaded."""
        clauses = [Clause(h, b) for h, b in parse_program(text)]
        self.add_module(module, clauses)
        return len(clauses)

    def assert_clause(self, module: str, clause: Clause | Term) -> None:
        if not isinstance(clause, Clause):
            clause = Clause(clause)
        with self._lock:
            self._modules[module].assertz(clause)
        self._notify(module, "assert", clause.head)

    def retract_clause(self, module: str, pattern: Term) -> bool:
        with self._lock:
            removed = self._modules[module].retract_first(pattern)
        if removed:
            self._notify(module, "retract", pattern)
        return removed

    def snapshot(self) -> MentalStateView:
        with self._lock:
            return MentalStateView({name: tuple(m.clauses) for name, m in self._modules.items()})


# --- built-in goals ---


@dataclass
class SolveContext:
    """Host bridge handed to built-ins during resolution."""

    constructors: dict[str, Callable] = field(default_factory=dict)
    skill_caller: Callable[[object, str, list[Term]], Term] | None = None
    holder_resolver: Callable[[str], object | None] | None = None
    agent_base: object | None = None


MAX_NOT_NESTING = 128  # bounds Python stack growth through nested negation


@dataclass
class _Call:
    """One built-in invocation: the host bridge plus a subquery hook."""

    engine: "Engine"
    view: MentalStateView
    order: tuple[str, ...]
    depth: int
    ctx: SolveContext
    not_depth: int = 0

    def solutions(self, goal: Term, subst: Substitution) -> Iterator[Substitution]:
        return self.engine._stream((goal,), subst, self.depth, self.view, self.order,
                                   self.not_depth + 1)


# A built-in receives its (unresolved) argument terms plus the current
# substitution and yields zero or more extended substitutions.
BuiltinFn = Callable[[tuple[Term, ...], Substitution, _Call], Iterable[Substitution]]


def _eval_arith(term: Term, subst: Substitution) -> int | float:
    term = subst.walk(term)
    if isinstance(term, Number):
        return term.value
    if isinstance(term, Variable):
        raise LogicError("unbound variable in arithmetic expression")
    if isinstance(term, Compound):
        args = [_eval_arith(a, subst) for a in term.args]
        f, n = term.functor, len(args)
        if (f, n) == ("+", 2):
            return args[0] + args[1]
        if (f, n) == ("-", 2):
            return args[0] - args[1]
        if (f, n) == ("-", 1):
            return -args[0]
        if (f, n) == ("*", 2):
            return args[0] * args[1]
        if (f, n) == ("/", 2):
            if args[1] == 0:
                raise LogicError("division by zero")
            q = args[0] / args[1]
            return int(q) if isinstance(args[0], int) and isinstance(args[1], int) and q == int(q) else q
        if (f, n) == ("mod", 2):
            return args[0] % args[1]
        if (f, n) == ("abs", 1):
            return abs(args[0])
        if (f, n) == ("min", 2):
            return min(args)
        if (f, n) == ("max", 2):
            return max(args)
    raise LogicError(f"not an arithmetic expression: {write_term(term)}")


class Engine:
    """Resolution engine with a configurable built-in and constructor set."""

    def __init__(
        self,
        depth_limit: int = DEFAULT_DEPTH_LIMIT,
        context: SolveContext | None = None,
    ):
        self.depth_limit = depth_limit
        self.context = context or SolveContext()
        if "point" not in self.context.constructors:
            self.context.constructors["point"] = lambda args: Compound("point", tuple(args))
        self._builtins: dict[str, tuple[int, BuiltinFn]] = {}
        self._register_defaults()

    def register_builtin(self, name: str, arity: int, fn: BuiltinFn) -> None:
        self._builtins[name] = (arity, fn)

    def register_constructor(self, tag: str, fn: Callable) -> None:
        self.context.constructors[tag] = fn

    # -- resolution --

    def solve(
        self,
        goal: Term | str,
        state: MentalState | MentalStateView,
        module_order: Iterable[str] | None = None,
        depth_limit: int | None = None,
    ) -> Iterator[Substitution]:
        """Stream solutions restricted to the goal's variables.

        The mental-state snapshot is taken now, so later asserts and
        retracts do not leak into an already-open stream.
        """
        if isinstance(goal, str):
            goals = parse_goal(goal)
            goal = goals[0]
            for extra in goals[1:]:
                goal = Compound(",", (goal, extra))
        view = state.snapshot() if isinstance(state, MentalState) else state
        order = tuple(module_order) if module_order is not None else tuple(view)
        for name in order:
            if name not in view:
                raise LogicError(f"unknown logic module: {name}")
        depth = depth_limit if depth_limit is not None else self.depth_limit
        if depth < 1:
            raise LogicError("depth_limit must be >= 1")
        goal_vars = variables(goal)

        def run() -> Iterator[Substitution]:
            for subst in self._stream((goal,), Substitution(), depth, view, order):
                yield _canonical_solution(subst, goal_vars)

        return run()

    def ask(self, goal: Term | str, state, module_order=None) -> Substitution | None:
        """First solution or None."""
        return next(self.solve(goal, state, module_order), None)

    def _stream(
        self,
        goals: tuple[Term, ...],
        subst: Substitution,
        depth: int,
        view: MentalStateView,
        order: tuple[str, ...],
        not_depth: int = 0,
    ) -> Iterator[Substitution]:
        if not_depth > MAX_NOT_NESTING:
            return  # prune, like an exhausted depth budget
        stack: list[tuple[tuple[Term, ...], Substitution, int]] = [(goals, subst, depth)]
        while stack:
            goals, subst, depth = stack.pop()
            if not goals:
                yield subst
                continue
            goal, rest = subst.walk(goals[0]), goals[1:]
            if isinstance(goal, Variable):
                raise LogicError("cannot solve an unbound goal")
            if isinstance(goal, (Number, HostValue)):
                raise LogicError(f"not a callable goal: {goal}")
            if isinstance(goal, Compound) and goal.functor == "," and len(goal.args) == 2:
                stack.append(((goal.args[0], goal.args[1], *rest), subst, depth))
                continue
            functor, arity = _indicator(goal)
            if functor in self._builtins:
                expected, fn = self._builtins[functor]
                if arity != expected:
                    raise UnknownBuiltin(f"built-in {functor}/{arity} is not registered "
                                         f"({functor}/{expected} is)")
                args = goal.args if isinstance(goal, Compound) else ()
                call = _Call(self, view, order, depth, self.context, not_depth)
                results = list(fn(args, subst, call))
                for s2 in reversed(results):
                    stack.append((rest, s2, depth))
                continue
            if depth <= 0:
                continue  # branch pruned
            alternatives: list[tuple[tuple[Term, ...], Substitution, int]] = []
            for name in order:
                for clause in view[name]:
                    if _indicator(clause.head) != (functor, arity):
                        continue
                    renamed = clause.rename()
                    bound = unify(goal, renamed.head, subst)
                    if bound is not None:
                        alternatives.append(((*renamed.body, *rest), bound, depth - 1))
            stack.extend(reversed(alternatives))

    # -- default built-ins --

    def _register_defaults(self) -> None:
        reg = self.register_builtin

        def bi_true(args, subst, call):
            return (subst,)

        def bi_fail(args, subst, call):
            return ()

        def bi_unify(args, subst, call):
            bound = unify(args[0], args[1], subst)
            return (bound,) if bound is not None else ()

        def bi_not_unify(args, subst, call):
            return () if unify(args[0], args[1], subst) is not None else (subst,)

        def bi_struct_eq(args, subst, call):
            return (subst,) if subst.resolve(args[0]) == subst.resolve(args[1]) else ()

        def bi_not(args, subst, call):
            for _ in call.solutions(args[0], subst):
                return ()
            return (subst,)

        def bi_is(args, subst, call):
            value = _eval_arith(args[1], subst)
            bound = unify(args[0], Number(value), subst)
            return (bound,) if bound is not None else ()

        def compare(op):
            def fn(args, subst, call):
                a, b = _eval_arith(args[0], subst), _eval_arith(args[1], subst)
                return (subst,) if op(a, b) else ()
            return fn

        def bi_send(args, subst, call):
            ctx = call.ctx
            base = subst.walk(args[0])
            if isinstance(base, HostValue):
                holder = base.handle
            elif isinstance(base, Atom):
                holder = ctx.holder_resolver(base.name) if ctx.holder_resolver else None
                if holder is None:
                    raise LogicError(f"no registered skill holder named {base.name}")
            else:
                raise LogicError(f"send target must be a host value or name: {write_term(base)}")
            selector = subst.walk(args[1])
            if not isinstance(selector, Atom):
                raise LogicError("send selector must be an atom")
            items = list_items(subst.resolve(args[2]))
            if items is None:
                raise LogicError("send arguments must be a proper list")
            if ctx.skill_caller is None:
                raise LogicError("no skill bridge in this evaluation context")
            result = ctx.skill_caller(holder, selector.name, items)
            bound = unify(args[3], result, subst)
            return (bound,) if bound is not None else ()

        def bi_new_instance(args, subst, call):
            tag = subst.walk(args[0])
            if not isinstance(tag, Atom):
                raise LogicError("newInstance type tag must be an atom")
            ctor = call.ctx.constructors.get(tag.name)
            if ctor is None:
                raise UnknownConstructor(tag.name)
            items = list_items(subst.resolve(args[1]))
            if items is None:
                raise LogicError("newInstance arguments must be a proper list")
            from .terms import to_term
            built = to_term(ctor(items))
            bound = unify(args[2], built, subst)
            return (bound,) if bound is not None else ()

        def bi_base_object(args, subst, call):
            if call.ctx.agent_base is None:
                raise NoAgentContext("baseObject solved outside an agent context")
            bound = unify(args[0], HostValue(call.ctx.agent_base, tag="base"), subst)
            return (bound,) if bound is not None else ()

        reg("true", 0, bi_true)
        reg("fail", 0, bi_fail)
        reg("=", 2, bi_unify)
        reg("\\=", 2, bi_not_unify)
        reg("==", 2, bi_struct_eq)
        reg("not", 1, bi_not)
        reg("is", 2, bi_is)
        reg("<", 2, compare(lambda a, b: a < b))
        reg(">", 2, compare(lambda a, b: a > b))
        reg("=<", 2, compare(lambda a, b: a <= b))
        reg(">=", 2, compare(lambda a, b: a >= b))
        reg("=:=", 2, compare(lambda a, b: a == b))
        reg("=\\=", 2, compare(lambda a, b: a != b))
        reg("send", 4, bi_send)
        reg("newInstance", 3, bi_new_instance)
        reg("baseObject", 1, bi_base_object)


def _canonical_solution(subst: Substitution, goal_vars: tuple[Variable, ...]) -> Substitution:
    """Restrict to the goal's variables and normalize leftover free variables.

    Renaming leftovers to _1, _2, ... keeps solutions independent of the
    global fresh-variable counter, which trace determinism relies on.
    """
    restricted = subst.restrict(goal_vars)
    leftovers: dict[Variable, Variable] = {}

    def normalize(term: Term) -> Term:
        if isinstance(term, Variable):
            if term not in leftovers:
                leftovers[term] = Variable(f"_{len(leftovers) + 1}")
            return leftovers[term]
        if isinstance(term, Compound):
            return Compound(term.functor, tuple(normalize(a) for a in term.args))
        return term

    out = {v: normalize(t) for v, t in restricted.items()}
    return Substitution(out)
