"""Independent ground-enumeration oracle for the resolution engine.

Random programs are generated as a neutral abstract structure and then
converted separately to engine clauses and to the oracle's own tuple
encoding. The oracle derives the full solution set bottom-up with its
own matcher, sharing no code with the engine's resolution path.
"""

from __future__ import annotations

import random

from stormkit.logic import Atom, Clause, Compound, Number, Term

# abstract argument encodings: ("c", value) constant, ("v", name) variable
Arg = tuple[str, object]
AbstractFact = tuple[str, tuple[Arg, ...]]
AbstractRule = tuple[str, tuple[Arg, ...], tuple[tuple[str, tuple[Arg, ...]], ...]]


def generate_program(rng: random.Random, max_facts: int = 50, max_rules: int = 5):
    """A random ground fact base plus safe, acyclic rules."""
    constants = [("c", name) for name in "abcdef"] + [("c", n) for n in range(1, 6)]
    n_base = rng.randint(1, 3)          # layer-0 predicates get facts
    n_derived = rng.randint(0, 2)       # derived predicates get rules only
    preds = []
    for i in range(n_base + n_derived):
        preds.append((f"p{i}", rng.randint(1, 3), i >= n_base))

    facts: list[AbstractFact] = []
    n_facts = rng.randint(1, max_facts)
    base_preds = [p for p in preds if not p[2]]
    for _ in range(n_facts):
        name, arity, _ = rng.choice(base_preds)
        facts.append((name, tuple(rng.choice(constants) for _ in range(arity))))

    rules: list[AbstractRule] = []
    derived = [p for p in preds if p[2]]
    for idx, (name, arity, _) in enumerate(derived):
        # rules for a derived predicate only reference strictly earlier predicates,
        # so the dependency graph is acyclic and SLD terminates
        allowed = base_preds + derived[:idx]
        for _ in range(rng.randint(1, max(1, max_rules // max(1, len(derived))))):
            n_goals = rng.randint(1, 2)
            body = []
            body_vars: list[Arg] = []
            for _ in range(n_goals):
                bname, barity, _ = rng.choice(allowed)
                args = []
                for _ in range(barity):
                    if body_vars and rng.random() < 0.3:
                        args.append(rng.choice(body_vars))
                    elif rng.random() < 0.6:
                        var = ("v", f"V{len(body_vars)}")
                        body_vars.append(var)
                        args.append(var)
                    else:
                        args.append(rng.choice(constants))
                body.append((bname, tuple(args)))
            if not body_vars:  # keep heads safe: head vars must appear in the body
                head_args = tuple(rng.choice(constants) for _ in range(arity))
            else:
                head_args = tuple(rng.choice(body_vars) for _ in range(arity))
            rules.append((name, head_args, tuple(body)))
    return preds, facts, rules


# --- conversion to engine clauses ---

def _arg_to_term(arg: Arg) -> Term:
    kind, value = arg
    if kind == "v":
        from stormkit.logic import Variable
        return Variable(str(value))
    if isinstance(value, int):
        return Number(value)
    return Atom(str(value))


def _atom_to_term(name: str, args: tuple[Arg, ...]) -> Term:
    return Compound(name, tuple(_arg_to_term(a) for a in args)) if args else Atom(name)


def to_clauses(facts, rules) -> list[Clause]:
    clauses = [Clause(_atom_to_term(n, a)) for n, a in facts]
    for name, head_args, body in rules:
        clauses.append(Clause(
            _atom_to_term(name, head_args),
            tuple(_atom_to_term(bn, ba) for bn, ba in body),
        ))
    return clauses


# --- the oracle itself: naive bottom-up fixpoint with its own matcher ---

def _match(pattern: tuple[Arg, ...], ground: tuple[object, ...], env: dict) -> dict | None:
    env = dict(env)
    for p, g in zip(pattern, ground):
        kind, value = p
        if kind == "c":
            if value != g:
                return None
        else:
            if value in env:
                if env[value] != g:
                    return None
            else:
                env[value] = g
    return env


def fixpoint(facts, rules) -> set[tuple[str, tuple[object, ...]]]:
    derived = {(name, tuple(v for _, v in args)) for name, args in facts}
    changed = True
    while changed:
        changed = False
        for name, head_args, body in rules:
            envs = [dict()]
            for bname, bargs in body:
                next_envs = []
                for env in envs:
                    for fname, fargs in derived:
                        if fname != bname or len(fargs) != len(bargs):
                            continue
                        bound = _match(bargs, fargs, env)
                        if bound is not None:
                            next_envs.append(bound)
                envs = next_envs
            for env in envs:
                ground_head = tuple(
                    arg[1] if arg[0] == "c" else env[arg[1]] for arg in head_args
                )
                if (name, ground_head) not in derived:
                    derived.add((name, ground_head))
                    changed = True
    return derived


def term_to_value(term: Term) -> object:
    if isinstance(term, Number):
        return term.value
    if isinstance(term, Atom):
        return term.name
    raise AssertionError(f"oracle expected a ground constant, got {term}")
