"""Perception: watching skill invocations and detecting situations.

A perceptor observes invocations on some other agent or object without
touching them; matching intercepts become PerceivedEvents in its queue.
The default handler forwards completed (after-phase) events to the
owner's situation manager, which evaluates every registered situation
definition against a mental-state snapshot plus the trigger.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

from .errors import UnknownTarget
from .kernel import AgentHandle, Component, MessageIntercept
from .logic import (
    Atom,
    Clause,
    Compound,
    Substitution,
    Term,
    Variable,
    make_list,
    write_term,
)

log = logging.getLogger(__name__)

WILDCARD = "*"


@dataclass(frozen=True)
class PerceivedEvent:
    """One observed skill invocation phase."""

    source: str
    selector: str
    args: tuple[Term, ...]
    phase: str  # "before" | "after"
    result: Term | None
    tick: int


@dataclass(frozen=True)
class SituationDefinition:
    """A situation name plus the head parameters its clauses bind."""

    name: str
    arity: int
    module: str
    params: tuple[str, ...]


@dataclass(frozen=True)
class SituationOccurrence:
    name: str
    bindings: Substitution
    trigger: object  # PerceivedEvent or AclMessage
    tick: int

    def binding(self, param: str) -> Term | None:
        return self.bindings.get(Variable(param))


class Perceptor(Component):
    """Observes one target; never modifies the observed invocation.

    `belief_updater`, when given, runs before the default forwarding and
    may assert or retract beliefs from the perceived event (the opt-in
    belief-update usage). Handler faults are isolated: they are logged
    and the perceptor keeps running.
    """

    def __init__(self, owner: AgentHandle, target: str,
                 selector_filter: set[str] | str = WILDCARD,
                 handler: Callable[["Perceptor", PerceivedEvent], None] | None = None,
                 belief_updater: Callable[[AgentHandle, PerceivedEvent], None] | None = None):
        super().__init__(f"perceptor:{owner.name}->{target}", owner=owner.name)
        self.agent = owner
        self.target = target
        self.selector_filter = selector_filter
        self.handler = handler
        self.belief_updater = belief_updater
        self.last_tick = -1

    def matches(self, selector: str) -> bool:
        return self.selector_filter == WILDCARD or selector in self.selector_filter

    def deliver_intercept(self, intercept: MessageIntercept, tick: int) -> None:
        event = PerceivedEvent(intercept.target, intercept.selector, intercept.args,
                               intercept.phase, intercept.result, tick)
        self.enqueue(event)

    def handle(self, event: PerceivedEvent) -> None:
        assert event.tick > self.last_tick
        self.last_tick = event.tick
        try:
            self.message_perceived(event)
        except Exception:
            log.exception("perceptor %s handler fault (isolated)", self.name)

    def message_perceived(self, event: PerceivedEvent) -> None:
        """Default behavior: update beliefs if asked, then notify the manager.

        Only completed invocations reach situation evaluation; the before
        phase is available to custom handlers.
        """
        if self.handler is not None:
            self.handler(self, event)
            return
        if event.phase != "after":
            return
        if self.belief_updater is not None:
            self.belief_updater(self.agent, event)
        from .deliberate import InternalEvent
        self.agent.bus.publish(InternalEvent(
            "PerceptionArrived",
            Compound("percept", (Atom(event.selector), make_list(list(event.args)),
                                 Atom(event.source)))))
        manager = self.agent.components.get("situation_manager")
        if manager is not None:
            manager.enqueue(event)

    def detach(self) -> None:
        self.stop()
        self.agent.kernel.remove_watcher(self.target, self)
        self.agent.kernel.scheduler.remove(self)


def register_perceptor(owner: AgentHandle, target: str,
                       selector_filter: set[str] | str = WILDCARD,
                       handler=None, belief_updater=None) -> Perceptor:
    """Attach a perceptor for owner on target; target must be registered."""
    kernel = owner.kernel
    if kernel.holder(target) is None:
        raise UnknownTarget(target)
    perceptor = Perceptor(owner, target, selector_filter, handler, belief_updater)
    kernel.add_watcher(target, perceptor)
    kernel.scheduler.add(perceptor)
    owner.components["perceptors"].append(perceptor)
    return perceptor


def trigger_facts(trigger) -> list[Clause]:
    """Transient percept/3 facts visible only during one evaluation."""
    if isinstance(trigger, PerceivedEvent):
        args: Term = make_list(list(trigger.args))
        head = Compound("percept", (Atom(trigger.selector), args, Atom(trigger.source)))
        return [Clause(head)]
    # inbound messages: percept(performative, [content], sender)
    content = trigger.content_term()
    payload = make_list([content] if content is not None else [])
    head = Compound("percept", (Atom(trigger.performative), payload, Atom(trigger.sender)))
    return [Clause(head)]


def situation_definitions(handle: AgentHandle) -> list[SituationDefinition]:
    """Scan the agent's situation modules for situation/N clause heads."""
    definitions: list[SituationDefinition] = []
    seen: set[tuple[str, int]] = set()
    view = handle.mental_state.snapshot()
    for module in handle.spec.situation_modules:
        for clause in view.get(module, ()):
            head = clause.head
            if not (isinstance(head, Compound) and head.functor == "situation"):
                continue
            name_term = head.args[0]
            if not isinstance(name_term, Atom):
                continue
            arity = len(head.args) - 1
            if (name_term.name, arity) in seen:
                continue
            seen.add((name_term.name, arity))
            params = []
            for i, arg in enumerate(head.args[1:]):
                params.append(arg.name if isinstance(arg, Variable) else f"arg{i + 1}")
            definitions.append(SituationDefinition(name_term.name, arity, module,
                                                   tuple(params)))
    return definitions


class SituationManager(Component):
    """Turns perceived events and inbound messages into situation occurrences."""

    def __init__(self, handle: AgentHandle):
        super().__init__(f"situations:{handle.name}", owner=handle.name)
        self.agent = handle
        self.definitions = situation_definitions(handle)

    def refresh_definitions(self) -> None:
        self.definitions = situation_definitions(self.agent)

    def handle(self, trigger) -> None:
        occurrences = self.evaluate(trigger)
        if not occurrences:
            return
        from .deliberate import InternalEvent
        for occurrence in occurrences:
            payload = Compound("situation", (
                Atom(occurrence.name),
                _bindings_term(occurrence.bindings),
            ))
            self.agent.kernel.trace(self.agent.name, "situation", payload)
            self.agent.bus.publish(InternalEvent("SituationDetected", payload,
                                                 data=occurrence))

    def evaluate(self, trigger) -> list[SituationOccurrence]:
        """Pure evaluation: (mental-state snapshot, trigger) -> occurrences.

        Each solve solution yields one occurrence; identical (name,
        bindings) pairs within one evaluation collapse to one. Logic
        errors surface as zero occurrences plus a diagnostic.
        """
        view = self.agent.mental_state.snapshot().with_module(
            "percept", trigger_facts(trigger))
        order = (*self.agent.spec.situation_modules, "percept", "beliefs", "goals")
        order = tuple(name for name in order if name in view)
        tick = self.agent.kernel.next_event_seq()
        occurrences: list[SituationOccurrence] = []
        seen: set[tuple[str, tuple]] = set()
        for definition in self.definitions:
            query_vars = tuple(Variable(p) for p in definition.params)
            goal: Term = Compound("situation", (Atom(definition.name), *query_vars))
            try:
                solutions = list(self.agent.engine.solve(goal, view, order))
            except Exception as err:
                log.warning("situation %s evaluation failed: %s", definition.name, err)
                continue
            for solution in solutions:
                key = (definition.name,
                       tuple(sorted((v.name, write_term(t)) for v, t in solution.items())))
                if key in seen:
                    continue
                seen.add(key)
                occurrences.append(SituationOccurrence(definition.name, solution,
                                                       trigger, tick))
        return occurrences


def _bindings_term(bindings: Substitution) -> Term:
    pairs = [Compound("=", (Atom(v.name), t))
             for v, t in sorted(bindings.items(), key=lambda kv: kv[0].name)]
    return make_list(pairs)
