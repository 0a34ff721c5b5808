"""Reactors: situation occurrences mapped to immediate guarded skill calls.

A reaction pairs a logic precondition with one of the agent's basic
skills. When an occurrence arrives, every reaction declared for that
situation is checked in declaration order and each one whose
precondition holds executes immediately; effects (belief asserts and
retracts, optionally an outgoing message) apply only if the skill
succeeded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import SkillFailed
from .kernel import AgentHandle, Component
from .logic import Atom, Clause, Substitution, Term, parse_term, variables

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Effect:
    """A belief update or message template applied after the skill runs."""

    kind: str  # "assert" | "retract" | "send"
    template: Term
    module: str = "beliefs"
    receiver: str = ""  # send only

    def instantiate(self, bindings: Substitution) -> Term:
        return bindings.resolve(self.template)


def assert_effect(template: str | Term, module: str = "beliefs") -> Effect:
    return Effect("assert", _term(template), module)


def retract_effect(template: str | Term, module: str = "beliefs") -> Effect:
    return Effect("retract", _term(template), module)


def send_effect(receiver: str, template: str | Term) -> Effect:
    return Effect("send", _term(template), receiver=receiver)


def _term(value: str | Term) -> Term:
    return parse_term(value) if isinstance(value, str) else value


@dataclass(frozen=True)
class Reaction:
    """Precondition plus skill; the action args map situation bindings."""

    name: str
    situation_name: str
    precondition: Term | str
    selector: str
    args: tuple[Term | str, ...] = ()
    effects: tuple[Effect, ...] = ()

    def precondition_goal(self) -> Term:
        return _term(self.precondition)

    def arg_terms(self) -> tuple[Term, ...]:
        return tuple(_term(a) for a in self.args)


class Reactor(Component):
    """Checks all reactions for an occurrence, executing the true ones."""

    def __init__(self, handle: AgentHandle, reactions=()):
        super().__init__(f"reactor:{handle.name}", owner=handle.name)
        self.agent = handle
        self.reactions: list[Reaction] = list(reactions)

    def handle(self, event) -> None:
        occurrence = getattr(event, "data", event)
        self.on_situation(occurrence)

    def on_situation(self, occurrence) -> list[Reaction]:
        """All matching reactions whose precondition held and whose skill ran."""
        executed: list[Reaction] = []
        for reaction in self.reactions:
            if reaction.situation_name != occurrence.name:
                continue
            bindings = self._check_precondition(reaction, occurrence.bindings)
            if bindings is None:
                continue
            if self._execute(reaction, bindings):
                executed.append(reaction)
        return executed

    def _check_precondition(self, reaction: Reaction,
                            bindings: Substitution) -> Substitution | None:
        goal = bindings.resolve(reaction.precondition_goal())
        solution = self.agent.ask(goal)
        if solution is None:
            return None
        merged = dict(bindings)
        merged.update(solution)
        return Substitution(merged)

    def _execute(self, reaction: Reaction, bindings: Substitution) -> bool:
        args = [bindings.resolve(a) for a in reaction.arg_terms()]
        unbound = [a for a in args if variables(a)]
        if unbound:
            # arg mappings may only reference situation/precondition variables
            log.warning("reaction %s skipped: unbound action args %s",
                        reaction.name, unbound)
            return False
        try:
            self.agent.invoke(reaction.selector, *args)
        except SkillFailed as failure:
            # the skill refused: this reaction's effects are skipped, others proceed
            log.info("reaction %s skill %s failed: %s",
                     reaction.name, reaction.selector, failure.reason)
            self.agent.kernel.trace(self.agent.name, "reaction-failed",
                                    Atom(reaction.name))
            return False
        self._apply_effects(reaction, bindings)
        self.agent.kernel.trace(self.agent.name, "reaction", Atom(reaction.name))
        return True

    def _apply_effects(self, reaction: Reaction, bindings: Substitution) -> None:
        for effect in reaction.effects:
            term = effect.instantiate(bindings)
            if effect.kind == "assert":
                self.agent.mental_state.assert_clause(effect.module, Clause(term))
            elif effect.kind == "retract":
                self.agent.mental_state.retract_clause(effect.module, term)
            elif effect.kind == "send":
                self._send(effect.receiver, term)

    def _send(self, receiver: str, content: Term) -> None:
        communicator = self.agent.components.get("communicator")
        if communicator is None:
            log.warning("reaction send effect ignored: %s is not communicating",
                        self.agent.name)
            return
        from .comms import AclMessage
        communicator.send(AclMessage(performative="tell", sender=self.agent.name,
                                     receiver=receiver, content=content))
