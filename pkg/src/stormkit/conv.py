"""Coordination through conversation classes: DFAs with guarded rules.

A conversation class names its states and an ordered rule list; each
rule relates two states and fires when its guard accepts the incoming
event. Firing runs the before hook, sends the rule's message (if any),
runs the after hook, and moves the instance to the target state. Per
event at most one rule fires (first match wins) and instances in a
final state ignore everything.
"""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

from .comms import AclMessage
from .kernel import AgentHandle, Component
from .logic import (
    Atom,
    Clause,
    Compound,
    Substitution,
    Term,
    parse_term,
    struct,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConvEvent:
    """What a conversation instance reacts to: a message or a local signal."""

    kind: str  # "message" | "signal"
    payload: Term
    message: AclMessage | None = None

    @classmethod
    def signal(cls, payload: Term | str) -> "ConvEvent":
        term = parse_term(payload) if isinstance(payload, str) else payload
        return cls("signal", term)

    @classmethod
    def for_message(cls, message: AclMessage) -> "ConvEvent":
        digest = struct("msg", Atom(message.performative), Atom(message.sender),
                        message.content_term())
        return cls("message", digest, message)


# Guards may be Python callables (returning truth or a Substitution) or
# logic goals solved against the mental state plus transient event facts.
Guard = Callable[["ConversationInstance", ConvEvent], object] | Term | str
Hook = Callable[["ConversationInstance", ConvEvent, Substitution], None]
MessageMaker = Callable[["ConversationInstance", ConvEvent, Substitution],
                        "AclMessage | list[AclMessage] | None"]


@dataclass(frozen=True)
class MessageTemplate:
    """Declarative outgoing message: receiver `peers` broadcasts to all."""

    performative: str
    receiver: str  # a name, "peers", or "sender"
    content: Term | str

    def build(self, instance: "ConversationInstance", event: ConvEvent,
              bindings: Substitution) -> list[AclMessage]:
        template = parse_term(self.content) if isinstance(self.content, str) else self.content
        content = bindings.resolve(template)
        if self.receiver == "peers":
            receivers = list(instance.peers)
        elif self.receiver == "sender":
            if event.message is None:
                return []
            receivers = [event.message.sender]
        else:
            receivers = [self.receiver]
        return [AclMessage(performative=self.performative, sender=instance.agent.name,
                           receiver=receiver, content=content)
                for receiver in receivers]


@dataclass(frozen=True)
class ConvRule:
    """A guarded transition with attached actions and an outgoing message."""

    name: str
    from_state: str
    to_state: str
    such_that: Guard
    do_before: Hook | None = None
    do_after: Hook | None = None
    send_message: MessageTemplate | MessageMaker | None = None


@dataclass(frozen=True)
class ConversationClass:
    name: str
    states: frozenset[str]
    initial: str
    finals: frozenset[str]
    rules: tuple[ConvRule, ...]

    def __post_init__(self):
        if self.initial not in self.states:
            raise ValueError(f"initial state {self.initial!r} not in states")
        for rule in self.rules:
            if rule.from_state not in self.states or rule.to_state not in self.states:
                raise ValueError(f"rule {rule.name} endpoints must be declared states")
        if not self.finals <= self.states:
            raise ValueError("final states must be declared states")


@dataclass(frozen=True)
class Transition:
    rule: str
    from_state: str
    to_state: str
    event: Term


@dataclass
class ConversationInstance:
    """One live conversation: current state, peers, bindings, history."""

    conv_class: ConversationClass
    agent: AgentHandle
    peers: tuple[str, ...]
    current: str = ""
    bindings: Substitution = field(default_factory=Substitution)
    history: list[Transition] = field(default_factory=list)
    queue: deque = field(default_factory=deque)
    ignored: list[Term] = field(default_factory=list)

    def __post_init__(self):
        if not self.current:
            self.current = self.conv_class.initial

    @property
    def done(self) -> bool:
        return self.current in self.conv_class.finals

    def replay(self) -> str:
        """Fold the history from the initial state; must land on current."""
        state = self.conv_class.initial
        for transition in self.history:
            if transition.from_state != state:
                raise ValueError(f"history breaks at {transition.rule}: "
                                 f"{transition.from_state} != {state}")
            state = transition.to_state
        return state


def _event_facts(event: ConvEvent) -> list[Clause]:
    facts = [Clause(Compound("event", (Atom(event.kind), event.payload)))]
    if event.message is not None:
        facts.append(Clause(Compound("msg", (
            Atom(event.message.performative),
            Atom(event.message.sender),
            event.message.content_term(),
        ))))
    return facts


def _evaluate_guard(rule: ConvRule, instance: ConversationInstance,
                    event: ConvEvent) -> Substitution | None:
    guard = rule.such_that
    if callable(guard):
        outcome = guard(instance, event)
        if isinstance(outcome, Substitution):
            return outcome
        return Substitution() if outcome else None
    view = instance.agent.mental_state.snapshot().with_module("event", _event_facts(event))
    order = ("event", *instance.agent.mental_state.module_names)
    return instance.agent.engine.ask(guard, view, module_order=order)


def check(rule: ConvRule, instance: ConversationInstance,
          event: ConvEvent) -> Transition | None:
    """The rule-check template: guard, before hook, message, after hook, move.

    A hook fault rolls the transition back: the conversation state is
    unchanged and the fault is logged. Outgoing messages are built
    between the hooks but dispatched only after both succeeded, so a
    message goes out iff the transition fires.
    """
    if instance.current != rule.from_state:
        return None
    bindings = _evaluate_guard(rule, instance, event)
    if bindings is None:
        return None
    try:
        if rule.do_before is not None:
            rule.do_before(instance, event, bindings)
        messages = _build_rule_messages(rule, instance, event, bindings)
        if rule.do_after is not None:
            rule.do_after(instance, event, bindings)
        _dispatch(instance, messages)
    except Exception:
        log.exception("conversation rule %s fault; transition rolled back", rule.name)
        return None
    transition = Transition(rule.name, rule.from_state, rule.to_state, event.payload)
    instance.current = rule.to_state
    instance.history.append(transition)
    agent = instance.agent
    agent.kernel.trace(agent.name, "conversation",
                       struct("transition", Atom(instance.conv_class.name),
                              Atom(rule.name), Atom(rule.from_state), Atom(rule.to_state)))
    from .deliberate import InternalEvent
    agent.bus.publish(InternalEvent(
        "ConversationAdvanced",
        struct("conv", Atom(instance.conv_class.name), Atom(rule.name),
               Atom(rule.to_state)),
        data=(instance, transition)))
    return transition


def _build_rule_messages(rule: ConvRule, instance: ConversationInstance,
                         event: ConvEvent, bindings: Substitution) -> list[AclMessage]:
    if rule.send_message is None:
        return []
    if isinstance(rule.send_message, MessageTemplate):
        return rule.send_message.build(instance, event, bindings)
    built = rule.send_message(instance, event, bindings)
    if built is None:
        return []
    if isinstance(built, AclMessage):
        return [built]
    return list(built)


def _dispatch(instance: ConversationInstance, messages: list[AclMessage]) -> None:
    communicator = instance.agent.components.get("communicator")
    if messages and communicator is None:
        raise RuntimeError(f"agent {instance.agent.name} cannot send without "
                           "communication capability")
    for message in messages:
        communicator.send(message)


def advance(instance: ConversationInstance, event: ConvEvent) -> Transition | None:
    """Fire the first matching rule from the current state, if any.

    Instances in a final state ignore all further events; an event with
    no matching rule leaves state and history unchanged and is logged as
    ignored.
    """
    if instance.done:
        instance.ignored.append(event.payload)
        return None
    for rule in instance.conv_class.rules:
        if rule.from_state != instance.current:
            continue
        transition = check(rule, instance, event)
        if transition is not None:
            return transition
    instance.ignored.append(event.payload)
    agent = instance.agent
    agent.kernel.trace(agent.name, "conversation-ignored",
                       struct("ignored", Atom(instance.conv_class.name), event.payload))
    return None


# --- per-agent engine ---

CONVERSATION_CLASSES: dict[str, ConversationClass] = {}


def register_conversation_class(conv_class: ConversationClass) -> None:
    CONVERSATION_CLASSES[conv_class.name] = conv_class


class ConversationEngine(Component):
    """Runs every live conversation of one agent, one event per step.

    Each instance keeps its own FIFO sub-queue; steps scan instances in
    creation order and process the first pending event.
    """

    def __init__(self, handle: AgentHandle, class_names: Iterable[str] = ()):
        super().__init__(f"conversations:{handle.name}", owner=handle.name)
        self.agent = handle
        self.classes: dict[str, ConversationClass] = {}
        for name in class_names:
            if name not in CONVERSATION_CLASSES:
                raise ValueError(f"unknown conversation class: {name}")
            self.classes[name] = CONVERSATION_CLASSES[name]
        self.instances: list[ConversationInstance] = []

    def spawn(self, class_name: str, peers: Iterable[str],
              start: bool = True) -> ConversationInstance:
        conv_class = self.classes.get(class_name) or CONVERSATION_CLASSES[class_name]
        instance = ConversationInstance(conv_class, self.agent, tuple(peers))
        self.instances.append(instance)
        if start:
            instance.queue.append(ConvEvent.signal(Atom("start")))
        return instance

    def dispatch_message(self, message: AclMessage) -> None:
        event = ConvEvent.for_message(message)
        for instance in self.instances:
            if message.sender in instance.peers or message.sender == "router":
                instance.queue.append(event)

    def signal_all(self, payload: Term | str) -> None:
        event = ConvEvent.signal(payload)
        for instance in self.instances:
            instance.queue.append(event)

    def step(self) -> bool:
        if not self.alive or self.paused:
            return False
        for instance in self.instances:
            if instance.queue:
                advance(instance, instance.queue.popleft())
                return True
        return False

    def pending(self) -> int:
        return sum(len(instance.queue) for instance in self.instances)


def spawn_conversation(agent: AgentHandle, class_name: str,
                       peers: Iterable[str], start: bool = True) -> ConversationInstance:
    """Start a conversation bound to the agent's communicator."""
    engine = agent.components.get("conversations")
    if engine is None:
        engine = ConversationEngine(agent)
        agent.components["conversations"] = engine
        agent.kernel.scheduler.add(engine)
    return engine.spawn(class_name, peers, start)
