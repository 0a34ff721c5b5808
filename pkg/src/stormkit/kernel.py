"""Agent lifecycle and the skill-dispatch point.

A plain object holding effector skills becomes an agent by attaching the
component set selected by its capability flags. Every skill invocation
flows through `Kernel.invoke_skill`, which emits before/after intercepts
to watching perceptors; interception can observe but never alter results.

Meta-levels are realized as an explicit interceptor chain plus event
subscriptions on each agent's internal bus rather than runtime
reflection; the learner subscription kind is declared for future use and
stays empty.
"""

from __future__ import annotations

import inspect
import random
import threading
from collections import deque
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

from .errors import (
    DuplicateAgentName,
    NoSuchSkill,
    RouterUnreachable,
    SkillFailed,
    UnknownTarget,
)
from .logic import (
    Atom,
    Compound,
    DEFAULT_DEPTH_LIMIT,
    Engine,
    MentalState,
    SolveContext,
    Term,
    from_term,
    to_term,
)

# Subscription kinds on the internal bus. Reactors and knowledge sources
# subscribe today; the learner slot is reserved and intentionally empty.
SUBSCRIBER_KINDS = ("knowledge-source", "reactor", "learner")


@dataclass(frozen=True)
class KSDescriptor:
    """Names a knowledge-source factory plus its construction parameters."""

    kind: str
    params: Mapping[str, object] = field(default_factory=dict)


@dataclass
class AgentSpec:
    """Capability flags and component configuration for one agent."""

    name: str
    perception: bool = False
    reaction: bool = False
    deliberation: bool = False
    communication: bool = False
    situation_modules: tuple[str, ...] = ()
    reactions: tuple = ()
    knowledge_sources: tuple[KSDescriptor, ...] = ()
    conversation_classes: tuple[str, ...] = ()
    clause_modules: Mapping[str, str] = field(default_factory=dict)
    initial_beliefs: str = ""
    depth_limit: int = DEFAULT_DEPTH_LIMIT

    @property
    def capabilities(self) -> dict[str, bool]:
        return {
            "perception": self.perception,
            "reaction": self.reaction,
            "deliberation": self.deliberation,
            "communication": self.communication,
        }

    def validate(self) -> None:
        if not self.name or not self.name[0].isalpha():
            raise ValueError(f"invalid agent name: {self.name!r}")
        for module in self.situation_modules:
            if module not in self.clause_modules:
                raise ValueError(f"situation module {module!r} has no clause source")


class BaseObject:
    """The skill-bearing object an agent wraps.

    Skills are plain callables over the environment; they hold no agent
    logic. Invocation goes through the kernel dispatch point, never
    directly through this table.
    """

    def __init__(self, name: str, skills: Mapping[str, Callable]):
        self.name = name
        self.skills = dict(skills)

    def arity(self, selector: str) -> int:
        fn = self.skills[selector]
        params = [p for p in inspect.signature(fn).parameters.values()
                  if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD)]
        return len(params)

    def _call(self, selector: str, args: tuple[Term, ...]) -> Term:
        fn = self.skills[selector]
        return to_term(fn(*[from_term(a) for a in args]))


@dataclass(frozen=True)
class MessageIntercept:
    """One observation of a skill invocation, before or after execution."""

    target: str
    selector: str
    args: tuple[Term, ...]
    phase: str  # "before" | "after"
    result: Term | None = None  # after only; failures carry skill_failed(reason)


def failure_marker(reason: str) -> Term:
    return Compound("skill_failed", (Atom(reason),))


class Component:
    """An independently schedulable task consuming a private FIFO queue."""

    def __init__(self, name: str, owner: str | None = None):
        self.name = name
        self.owner = owner
        self.queue: deque = deque()
        self.alive = True
        self.paused = False

    def enqueue(self, item) -> None:
        self.queue.append(item)

    def step(self) -> bool:
        """Process at most one queued item; True if work was done."""
        if not self.alive or self.paused or not self.queue:
            return False
        self.handle(self.queue.popleft())
        return True

    def handle(self, item) -> None:  # pragma: no cover - overridden
        raise NotImplementedError

    def control(self, kind: str) -> None:
        if kind == "Kill":
            self.alive = False
        elif kind == "Wait":
            self.paused = True
        elif kind == "Resume":
            self.paused = False

    def pending(self) -> int:
        return len(self.queue)

    def stop(self) -> None:
        self.alive = False


class Scheduler:
    """Seeded round-robin driver for component tasks.

    One round offers every component a single step, in an order drawn
    from the seeded generator, which makes whole runs reproducible. The
    free-running mode just loops rounds without idle detection pauses.
    """

    def __init__(self, seed: int = 0):
        self.rng = random.Random(seed)
        self.components: list[Component] = []
        self.tick = 0

    def add(self, component: Component) -> None:
        self.components.append(component)

    def remove(self, component: Component) -> None:
        if component in self.components:
            self.components.remove(component)

    def pending(self) -> int:
        return sum(c.pending() for c in self.components if c.alive and not c.paused)

    def run_round(self) -> bool:
        self.tick += 1
        order = self.rng.sample(self.components, len(self.components))
        worked = False
        for component in order:
            worked = component.step() or worked
        return worked

    def run_until_idle(self, max_rounds: int = 10_000) -> int:
        """Rounds executed before the system went quiet (or the cap hit)."""
        rounds = 0
        while rounds < max_rounds:
            rounds += 1
            if not self.run_round() and self.pending() == 0:
                break
        return rounds


class ThreadPump:
    """Free-running mode: one daemon thread per component task.

    No reproducibility guarantees; components keep their share-nothing
    contract and synchronize only through queues, the mental-state store,
    and the bus.
    """

    def __init__(self, scheduler: Scheduler, idle_sleep: float = 0.001):
        self.scheduler = scheduler
        self.idle_sleep = idle_sleep
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    def start(self) -> None:
        import time

        def pump(component: Component) -> None:
            while not self._stop.is_set() and component.alive:
                if not component.step():
                    time.sleep(self.idle_sleep)

        for component in list(self.scheduler.components):
            thread = threading.Thread(target=pump, args=(component,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=1.0)


class AgentHandle:
    """A live agent: spec, base object, mental state, and component set."""

    def __init__(self, kernel: "Kernel", spec: AgentSpec, base: BaseObject, env: object):
        self.kernel = kernel
        self.spec = spec
        self.base = base
        self.env = env
        self.alive = True
        self.mental_state = MentalState()
        self.components: dict[str, object] = {"perceptors": []}
        self.bus = None  # set during assembly
        self.engine: Engine | None = None

    @property
    def name(self) -> str:
        return self.spec.name

    def invoke(self, selector: str, *args) -> Term:
        return self.kernel.invoke_skill(self, selector, list(args))

    def solve(self, goal, module_order=None):
        return self.engine.solve(goal, self.mental_state, module_order)

    def ask(self, goal, module_order=None):
        return self.engine.ask(goal, self.mental_state, module_order)

    def component_set(self) -> set[str]:
        """Instantiated component kinds; must mirror the capability flags."""
        return {key for key in ("situation_manager", "reactor", "deliberator", "communicator")
                if self.components.get(key) is not None}


TraceFn = Callable[[int, str, str, Term], None]


class Kernel:
    """The runtime: object registry, dispatch point, scheduler, trace sink."""

    def __init__(self, seed: int = 0, router=None, env: object = None):
        self.scheduler = Scheduler(seed)
        self.router = router
        self.env = env
        self.agents: dict[str, AgentHandle] = {}
        self.objects: dict[str, BaseObject] = {}
        self._base_owner: dict[int, str] = {}  # id(base) -> agent name
        self._watchers: dict[str, list] = {}
        self._event_seq = 0
        self.tracer: TraceFn | None = None
        self._lock = threading.RLock()

    # -- registry --

    def register_object(self, base: BaseObject) -> None:
        if base.name in self.objects or base.name in self.agents:
            raise DuplicateAgentName(base.name)
        self.objects[base.name] = base

    def resolve(self, target) -> tuple[str, BaseObject]:
        if isinstance(target, AgentHandle):
            if not target.alive:
                raise UnknownTarget(target.name)
            return target.name, target.base
        if isinstance(target, BaseObject):
            # a base bound to an agent keeps the agent's identity
            return self._base_owner.get(id(target), target.name), target
        if isinstance(target, str):
            if target in self.agents:
                return target, self.agents[target].base
            if target in self.objects:
                return target, self.objects[target]
            raise UnknownTarget(target)
        raise UnknownTarget(repr(target))

    def holder(self, name: str) -> BaseObject | None:
        try:
            return self.resolve(name)[1]
        except UnknownTarget:
            return None

    # -- dispatch point --

    def add_watcher(self, target_name: str, watcher) -> None:
        self._watchers.setdefault(target_name, []).append(watcher)

    def remove_watcher(self, target_name: str, watcher) -> None:
        if watcher in self._watchers.get(target_name, []):
            self._watchers[target_name].remove(watcher)

    def next_event_seq(self) -> int:
        with self._lock:
            self._event_seq += 1
            return self._event_seq

    def invoke_skill(self, target, selector: str, args: list | None = None) -> Term:
        """Execute a skill, emitting before/after intercepts around it."""
        name, base = self.resolve(target)
        if selector not in base.skills:
            raise NoSuchSkill(f"{name} has no skill {selector!r}")
        arg_terms = tuple(to_term(a) for a in (args or []))
        self._emit(MessageIntercept(name, selector, arg_terms, "before"))
        try:
            result = base._call(selector, arg_terms)
        except SkillFailed as failure:
            self._emit(MessageIntercept(name, selector, arg_terms, "after",
                                        failure_marker(failure.reason)))
            raise
        self._emit(MessageIntercept(name, selector, arg_terms, "after", result))
        return result

    def _emit(self, intercept: MessageIntercept) -> None:
        # serialized so per-perceptor tick order stays strictly increasing
        # even when skills run from multiple execution contexts
        with self._lock:
            watchers = self._watchers.get(intercept.target, ())
            if not watchers:
                return
            tick = self.next_event_seq()
            for watcher in list(watchers):
                if watcher.matches(intercept.selector):
                    watcher.deliver_intercept(intercept, tick)

    # -- lifecycle --

    def create_agent(self, spec: AgentSpec, base: BaseObject, env: object = None,
                     factory: "AgentFactory | None" = None) -> AgentHandle:
        spec.validate()
        if spec.name in self.agents or spec.name in self.objects:
            raise DuplicateAgentName(spec.name)
        if spec.communication and self.router is None:
            raise RouterUnreachable(f"agent {spec.name} needs a router")
        for selector in base.skills:
            base.arity(selector)  # skills must resolve to callables
        handle = (factory or AgentFactory()).build(self, spec, base,
                                                   env if env is not None else self.env)
        self.agents[spec.name] = handle
        self._base_owner[id(base)] = spec.name
        return handle

    def kill(self, agent: AgentHandle) -> None:
        """Stop the agent's component tasks; idempotent."""
        if not agent.alive:
            return
        agent.alive = False
        if agent.bus is not None:
            from .deliberate import InternalEvent
            agent.bus.publish(InternalEvent("AgentKilled", Atom(agent.name)))
            agent.bus.close()
        for perceptor in agent.components["perceptors"]:
            perceptor.detach()
        for key in ("situation_manager", "reactor", "deliberator", "communicator",
                    "conversations"):
            component = agent.components.get(key)
            if component is not None:
                component.stop()
                if isinstance(component, Component):
                    self.scheduler.remove(component)
        communicator = agent.components.get("communicator")
        if communicator is not None and self.router is not None:
            self.router.unregister(agent.name)
        self.agents.pop(agent.name, None)
        self.trace(agent.name, "agent-killed", Atom(agent.name))

    # -- tracing --

    def trace(self, agent: str, kind: str, payload: Term) -> None:
        if self.tracer is not None:
            self.tracer(self.scheduler.tick, agent, kind, payload)


class AgentFactory:
    """Template assembly sequence with overridable init hooks.

    `build` runs the fixed order — mental state, perception, reaction,
    deliberation, communication — and each hook may be overridden to
    customize how that component family is initialized.
    """

    def build(self, kernel: Kernel, spec: AgentSpec, base: BaseObject,
              env: object) -> AgentHandle:
        handle = AgentHandle(kernel, spec, base, env)
        self.init_mental_state(kernel, handle)
        self.init_bus(kernel, handle)
        if spec.perception:
            self.init_perception(kernel, handle)
        if spec.reaction:
            self.init_reaction(kernel, handle)
        if spec.deliberation:
            self.init_deliberation(kernel, handle)
        if spec.communication:
            self.init_communication(kernel, handle)
        from .deliberate import InternalEvent
        handle.bus.publish(InternalEvent("AgentStarted", Atom(spec.name)))
        kernel.trace(spec.name, "agent-started", Atom(spec.name))
        return handle

    def init_mental_state(self, kernel: Kernel, handle: AgentHandle) -> None:
        spec = handle.spec
        for module, text in spec.clause_modules.items():
            handle.mental_state.load_text(module, text)
        if spec.initial_beliefs:
            handle.mental_state.load_text("beliefs", spec.initial_beliefs)
        context = SolveContext(
            skill_caller=lambda holder, selector, args: kernel.invoke_skill(
                holder, selector, list(args)),
            holder_resolver=kernel.holder,
            agent_base=handle.base,
        )
        handle.engine = Engine(depth_limit=spec.depth_limit, context=context)

    def init_bus(self, kernel: Kernel, handle: AgentHandle) -> None:
        from .deliberate import EventBus
        handle.bus = EventBus(handle, kernel.scheduler)
        handle.mental_state.observe(
            lambda module, kind, term: handle.bus.publish_belief_change(module, kind, term))

    def init_perception(self, kernel: Kernel, handle: AgentHandle) -> None:
        from .percept import SituationManager
        manager = SituationManager(handle)
        handle.components["situation_manager"] = manager
        kernel.scheduler.add(manager)

    def init_reaction(self, kernel: Kernel, handle: AgentHandle) -> None:
        from .react import Reactor
        reactor = Reactor(handle, handle.spec.reactions)
        handle.components["reactor"] = reactor
        kernel.scheduler.add(reactor)
        handle.bus.subscribe(reactor, {"SituationDetected"}, kind="reactor")

    def init_deliberation(self, kernel: Kernel, handle: AgentHandle) -> None:
        from .deliberate import Deliberator
        deliberator = Deliberator(handle, handle.spec.knowledge_sources)
        handle.components["deliberator"] = deliberator

    def init_communication(self, kernel: Kernel, handle: AgentHandle) -> None:
        from .comms import Communicator
        communicator = Communicator(handle, kernel.router)
        handle.components["communicator"] = communicator
        kernel.scheduler.add(communicator)
        if handle.spec.conversation_classes:
            from .conv import ConversationEngine
            conversations = ConversationEngine(handle, handle.spec.conversation_classes)
            handle.components["conversations"] = conversations
            kernel.scheduler.add(conversations)


def skill_table(obj: object, selectors: list[str]) -> dict[str, Callable]:
    """Collect bound methods into a skill table."""
    return {sel: getattr(obj, sel) for sel in selectors}
