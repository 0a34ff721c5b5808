"""Concurrent deliberation: event bus, knowledge sources, plans, executor.

Every knowledge source is an independently scheduled task subscribed to
internal events; plans are produced and consumed through the bus. The
distance-reduction template interleaves planning and execution: each
cycle builds a small step batch, the executor runs it, and the next
cycle starts from the new state until the goal distance reaches zero.
"""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass

from .errors import HotSpotUndefined, InvalidatedPlan, NoPlanFound, SkillFailed
from .kernel import AgentHandle, Component, KSDescriptor, Scheduler
from .logic import (
    Atom,
    Clause,
    Compound,
    Engine,
    MentalStateView,
    Number,
    Substitution,
    Term,
    make_list,
    parse_term,
    struct,
    unify,
    variables,
    write_term,
)
from .react import Effect

log = logging.getLogger(__name__)

# v1 event vocabulary; extensible through register_internal_event_kind.
INTERNAL_EVENT_KINDS: set[str] = {
    "GoalCommitted", "GoalAchieved", "GoalDropped", "PerceptionArrived",
    "SituationDetected", "BeliefChanged", "PlanProduced", "PlanInvalidated",
    "PlanAdapted", "ActionExecuted", "ActionFailed", "MessageReceived",
    "MessageSent", "ConversationAdvanced", "AgentStarted", "AgentKilled",
}

CONTROL_EVENT_KINDS: set[str] = {
    "Kill", "Wait", "Resume", "AchieveGoal", "DropGoal", "TakePlan", "YieldPlan",
}


def register_internal_event_kind(name: str) -> None:
    INTERNAL_EVENT_KINDS.add(name)


def register_control_event_kind(name: str) -> None:
    CONTROL_EVENT_KINDS.add(name)


@dataclass(frozen=True)
class InternalEvent:
    """Something that happened inside an agent, visible on its bus."""

    kind: str
    payload: Term
    data: object = None  # in-process companion object (occurrence, plan, ...)

    def __post_init__(self):
        if self.kind not in INTERNAL_EVENT_KINDS:
            raise ValueError(f"unregistered internal event kind: {self.kind}")


@dataclass(frozen=True)
class ControlEvent:
    """A directive between reasoning components (kill, wait, take a plan...)."""

    kind: str
    target_ks: str = ""
    payload: object = None

    def __post_init__(self):
        if self.kind not in CONTROL_EVENT_KINDS:
            raise ValueError(f"unregistered control event kind: {self.kind}")


class EventBus:
    """Fan-out with a private FIFO per subscriber; delivery is exactly once."""

    def __init__(self, handle: AgentHandle, scheduler: Scheduler):
        self.handle = handle
        self.scheduler = scheduler
        self.subscribers: list[tuple[Component, frozenset[str], str]] = []
        self.closed = False

    def subscribe(self, component: Component, kinds: Iterable[str],
                  kind: str = "knowledge-source") -> None:
        kind_set = frozenset(kinds)
        unknown = kind_set - INTERNAL_EVENT_KINDS
        if unknown:
            raise ValueError(f"unregistered event kinds: {sorted(unknown)}")
        self.subscribers.append((component, kind_set, kind))

    def publish(self, event: InternalEvent) -> None:
        if self.closed:
            return
        self.handle.kernel.trace(self.handle.name, f"event:{event.kind}", event.payload)
        for component, kinds, _ in self.subscribers:
            if event.kind in kinds:
                component.enqueue(event)

    def publish_belief_change(self, module: str, op: str, term: Term) -> None:
        payload = struct("change", Atom(module), Atom(op), term)
        self.publish(InternalEvent("BeliefChanged", payload, data=(module, op, term)))

    def close(self) -> None:
        self.closed = True


@dataclass
class Goal:
    """Something the agent committed to bring about."""

    id: str
    expression: Term
    status: str = "pending"  # pending|committed|achieved|dropped|blocked

    def term(self) -> Term:
        return struct("goal", Atom(self.id), self.expression)


@dataclass(frozen=True)
class ActionStep:
    """One skill invocation plus its expected belief-level effects."""

    selector: str
    args: tuple[Term, ...] = ()
    effects: tuple[Effect, ...] = ()
    requires: tuple[Term, ...] = ()  # facts that must hold for applicability

    def term(self) -> Term:
        return struct("step", Atom(self.selector), make_list(list(self.args)))

    def substitute(self, bindings: Substitution) -> "ActionStep":
        return ActionStep(
            self.selector,
            tuple(bindings.resolve(a) for a in self.args),
            tuple(Effect(e.kind, bindings.resolve(e.template), e.module, e.receiver)
                  for e in self.effects),
            tuple(bindings.resolve(r) for r in self.requires),
        )


@dataclass
class PartialPlan:
    """An incomplete course of action for one goal."""

    id: str
    goal_id: str
    steps: tuple[ActionStep, ...]
    status: str = "open"  # open|executing|invalidated|done

    def term(self) -> Term:
        return struct("plan", Atom(self.id), Atom(self.goal_id), Number(len(self.steps)))


class KnowledgeSource(Component):
    """A reasoning task on the bus; subclasses state their subscriptions."""

    subscriptions: frozenset[str] = frozenset()

    def __init__(self, handle: AgentHandle, ks_id: str, kind: str):
        super().__init__(f"ks:{handle.name}:{ks_id}", owner=handle.name)
        self.agent = handle
        self.ks_id = ks_id
        self.kind = kind

    def handle(self, item) -> None:
        if isinstance(item, ControlEvent):
            self.on_control(item)
        else:
            self.on_event(item)

    def on_event(self, event: InternalEvent) -> None:  # pragma: no cover
        raise NotImplementedError

    def on_control(self, event: ControlEvent) -> None:
        self.control(event.kind)


class Executor(Component):
    """Runs plans step by step through the kernel dispatch point.

    Effects declared on a step apply to beliefs only after the skill
    succeeded; a failing skill invalidates the rest of the plan.
    """

    def __init__(self, handle: AgentHandle):
        super().__init__(f"executor:{handle.name}", owner=handle.name)
        self.agent = handle

    def take(self, plan: PartialPlan) -> None:
        self.enqueue(plan)

    def handle(self, item) -> None:
        if isinstance(item, ControlEvent):
            if item.kind == "TakePlan" and isinstance(item.payload, PartialPlan):
                self.execute(item.payload)
            else:
                self.control(item.kind)
            return
        try:
            self.execute(item)
        except InvalidatedPlan:
            log.info("executor %s skipped invalidated plan %s", self.name, item.id)

    def execute(self, plan: PartialPlan) -> None:
        if plan.status == "invalidated":
            raise InvalidatedPlan(plan.id)
        bus = self.agent.bus
        plan.status = "executing"
        total = len(plan.steps)
        for index, step in enumerate(plan.steps):
            try:
                self.agent.invoke(step.selector, *step.args)
            except SkillFailed as failure:
                plan.status = "invalidated"
                bus.publish(InternalEvent(
                    "ActionFailed",
                    struct("action", Atom(plan.id), Number(index), step.term(),
                           Atom(failure.reason)),
                    data=(plan, index, step)))
                bus.publish(InternalEvent("PlanInvalidated", plan.term(), data=plan))
                return
            self._apply_effects(step)
            last = index == total - 1
            bus.publish(InternalEvent(
                "ActionExecuted",
                struct("action", Atom(plan.id), Number(index), step.term(),
                       Atom("last") if last else Atom("more")),
                data=(plan, index, step)))
        plan.status = "done"

    def _apply_effects(self, step: ActionStep) -> None:
        for effect in step.effects:
            if effect.kind == "assert":
                self.agent.mental_state.assert_clause(effect.module, Clause(effect.template))
            elif effect.kind == "retract":
                self.agent.mental_state.retract_clause(effect.module, effect.template)


class PlanAdapter(KnowledgeSource):
    """Keeps open plans consistent with belief changes.

    The default policy drops leading steps whose expected effects already
    hold and invalidates a plan when a fact required by one of its steps
    is retracted.
    """

    subscriptions = frozenset({"PlanProduced", "BeliefChanged"})

    def __init__(self, handle: AgentHandle, ks_id: str = "adapter"):
        super().__init__(handle, ks_id, "plan-adapter")
        self.open_plans: list[PartialPlan] = []

    def on_event(self, event: InternalEvent) -> None:
        if event.kind == "PlanProduced":
            plan = event.data
            if isinstance(plan, PartialPlan):
                self.open_plans.append(plan)
            return
        change = event.data
        for plan in list(self.open_plans):
            if plan.status != "open":
                self.open_plans.remove(plan)
                continue
            adapted = self.adapt_plan(plan, change)
            if adapted.status == "invalidated":
                self.open_plans.remove(adapted)

    def adapt_plan(self, plan: PartialPlan, change: tuple[str, str, Term]) -> PartialPlan:
        """Repair the plan in place for one belief change."""
        module, op, term = change
        if op == "retract":
            for step in plan.steps:
                for required in step.requires:
                    if unify(required, term) is not None:
                        plan.status = "invalidated"
                        self.agent.bus.publish(InternalEvent(
                            "PlanInvalidated", plan.term(), data=plan))
                        return plan
        view = self.agent.mental_state.snapshot()
        steps = list(plan.steps)
        dropped = False
        while steps and self._effects_hold(steps[0], view):
            steps.pop(0)
            dropped = True
        if dropped and steps:
            plan.steps = tuple(steps)
            self.agent.bus.publish(InternalEvent("PlanAdapted", plan.term(), data=plan))
        return plan

    def _effects_hold(self, step: ActionStep, view: MentalStateView) -> bool:
        if not step.effects:
            return False
        engine = self.agent.engine
        for effect in step.effects:
            proved = engine.ask(effect.template, view, module_order=[effect.module])
            if effect.kind == "assert" and proved is None:
                return False
            if effect.kind == "retract" and proved is not None:
                return False
        return True


class DistanceReductionKS(KnowledgeSource):
    """Template: repeatedly shrink a goal-distance metric to zero.

    Subclasses supply the two hot-spots, `distance` and `get_plan_for`;
    `get_plan` drives one plan/execute cycle per invocation. After three
    consecutive non-improving cycles the goal is marked blocked and a
    PlanInvalidated event fires.
    """

    subscriptions = frozenset({"GoalCommitted", "ActionExecuted", "ActionFailed"})
    goal_functor: str | None = None  # take any goal when None

    def __init__(self, handle: AgentHandle, ks_id: str = "distance-reduction"):
        super().__init__(handle, ks_id, "distance-reduction")
        self.active: dict[str, Goal] = {}
        self.best_distance: dict[str, float] = {}
        self.stale_cycles: dict[str, int] = {}
        self._plan_seq = 0

    # hot-spots
    def distance(self, state, goal: Goal) -> float:
        raise HotSpotUndefined(f"{type(self).__name__}.distance")

    def get_plan_for(self, state, goal: Goal) -> PartialPlan:
        raise HotSpotUndefined(f"{type(self).__name__}.get_plan_for")

    def accepts(self, goal: Goal) -> bool:
        if self.goal_functor is None:
            return True
        expr = goal.expression
        return (isinstance(expr, Compound) and expr.functor == self.goal_functor) or (
            isinstance(expr, Atom) and expr.name == self.goal_functor)

    def new_plan(self, goal: Goal, steps: Iterable[ActionStep]) -> PartialPlan:
        self._plan_seq += 1
        return PartialPlan(f"{self.ks_id}-p{self._plan_seq}", goal.id, tuple(steps))

    def get_plan(self, goal: Goal, state) -> PartialPlan | None:
        """One template cycle: measure, stop at zero, else plan a step batch."""
        if type(self).distance is DistanceReductionKS.distance:
            raise HotSpotUndefined(f"{type(self).__name__}.distance")
        if type(self).get_plan_for is DistanceReductionKS.get_plan_for:
            raise HotSpotUndefined(f"{type(self).__name__}.get_plan_for")
        d = float(self.distance(state, goal))
        self.agent.kernel.trace(self.agent.name, "distance",
                                struct("distance", Atom(goal.id), Number(d)))
        if d == 0.0:
            goal.status = "achieved"
            self.active.pop(goal.id, None)
            self.agent.bus.publish(InternalEvent("GoalAchieved", goal.term(), data=goal))
            return None
        best = self.best_distance.get(goal.id)
        if best is not None and d >= best:
            self.stale_cycles[goal.id] = self.stale_cycles.get(goal.id, 0) + 1
            if self.stale_cycles[goal.id] >= 3:
                goal.status = "blocked"
                self.active.pop(goal.id, None)
                self.agent.bus.publish(InternalEvent("PlanInvalidated", goal.term(),
                                                     data=goal))
                return None
        else:
            self.best_distance[goal.id] = d
            self.stale_cycles[goal.id] = 0
        plan = self.get_plan_for(state, goal)
        if not plan.steps:
            raise ValueError("get_plan_for must return a nonempty step batch")
        self.agent.bus.publish(InternalEvent("PlanProduced", plan.term(), data=plan))
        return plan

    # bus wiring: one cycle on commitment, next cycle when the batch finished
    def on_event(self, event: InternalEvent) -> None:
        if event.kind == "GoalCommitted":
            goal = event.data
            if isinstance(goal, Goal) and self.accepts(goal) and goal.status == "committed":
                self.active[goal.id] = goal
                self.cycle(goal)
            return
        plan, index, step = event.data
        goal = self.active.get(plan.goal_id)
        if goal is None or goal.status != "committed":
            return
        if event.kind == "ActionFailed" or index == len(plan.steps) - 1:
            self.cycle(goal)

    def cycle(self, goal: Goal) -> None:
        plan = self.get_plan(goal, self.agent)
        if plan is not None:
            self._executor().take(plan)

    def _executor(self) -> Executor:
        return self.agent.components["deliberator"].executor


HEADINGS = ("n", "e", "s", "w")  # clockwise; east is +x, north is +y
_DELTAS = {"n": (0, 1), "e": (1, 0), "s": (0, -1), "w": (-1, 0)}


def heading_delta(heading: str) -> tuple[int, int]:
    return _DELTAS[heading]


class GotoXY(DistanceReductionKS):
    """Navigate a grid agent to a target cell.

    distance is the Euclidean distance from the agent to the goal;
    get_plan_for produces a rotate-toward-goal plus one advance. The
    rotation picks the axis with the larger remaining delta (ties favor
    x) and turns through the shorter left/right sequence.
    """

    goal_functor = "at"

    def __init__(self, handle: AgentHandle, ks_id: str = "goto-xy",
                 location_selector: str = "location", heading_selector: str = "heading"):
        super().__init__(handle, ks_id)
        self.location_selector = location_selector
        self.heading_selector = heading_selector

    def _position(self) -> tuple[int, int, str]:
        point = self.agent.invoke(self.location_selector)
        heading = self.agent.invoke(self.heading_selector)
        x, y = point.args[0].value, point.args[1].value
        return x, y, heading.name

    @staticmethod
    def _target(goal: Goal) -> tuple[int, int]:
        gx, gy = goal.expression.args
        return gx.value, gy.value

    def distance(self, state, goal: Goal) -> float:
        x, y, _ = self._position()
        gx, gy = self._target(goal)
        return ((gx - x) ** 2 + (gy - y) ** 2) ** 0.5

    def get_plan_for(self, state, goal: Goal) -> PartialPlan:
        x, y, heading = self._position()
        gx, gy = self._target(goal)
        dx, dy = gx - x, gy - y
        if abs(dx) >= abs(dy):
            desired = "e" if dx > 0 else "w"
        else:
            desired = "n" if dy > 0 else "s"
        steps = [ActionStep(selector)
                 for selector in rotation_steps(heading, desired)]
        steps.append(ActionStep("advance"))
        return self.new_plan(goal, steps)


def rotation_steps(current: str, desired: str) -> list[str]:
    """Shortest turnLeft/turnRight sequence between cardinal headings."""
    diff = (HEADINGS.index(desired) - HEADINGS.index(current)) % 4
    if diff == 0:
        return []
    if diff == 1:
        return ["turnRight"]
    if diff == 3:
        return ["turnLeft"]
    return ["turnRight", "turnRight"]


class DelibStrKS(KnowledgeSource):
    """Produces complete plans with a pluggable planning algorithm.

    The bundled default is a breadth-first forward search over belief
    states using each action's effect templates as the successor
    function; any callable with the same signature can fill the slot.
    """

    subscriptions = frozenset({"GoalCommitted"})

    def __init__(self, handle: AgentHandle, domain: Iterable[ActionStep] = (),
                 planner: Callable | None = None, node_budget: int = 10_000,
                 ks_id: str = "planner", execute: bool = True):
        super().__init__(handle, ks_id, "planner")
        self.domain = tuple(domain)
        self.planner = planner or breadth_first_forward
        self.node_budget = node_budget
        self.execute = execute
        self._plan_seq = 0

    def on_event(self, event: InternalEvent) -> None:
        goal = event.data
        if not isinstance(goal, Goal) or goal.status != "committed":
            return
        plan = self.run_planner(goal)
        self.agent.bus.publish(InternalEvent("PlanProduced", plan.term(), data=plan))
        if self.execute:
            self.agent.components["deliberator"].executor.take(plan)

    def run_planner(self, goal: Goal, domain: Iterable[ActionStep] | None = None
                    ) -> PartialPlan:
        self._plan_seq += 1
        steps = self.planner(
            goal.expression,
            tuple(domain) if domain is not None else self.domain,
            self.agent.mental_state.snapshot(),
            self.agent.engine,
            self.node_budget,
        )
        return PartialPlan(f"{self.ks_id}-p{self._plan_seq}", goal.id, tuple(steps))


def breadth_first_forward(goal_expr: Term, domain: tuple[ActionStep, ...],
                          view: MentalStateView, engine: Engine,
                          node_budget: int = 10_000) -> tuple[ActionStep, ...]:
    """BFS over ground belief states; returns the step sequence to the goal.

    States are fact sets drawn from the beliefs module; an action applies
    wherever its `requires` conjunction is provable, and its effect
    templates produce the successor state.
    """
    initial = tuple(clause.head for clause in view.get("beliefs", ())
                    if clause.is_fact)

    def provable(goal: Term, facts: tuple[Term, ...]) -> bool:
        fact_view = MentalStateView({"state": tuple(Clause(f) for f in facts)})
        return engine.ask(goal, fact_view, module_order=["state"]) is not None

    def groundings(step: ActionStep, facts: tuple[Term, ...]) -> list[ActionStep]:
        if not step.requires:
            return [step]
        fact_view = MentalStateView({"state": tuple(Clause(f) for f in facts)})
        goal: Term = step.requires[0]
        for extra in step.requires[1:]:
            goal = Compound(",", (goal, extra))
        out = []
        for solution in engine.solve(goal, fact_view, module_order=["state"]):
            out.append(step.substitute(solution))
        return out

    def apply(step: ActionStep, facts: tuple[Term, ...]) -> tuple[Term, ...] | None:
        next_facts = list(facts)
        for effect in step.effects:
            if effect.kind == "retract":
                for fact in next_facts:
                    if unify(effect.template, fact) is not None:
                        next_facts.remove(fact)
                        break
            elif effect.kind == "assert":
                if variables(effect.template):
                    return None  # effects must instantiate fully
                if effect.template not in next_facts:
                    next_facts.append(effect.template)
        return tuple(sorted(next_facts, key=write_term))

    start = tuple(sorted(initial, key=write_term))
    if provable(goal_expr, start):
        return ()
    frontier: deque[tuple[tuple[Term, ...], tuple[ActionStep, ...]]] = deque()
    frontier.append((start, ()))
    visited = {start}
    expanded = 0
    while frontier:
        facts, path = frontier.popleft()
        expanded += 1
        if expanded > node_budget:
            break
        candidates: list[ActionStep] = []
        for template in domain:
            candidates.extend(groundings(template, facts))
        candidates.sort(key=lambda s: write_term(s.term()))
        for step in candidates:
            next_facts = apply(step, facts)
            if next_facts is None or next_facts in visited:
                continue
            next_path = (*path, step)
            if provable(goal_expr, next_facts):
                return next_path
            visited.add(next_facts)
            frontier.append((next_facts, next_path))
    raise NoPlanFound(write_term(goal_expr))


KS_REGISTRY: dict[str, Callable[[AgentHandle, Mapping], KnowledgeSource]] = {}


def register_knowledge_source(kind: str, factory) -> None:
    KS_REGISTRY[kind] = factory


register_knowledge_source(
    "goto-xy",
    lambda handle, params: GotoXY(
        handle,
        ks_id=params.get("id", "goto-xy"),
        location_selector=params.get("location_selector", "location"),
        heading_selector=params.get("heading_selector", "heading"),
    ),
)
register_knowledge_source(
    "forward-planner",
    lambda handle, params: DelibStrKS(
        handle,
        domain=params.get("domain", ()),
        node_budget=int(params.get("node_budget", 10_000)),
        ks_id=params.get("id", "planner"),
    ),
)


class Deliberator:
    """Per-agent deliberation facade: goal store, executor, knowledge sources."""

    def __init__(self, handle: AgentHandle, descriptors: Iterable[KSDescriptor] = ()):
        self.agent = handle
        self.goals: dict[str, Goal] = {}
        self._goal_seq = 0
        scheduler = handle.kernel.scheduler
        self.executor = Executor(handle)
        scheduler.add(self.executor)
        self.adapter = PlanAdapter(handle)
        scheduler.add(self.adapter)
        handle.bus.subscribe(self.adapter, PlanAdapter.subscriptions)
        self.knowledge_sources: list[KnowledgeSource] = [self.adapter]
        for descriptor in descriptors:
            factory = KS_REGISTRY[descriptor.kind]
            ks = factory(handle, dict(descriptor.params))
            self.add_knowledge_source(ks)

    def add_knowledge_source(self, ks: KnowledgeSource) -> None:
        self.knowledge_sources.append(ks)
        self.agent.kernel.scheduler.add(ks)
        self.agent.bus.subscribe(ks, ks.subscriptions)

    def post_goal(self, goal: Goal | Term | str) -> Goal:
        """Store the goal and announce the commitment on the bus."""
        if not isinstance(goal, Goal):
            expression = parse_term(goal) if isinstance(goal, str) else goal
            self._goal_seq += 1
            goal = Goal(f"g{self._goal_seq}", expression)
        goal.status = "committed"
        self.goals[goal.id] = goal
        self.agent.bus.publish(InternalEvent("GoalCommitted", goal.term(), data=goal))
        return goal

    def drop_goal(self, goal_id: str) -> None:
        goal = self.goals.get(goal_id)
        if goal is None or goal.status in ("dropped", "achieved"):
            return
        goal.status = "dropped"
        self.agent.bus.publish(InternalEvent("GoalDropped", goal.term(), data=goal))
        adapter = self.adapter
        for plan in list(adapter.open_plans):
            if plan.goal_id == goal_id and plan.status == "open":
                plan.status = "invalidated"
                adapter.open_plans.remove(plan)
                self.agent.bus.publish(InternalEvent("PlanInvalidated", plan.term(),
                                                     data=plan))

    def send_control(self, event: ControlEvent) -> None:
        """Route a control event to its target component."""
        if event.kind == "AchieveGoal":
            self.post_goal(event.payload)
        elif event.kind == "DropGoal":
            self.drop_goal(str(event.payload))
        elif event.kind in ("TakePlan", "YieldPlan"):
            if event.kind == "YieldPlan" and isinstance(event.payload, PartialPlan):
                self.executor.take(event.payload)
            else:
                self.executor.enqueue(event)
        else:
            for ks in self._targets(event.target_ks):
                ks.control(event.kind)

    def _targets(self, ks_id: str) -> list[Component]:
        pool: list[Component] = [self.executor, *self.knowledge_sources]
        if not ks_id:
            return pool
        return [c for c in pool if getattr(c, "ks_id", c.name) == ks_id]

    def stop(self) -> None:
        scheduler = self.agent.kernel.scheduler
        for component in (self.executor, *self.knowledge_sources):
            component.stop()
            scheduler.remove(component)
