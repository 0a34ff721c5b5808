"""The forklift demo: move every box onto a shelf.

Forklifts are hybrid agents: a reaction grasps whatever box shows up in
front (guarded by not holding one), a distance-reduction knowledge
source navigates, and a small deterministic pilot picks targets and
drives the perceive/act loop. World truth lives in the grid; agents act
on beliefs maintained through perception.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import SkillFailed
from ..kernel import AgentHandle, AgentSpec, Kernel, KSDescriptor
from ..logic import Atom, Clause, Compound, Number, Variable, list_items, parse_term
from ..percept import PerceivedEvent, register_perceptor
from ..react import Reaction, assert_effect, retract_effect
from .grid import DELTAS, GridWorld, forklift_base
from .queens import RunReport

BOX_IN_FRONT = """
% a box sits exactly on the cell the forklift is facing
situation(boxInFront, Box) :-
    location(box(Box), X, Y),
    newInstance(point, [X, Y], Front),
    baseObject(Base),
    send(Base, nextLocation, [], Front).
"""

GRASP_REACTION = Reaction(
    name="graspBox0",
    situation_name="boxInFront",
    precondition="not(holding(_))",
    selector="graspBox",
    args=("Box",),
    effects=(assert_effect("holding(Box)"),
             retract_effect("location(box(Box), _, _)")),
)


@dataclass
class ForkliftSpec:
    name: str
    position: tuple[int, int]
    heading: str = "n"
    knowledge_sources: tuple[KSDescriptor, ...] = (KSDescriptor("goto-xy"),)


@dataclass
class ForksConfig:
    width: int
    height: int
    boxes: dict[str, tuple[int, int]] = field(default_factory=dict)
    shelves: list[tuple[int, int]] = field(default_factory=list)
    walls: list[tuple[int, int]] = field(default_factory=list)
    trucks: list[tuple[int, int]] = field(default_factory=list)
    forklifts: list[ForkliftSpec] = field(default_factory=list)
    ticks: int = 600
    seed: int = 1
    known_layout: bool = True
    situations_text: str = BOX_IN_FRONT
    reactions: tuple[Reaction, ...] = (GRASP_REACTION,)

    def build_grid(self) -> GridWorld:
        grid = GridWorld(self.width, self.height)
        for cell in self.walls:
            grid.place_wall(cell)
        for cell in self.shelves:
            grid.place_shelf(cell)
        for cell in self.trucks:
            grid.place_truck(cell)
        for box_id, cell in self.boxes.items():
            grid.place_box(box_id, cell)
        for spec in self.forklifts:
            grid.add_agent(spec.name, spec.position, spec.heading)
        return grid

    def layout_beliefs(self) -> str:
        """Seed text for a forklift that knows the floor plan."""
        facts = []
        for box_id, (x, y) in sorted(self.boxes.items()):
            facts.append(f"location(box({box_id}), {x}, {y}).")
        for x, y in sorted(self.shelves):
            facts.append(f"shelf({x}, {y}).")
        for x, y in sorted(self.walls):
            facts.append(f"wall({x}, {y}).")
        for x, y in sorted(self.trucks):
            facts.append(f"truck({x}, {y}).")
        return "\n".join(facts)


def perceive_belief_updater(agent: AgentHandle, event: PerceivedEvent) -> None:
    """Fold a perceive result into beliefs: pose replaced, cells refreshed."""
    if event.selector != "perceive" or event.result is None:
        return
    facts = list_items(event.result)
    if facts is None:
        return
    state = agent.mental_state
    state.retract_clause("beliefs", parse_term("at(_, _)"))
    state.retract_clause("beliefs", parse_term("heading(_)"))
    for fact in facts:
        if not isinstance(fact, Compound):
            continue
        if fact.functor == "clear":
            x, y = fact.args
            while state.retract_clause(
                    "beliefs", Compound("location", (parse_term("box(_)"), x, y))):
                pass
            continue
        if fact.functor == "location":
            x, y = fact.args[1], fact.args[2]
            while state.retract_clause(
                    "beliefs", Compound("location", (parse_term("box(_)"), x, y))):
                pass
        if agent.engine.ask(fact, state) is None:
            state.assert_clause("beliefs", Clause(fact))


class ForkliftPilot:
    """Deterministic target chooser and drive loop for one forklift.

    Navigation goes through the goto knowledge source; grasping happens
    reactively when perception puts a box in front. The pilot only reads
    beliefs and the agent's own pose skills, never the grid.
    """

    GRASP_PATIENCE = 6
    MAX_RETRIES = 3

    def __init__(self, agent: AgentHandle, config: ForksConfig):
        self.agent = agent
        self.config = config
        self.phase = "idle"
        self.target: tuple | None = None  # (kind, box_id, cell, approach)
        self.goal = None
        self.grasp_wait = 0
        self.retries: dict[tuple, int] = {}
        self.unreachable: set[tuple] = set()

    # -- belief and pose access --

    def pose(self) -> tuple[int, int, str]:
        point = self.agent.invoke("location")
        heading = self.agent.invoke("heading")
        return point.args[0].value, point.args[1].value, heading.name

    def holding(self) -> str | None:
        solution = self.agent.ask("holding(B)")
        return solution[Variable("B")].name if solution else None

    def known_boxes(self) -> list[tuple[str, tuple[int, int]]]:
        out = []
        for solution in self.agent.solve("location(box(B), X, Y)"):
            out.append((solution[Variable("B")].name,
                        (solution[Variable("X")].value, solution[Variable("Y")].value)))
        return sorted(out)

    def blocked_cell(self, cell: tuple[int, int]) -> bool:
        x, y = cell
        if not (0 <= x < self.config.width and 0 <= y < self.config.height):
            return True
        for functor in ("wall", "shelf", "truck"):
            if self.agent.ask(Compound(functor, (Number(x), Number(y)))) is not None:
                return True
        return self.agent.ask(
            Compound("location", (parse_term("box(_)"), Number(x), Number(y)))
        ) is not None

    def approach_cells(self, cell: tuple[int, int]) -> list[tuple[int, int]]:
        x, y = cell
        cells = [(x + dx, y + dy) for dx, dy in DELTAS.values()]
        ax, ay, _ = self.pose()
        free = [c for c in cells if c == (ax, ay) or not self.blocked_cell(c)]
        free.sort(key=lambda c: (abs(c[0] - ax) + abs(c[1] - ay), c))
        return free

    # -- drive loop --

    def drive(self) -> None:
        self.agent.invoke("perceive")
        carried = self.holding()
        if carried and self.target and self.target[0] == "box":
            self._abandon_goal()  # a reactive grasp satisfied us mid-route
            self.phase = "idle"
        handler = getattr(self, f"_phase_{self.phase}")
        handler(carried)

    def _phase_idle(self, carried: str | None) -> None:
        if carried:
            self._pick_shelf_target()
        else:
            self._pick_box_target()

    def _phase_navigating(self, carried: str | None) -> None:
        if self.goal is None:
            self.phase = "idle"
            return
        if self.goal.status == "achieved":
            self.phase = "aligning"
        elif self.goal.status in ("blocked", "dropped"):
            self._retry_or_mark_unreachable()

    def _phase_aligning(self, carried: str | None) -> None:
        if self.target is None:
            self.phase = "idle"
            return
        x, y, heading = self.pose()
        tx, ty = self.target[2]
        desired = self._heading_toward((x, y), (tx, ty))
        if desired is None:
            self.phase = "idle"  # drifted; re-decide
            return
        if heading != desired:
            self._turn_toward(heading, desired)
            return
        if self.target[0] == "box":
            self.phase = "grasping"
            self.grasp_wait = 0
        else:
            self._try_put()

    def _phase_grasping(self, carried: str | None) -> None:
        if carried:
            self.phase = "idle"
            return
        self.grasp_wait += 1
        box_cell = self.target[2] if self.target else None
        if self.grasp_wait > self.GRASP_PATIENCE:
            # the box vanished (someone else got it) or we drifted
            self.target = None
            self.phase = "idle"

    def _phase_putting(self, carried: str | None) -> None:
        self.phase = "idle"

    # -- helpers --

    def _heading_toward(self, origin, target) -> str | None:
        dx, dy = target[0] - origin[0], target[1] - origin[1]
        for heading, delta in DELTAS.items():
            if (dx, dy) == delta:
                return heading
        return None

    def _turn_toward(self, current: str, desired: str) -> None:
        order = ("n", "e", "s", "w")
        diff = (order.index(desired) - order.index(current)) % 4
        self.agent.invoke("turnLeft" if diff == 3 else "turnRight")

    def _try_put(self) -> None:
        try:
            outcome = self.agent.invoke("putBox")
        except SkillFailed:
            self.target = None
            self.phase = "idle"
            return
        carried = self.holding()
        if carried:
            state = self.agent.mental_state
            state.retract_clause("beliefs", parse_term(f"holding({carried})"))
            if outcome == Atom("shelved"):
                state.assert_clause("beliefs", parse_term(f"shelved({carried})"))
        self.target = None
        self.phase = "idle"

    def _deliberator(self):
        return self.agent.components["deliberator"]

    def _post_goal(self, cell: tuple[int, int]) -> None:
        self.goal = self._deliberator().post_goal(f"at({cell[0]}, {cell[1]})")
        self.phase = "navigating"

    def _abandon_goal(self) -> None:
        if self.goal is not None and self.goal.status == "committed":
            self._deliberator().drop_goal(self.goal.id)
        self.goal = None

    def _retry_or_mark_unreachable(self) -> None:
        key = self.target
        self.retries[key] = self.retries.get(key, 0) + 1
        if self.retries[key] > self.MAX_RETRIES:
            self.unreachable.add(key)
            self.target = None
            self.phase = "idle"
            self.goal = None
            return
        self.phase = "idle"  # re-decide; possibly a different approach cell

    def _pick_box_target(self) -> None:
        ax, ay, _ = self.pose()
        options = []
        for box_id, cell in self.known_boxes():
            for approach in self.approach_cells(cell):
                key = ("box", box_id, cell, approach)
                if key in self.unreachable:
                    continue
                distance = abs(cell[0] - ax) + abs(cell[1] - ay)
                options.append((distance, box_id, cell, approach))
                break
        if not options:
            return
        options.sort()
        _, box_id, cell, approach = options[0]
        self.target = ("box", box_id, cell, approach)
        if (ax, ay) == approach:
            self.phase = "aligning"
        else:
            self._post_goal(approach)

    def _pick_shelf_target(self) -> None:
        ax, ay, _ = self.pose()
        options = []
        for solution in self.agent.solve("shelf(X, Y)"):
            cell = (solution[Variable("X")].value, solution[Variable("Y")].value)
            for approach in self.approach_cells(cell):
                key = ("shelf", None, cell, approach)
                if key in self.unreachable:
                    continue
                distance = abs(cell[0] - ax) + abs(cell[1] - ay)
                options.append((distance, cell, approach))
                break
        if not options:
            return
        options.sort()
        _, cell, approach = options[0]
        self.target = ("shelf", None, cell, approach)
        if (ax, ay) == approach:
            self.phase = "aligning"
        else:
            self._post_goal(approach)


def build_forklift_agent(kernel: Kernel, grid: GridWorld, spec: ForkliftSpec,
                         config: ForksConfig) -> AgentHandle:
    base = forklift_base(grid, spec.name)
    beliefs = config.layout_beliefs() if config.known_layout else ""
    agent_spec = AgentSpec(
        name=spec.name,
        perception=True,
        reaction=True,
        deliberation=True,
        situation_modules=("situations",),
        clause_modules={"situations": config.situations_text},
        reactions=config.reactions,
        knowledge_sources=spec.knowledge_sources,
        initial_beliefs=beliefs,
    )
    handle = kernel.create_agent(agent_spec, base, env=grid)
    register_perceptor(handle, spec.name, selector_filter={"perceive"},
                       belief_updater=perceive_belief_updater)
    return handle


def run_forks(config: ForksConfig, seed: int | None = None, tracer=None,
              free_running: bool = False) -> RunReport:
    """Run until every box is shelved or the tick cap hits.

    Deterministic mode drives everything through the seeded round-robin
    scheduler; free-running mode pumps each component with its own
    thread (no reproducibility guarantees).
    """
    grid = config.build_grid()
    kernel = Kernel(seed=seed if seed is not None else config.seed, env=grid)
    if tracer is not None:
        kernel.tracer = tracer
    total_boxes = len(config.boxes)
    agents = [build_forklift_agent(kernel, grid, spec, config)
              for spec in config.forklifts]
    pilots = [ForkliftPilot(agent, config) for agent in agents]

    from .grid import render_grid
    if total_boxes == 0:
        return RunReport(outcome="solved", ticks=0, messages=0, placement={},
                         detail="no boxes to move", snapshot=render_grid(grid))

    pump = None
    if free_running:
        import time
        from ..kernel import ThreadPump
        pump = ThreadPump(kernel.scheduler)
        pump.start()

    outcome = "tick-limit"
    try:
        while kernel.scheduler.tick < config.ticks:
            for pilot in pilots:
                pilot.drive()
            if free_running:
                kernel.scheduler.tick += 1
                time.sleep(0.002)
            else:
                kernel.scheduler.run_round()
            floor, carried, shelved = grid.box_census()
            assert floor + carried + shelved == total_boxes, "box conservation violated"
            kernel.trace("world", "census",
                         Compound("boxes", (Number(floor), Number(carried),
                                            Number(shelved))))
            if shelved == total_boxes:
                outcome = "solved"
                break
    finally:
        if pump is not None:
            pump.stop()
    return RunReport(outcome=outcome, ticks=kernel.scheduler.tick, messages=0,
                     detail=f"shelved {len(grid.shelved)}/{total_boxes}",
                     snapshot=render_grid(grid))


def default_config() -> ForksConfig:
    return ForksConfig(
        width=7, height=5,
        boxes={"b1": (4, 1), "b2": (2, 2), "b3": (5, 3)},
        shelves=[(0, 4), (1, 4)],
        trucks=[(6, 0)],
        forklifts=[ForkliftSpec("f1", (0, 0), "e"),
                   ForkliftSpec("f2", (6, 4), "w")],
        ticks=600,
    )
