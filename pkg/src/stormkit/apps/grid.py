"""Discrete grid world and the forklift skill set.

Coordinates are (x, y) with east = +x and north = +y; headings rotate
clockwise n, e, s, w. Each cell holds at most one entity (wall, box,
shelf, truck); agents occupy cells separately and block each other.
Skills mutate only the grid: belief updates happen upstream through
perception and reactions.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from ..errors import ConfigInvalid, SkillFailed
from ..kernel import BaseObject
from ..logic import Atom, Compound, Number, Term

HEADINGS = ("n", "e", "s", "w")
DELTAS = {"n": (0, 1), "e": (1, 0), "s": (0, -1), "w": (-1, 0)}

Cell = tuple[int, int]


@dataclass
class AgentState:
    position: Cell
    heading: str
    carrying: str | None = None


@dataclass
class GridWorld:
    width: int
    height: int
    occupancy: dict[Cell, tuple] = field(default_factory=dict)
    agents: dict[str, AgentState] = field(default_factory=dict)
    shelved: list[str] = field(default_factory=list)
    # skills may run from several execution contexts in free-running mode
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False,
                                  compare=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigInvalid("grid dimensions must be positive")

    # -- construction --

    def _claim(self, cell: Cell, entity: tuple) -> None:
        if not self.in_bounds(cell):
            raise ConfigInvalid(f"cell {cell} out of bounds")
        if cell in self.occupancy:
            raise ConfigInvalid(f"cell {cell} already holds {self.occupancy[cell]}")
        self.occupancy[cell] = entity

    def place_wall(self, cell: Cell) -> None:
        self._claim(cell, ("wall",))

    def place_box(self, box_id: str, cell: Cell) -> None:
        self._claim(cell, ("box", box_id))

    def place_shelf(self, cell: Cell) -> None:
        self._claim(cell, ("shelf",))

    def place_truck(self, cell: Cell) -> None:
        self._claim(cell, ("truck",))

    def add_agent(self, name: str, cell: Cell, heading: str = "n") -> None:
        if not self.in_bounds(cell):
            raise ConfigInvalid(f"agent {name} out of bounds at {cell}")
        if heading not in HEADINGS:
            raise ConfigInvalid(f"bad heading {heading!r}")
        if cell in self.occupancy or self.agent_at(cell):
            raise ConfigInvalid(f"agent {name} placed on an occupied cell {cell}")
        self.agents[name] = AgentState(cell, heading)

    # -- queries --

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def entity_at(self, cell: Cell) -> tuple | None:
        return self.occupancy.get(cell)

    def agent_at(self, cell: Cell) -> str | None:
        for name, state in self.agents.items():
            if state.position == cell:
                return name
        return None

    def front_cell(self, name: str) -> Cell:
        state = self.agents[name]
        dx, dy = DELTAS[state.heading]
        return state.position[0] + dx, state.position[1] + dy

    def is_free(self, cell: Cell) -> bool:
        return (self.in_bounds(cell) and cell not in self.occupancy
                and self.agent_at(cell) is None)

    def boxes_on_floor(self) -> list[str]:
        return [entity[1] for entity in self.occupancy.values() if entity[0] == "box"]

    def boxes_carried(self) -> list[str]:
        return [state.carrying for state in self.agents.values()
                if state.carrying is not None]

    def box_census(self) -> tuple[int, int, int]:
        with self.lock:
            return (len(self.boxes_on_floor()), len(self.boxes_carried()),
                    len(self.shelved))

    # -- mutation through skills --

    def advance(self, name: str) -> None:
        with self.lock:
            target = self.front_cell(name)
            if not self.is_free(target):
                raise SkillFailed("blocked")
            self.agents[name].position = target

    def turn(self, name: str, direction: str) -> None:
        with self.lock:
            state = self.agents[name]
            offset = 1 if direction == "right" else -1
            state.heading = HEADINGS[(HEADINGS.index(state.heading) + offset) % 4]

    def grasp(self, name: str, box_id: str) -> None:
        with self.lock:
            state = self.agents[name]
            if state.carrying is not None:
                raise SkillFailed("already-holding")
            front = self.front_cell(name)
            entity = self.occupancy.get(front)
            if entity is None or entity[0] != "box" or entity[1] != box_id:
                raise SkillFailed("no-box")
            del self.occupancy[front]
            state.carrying = box_id

    def put(self, name: str) -> str:
        """Put the carried box in front: onto a shelf or an empty cell."""
        with self.lock:
            state = self.agents[name]
            if state.carrying is None:
                raise SkillFailed("not-holding")
            front = self.front_cell(name)
            entity = self.occupancy.get(front)
            box_id = state.carrying
            if entity is not None and entity[0] == "shelf":
                self.shelved.append(box_id)
                state.carrying = None
                return "shelved"
            if self.is_free(front):
                self.occupancy[front] = ("box", box_id)
                state.carrying = None
                return "floor"
            raise SkillFailed("blocked")


def point(x: int, y: int) -> Term:
    return Compound("point", (Number(x), Number(y)))


def render_grid(grid: GridWorld) -> str:
    """ASCII snapshot, top row first: # wall, b box, S shelf, T truck, F agent."""
    with grid.lock:
        rows = []
        for y in range(grid.height - 1, -1, -1):
            row = []
            for x in range(grid.width):
                agent = grid.agent_at((x, y))
                if agent is not None:
                    row.append("F")
                    continue
                entity = grid.entity_at((x, y))
                if entity is None:
                    row.append(".")
                else:
                    row.append({"wall": "#", "box": "b", "shelf": "S",
                                "truck": "T"}[entity[0]])
            rows.append(" ".join(row))
        return "\n".join(rows)


def perceive_facts(grid: GridWorld, name: str) -> list[Term]:
    """Facts for the visible cells: own pose plus the four neighbors."""
    with grid.lock:
        return _perceive_facts_locked(grid, name)


def _perceive_facts_locked(grid: GridWorld, name: str) -> list[Term]:
    state = grid.agents[name]
    x, y = state.position
    facts: list[Term] = [
        Compound("at", (Number(x), Number(y))),
        Compound("heading", (Atom(state.heading),)),
    ]
    for dx, dy in (DELTAS["n"], DELTAS["e"], DELTAS["s"], DELTAS["w"]):
        cell = (x + dx, y + dy)
        cx, cy = Number(cell[0]), Number(cell[1])
        if not grid.in_bounds(cell):
            facts.append(Compound("wall", (cx, cy)))
            continue
        entity = grid.entity_at(cell)
        if entity is None:
            if grid.agent_at(cell) is None:
                facts.append(Compound("clear", (cx, cy)))
            continue
        kind = entity[0]
        if kind == "box":
            facts.append(Compound("location",
                                  (Compound("box", (Atom(entity[1]),)), cx, cy)))
        elif kind == "wall":
            facts.append(Compound("wall", (cx, cy)))
        elif kind == "shelf":
            facts.append(Compound("shelf", (cx, cy)))
        elif kind == "truck":
            facts.append(Compound("truck", (cx, cy)))
    return facts


def forklift_base(grid: GridWorld, name: str) -> BaseObject:
    """The forklift skill table over one grid agent."""

    def advance():
        grid.advance(name)

    def turnLeft():
        grid.turn(name, "left")

    def turnRight():
        grid.turn(name, "right")

    def graspBox(box_id):
        grid.grasp(name, str(box_id))

    def putBox():
        return grid.put(name)

    def perceive():
        return perceive_facts(grid, name)

    def nextLocation():
        return point(*grid.front_cell(name))

    def location():
        return point(*grid.agents[name].position)

    def heading():
        return grid.agents[name].heading

    return BaseObject(name, {
        "advance": advance, "turnLeft": turnLeft, "turnRight": turnRight,
        "graspBox": graspBox, "putBox": putBox, "perceive": perceive,
        "nextLocation": nextLocation, "location": location, "heading": heading,
    })
