"""Shared stubs for component tests: a tiny scripted world and bases."""

from __future__ import annotations

from stormkit.errors import SkillFailed
from stormkit.kernel import AgentSpec, BaseObject, Kernel
from stormkit.logic import Compound, Number

BOX_IN_FRONT_CLAUSES = """
situation(boxInFront, Box) :-
    location(box(Box), X, Y),
    newInstance(point, [X, Y], Front),
    baseObject(Base),
    send(Base, nextLocation, [], Front).
"""


class ScriptedRobot:
    """A hand-rolled skill holder on a 1-D track; east is +x."""

    def __init__(self, x=0, y=0, wall_at=None):
        self.x, self.y = x, y
        self.wall_at = wall_at
        self.trace = []

    def advance(self):
        target = self.x + 1
        if self.wall_at is not None and target == self.wall_at:
            raise SkillFailed("blocked")
        self.x = target
        self.trace.append(("advance", self.x))

    def turn(self):
        self.trace.append(("turn", self.x))

    def nextLocation(self):
        return Compound("point", (Number(self.x + 1), Number(self.y)))

    def graspBox(self, box):
        self.trace.append(("grasp", box))

    def perceive(self):
        self.trace.append(("perceive", self.x))

    def position(self):
        return [self.x, self.y]


def robot_base(name: str, robot: ScriptedRobot) -> BaseObject:
    return BaseObject(name, {
        "advance": robot.advance,
        "turn": robot.turn,
        "nextLocation": robot.nextLocation,
        "graspBox": robot.graspBox,
        "perceive": robot.perceive,
        "position": robot.position,
    })


def make_agent(kernel: Kernel, name="agent1", robot=None, **spec_kw) -> tuple:
    robot = robot or ScriptedRobot()
    base = robot_base(f"{name}-base", robot)
    spec = AgentSpec(name=name, **spec_kw)
    handle = kernel.create_agent(spec, base)
    return handle, robot
