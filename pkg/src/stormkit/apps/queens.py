"""Distributed n-queens: one communicating agent per column.

Each queen owns a column and coordinates through the `queens`
conversation class. Left columns have priority: a queen moves only when
her row conflicts with a left peer (or a right neighbor demands it via
backtrack), picking the nearest untried non-conflicting row; exhausting
the column sends `backtrack` to the left neighbor and resets. The
leftmost queen exhausting her rows makes the board unsolvable.

Rule map: M1 start/broadcast, M2 move/re-tell, M3 satisfied on a quiet
round, M4 backtrack left and wait, M5 stuck (no left neighbor), M6
re-enter after the left neighbor moved, M7 re-backtrack while waiting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..comms import AclMessage, Router
from ..conv import (
    ConvEvent,
    ConvRule,
    ConversationClass,
    ConversationInstance,
    register_conversation_class,
)
from ..kernel import AgentHandle, AgentSpec, BaseObject, Kernel
from ..logic import Atom, Compound, Substitution, Variable, parse_term

QUEENS_CLASS_NAME = "queens"

CONFLICT_CLAUSES = """
% two queens attack each other on a row or a diagonal
conflict(C1, R1, C2, R2) :- R1 =:= R2.
conflict(C1, R1, C2, R2) :- D1 is C1 - C2, D2 is R1 - R2, abs(D1) =:= abs(D2).
leftConflict :- mycol(C), myrow(R), position(C2, R2), C2 < C, conflict(C, R, C2, R2).
anyConflict :- mycol(C), myrow(R), position(C2, R2), conflict(C, R, C2, R2).
"""


@dataclass
class QueenAgentSpec:
    """One queen: her column, the board size, and everyone else."""

    column: int
    board_size: int
    row: int = 1
    peers: tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return queen_name(self.column)


def queen_name(column: int) -> str:
    return f"queen{column}"


# --- belief access helpers ---

def _value(agent: AgentHandle, goal: str, var: str) -> int | None:
    solution = agent.ask(goal)
    if solution is None:
        return None
    return solution[Variable(var)].value


def queen_column(agent: AgentHandle) -> int:
    return _value(agent, "mycol(C)", "C")


def board_size(agent: AgentHandle) -> int:
    return _value(agent, "size(N)", "N")


def current_row(agent: AgentHandle) -> int:
    row = _value(agent, "myrow(R)", "R")
    return row if row is not None else 1


def known_positions(agent: AgentHandle) -> dict[int, int]:
    out: dict[int, int] = {}
    for solution in agent.solve("position(C, R)"):
        out[solution[Variable("C")].value] = solution[Variable("R")].value
    return out


def tried_rows(agent: AgentHandle) -> set[int]:
    return {s[Variable("R")].value for s in agent.solve("tried(R)")}


def attacks(col1: int, row1: int, col2: int, row2: int) -> bool:
    return row1 == row2 or abs(col1 - col2) == abs(row1 - row2)


def candidate_rows(agent: AgentHandle) -> list[int]:
    """Untried rows consistent with all left peers, nearest to current first."""
    col, n, row = queen_column(agent), board_size(agent), current_row(agent)
    tried = tried_rows(agent)
    left = {c: r for c, r in known_positions(agent).items() if c < col}
    out = [r for r in range(1, n + 1)
           if r not in tried and not any(attacks(col, r, c, lr) for c, lr in left.items())]
    out.sort(key=lambda r: (abs(r - row), r))
    return out


def set_row(agent: AgentHandle, row: int) -> None:
    agent.mental_state.retract_clause("beliefs", parse_term("myrow(_)"))
    agent.mental_state.assert_clause("beliefs", parse_term(f"myrow({row})"))
    if row not in tried_rows(agent):
        agent.mental_state.assert_clause("beliefs", parse_term(f"tried({row})"))


def reset_tried(agent: AgentHandle, keep_current: bool = False) -> None:
    while agent.mental_state.retract_clause("beliefs", parse_term("tried(_)")):
        pass
    if keep_current:
        agent.mental_state.assert_clause("beliefs",
                                         parse_term(f"tried({current_row(agent)})"))


def position_tells(instance: ConversationInstance, row: int) -> list[AclMessage]:
    agent = instance.agent
    col = queen_column(agent)
    content = parse_term(f"position({col}, {row})")
    return [AclMessage(performative="tell", sender=agent.name, receiver=peer,
                       content=content, ontology="queens")
            for peer in instance.peers]


def backtrack_tell(instance: ConversationInstance, event: ConvEvent,
                   bindings: Substitution) -> list[AclMessage]:
    """Demand that the left neighbor move off the row we exhausted under.

    The message carries that row so a backtrack that crossed a newer
    position tell in flight is recognizably stale and gets ignored.
    """
    agent = instance.agent
    col = queen_column(agent)
    left_row = known_positions(agent)[col - 1]
    return [AclMessage(performative="tell", sender=agent.name,
                       receiver=queen_name(col - 1),
                       content=parse_term(f"backtrack({col}, {left_row})"),
                       ontology="queens")]


def queens_tell_handler(message: AclMessage, agent: AgentHandle) -> None:
    """Belief upkeep for position tells; resets the tried set when a
    left peer moves (a new enumeration epoch starts)."""
    content = message.content
    if not isinstance(content, Compound) or content.functor != "position":
        return None
    col, row = content.args[0].value, content.args[1].value
    previous = known_positions(agent).get(col)
    if previous == row:
        return None
    agent.mental_state.retract_clause("beliefs", parse_term(f"position({col}, _)"))
    agent.mental_state.assert_clause("beliefs", parse_term(f"position({col}, {row})"))
    if col < queen_column(agent):
        reset_tried(agent)
    return None


# --- event classification used by the guards ---
#
# Events are wake-ups; beliefs may already be newer than the event being
# processed. Guards therefore check freshness: stale backtracks (about a
# row we already left) and stale position tells fire no rule.

def _is_position_tell(event: ConvEvent) -> bool:
    return (event.kind == "message"
            and isinstance(event.message.content, Compound)
            and event.message.content.functor == "position")


def _is_left_position_tell(instance, event) -> bool:
    if not _is_position_tell(event):
        return False
    return event.message.content.args[0].value < queen_column(instance.agent)


def _is_direct_left_tell(instance, event) -> bool:
    """A fresh position tell from column col-1 (row matches current beliefs)."""
    if not _is_position_tell(event):
        return False
    agent = instance.agent
    col, row = (a.value for a in event.message.content.args)
    return (col == queen_column(agent) - 1
            and known_positions(agent).get(col) == row)


def _is_fresh_backtrack(instance, event) -> bool:
    if (event.kind != "message"
            or not isinstance(event.message.content, Compound)
            or event.message.content.functor != "backtrack"):
        return False
    complained_row = event.message.content.args[1].value
    return complained_row == current_row(instance.agent)


def _left_neighbor_known(instance) -> bool:
    col = queen_column(instance.agent)
    return col == 1 or (col - 1) in known_positions(instance.agent)


def _needs_move(instance, event) -> bool:
    if _is_fresh_backtrack(instance, event):
        return True
    if _is_left_position_tell(instance, event):
        # conflict with the (already belief-updated) left view, via logic
        return instance.agent.ask("leftConflict") is not None
    return False


def _is_quiet_round(event: ConvEvent) -> bool:
    return event.kind == "signal" and event.payload == parse_term("round(quiet)")


# --- guards and actions for the conversation rules ---

def g_start(instance, event):
    return event.kind == "signal" and event.payload == Atom("start")


def a_initial_pick(instance, event, bindings):
    agent = instance.agent
    candidates = candidate_rows(agent)
    set_row(agent, candidates[0] if candidates else current_row(agent))


def m_broadcast(instance, event, bindings):
    return position_tells(instance, current_row(instance.agent))


def g_move(instance, event):
    return _needs_move(instance, event) and bool(candidate_rows(instance.agent))


def a_move(instance, event, bindings):
    agent = instance.agent
    set_row(agent, candidate_rows(agent)[0])


def g_satisfied(instance, event):
    if not _is_quiet_round(event):
        return False
    agent = instance.agent
    n = board_size(agent)
    if len(known_positions(agent)) != n - 1:
        return False
    return agent.ask("anyConflict") is None


def g_exhausted_backtrack(instance, event):
    return (_needs_move(instance, event)
            and not candidate_rows(instance.agent)
            and queen_column(instance.agent) > 1
            and _left_neighbor_known(instance))


def a_reset(instance, event, bindings):
    reset_tried(instance.agent, keep_current=True)


def g_exhausted_stuck(instance, event):
    return (_needs_move(instance, event)
            and not candidate_rows(instance.agent)
            and queen_column(instance.agent) == 1)


def g_left_moved_can_pick(instance, event):
    return _is_direct_left_tell(instance, event) and bool(candidate_rows(instance.agent))


def g_left_moved_still_empty(instance, event):
    return _is_direct_left_tell(instance, event) and not candidate_rows(instance.agent)


def queens_conversation_class() -> ConversationClass:
    return ConversationClass(
        name=QUEENS_CLASS_NAME,
        states=frozenset({"Start", "Proposing", "Waiting", "Satisfied", "Stuck"}),
        initial="Start",
        finals=frozenset({"Satisfied", "Stuck"}),
        rules=(
            ConvRule("M1", "Start", "Proposing", such_that=g_start,
                     do_before=a_initial_pick, send_message=m_broadcast),
            ConvRule("M2", "Proposing", "Proposing", such_that=g_move,
                     do_before=a_move, send_message=m_broadcast),
            ConvRule("M3", "Proposing", "Satisfied", such_that=g_satisfied),
            ConvRule("M4", "Proposing", "Waiting", such_that=g_exhausted_backtrack,
                     send_message=backtrack_tell, do_after=a_reset),
            ConvRule("M5", "Proposing", "Stuck", such_that=g_exhausted_stuck),
            ConvRule("M6", "Waiting", "Proposing", such_that=g_left_moved_can_pick,
                     do_before=a_move, send_message=m_broadcast),
            ConvRule("M7", "Waiting", "Waiting", such_that=g_left_moved_still_empty,
                     send_message=backtrack_tell, do_after=a_reset),
        ),
    )


register_conversation_class(queens_conversation_class())


# --- harness ---

@dataclass
class RunReport:
    outcome: str
    ticks: int
    messages: int
    placement: dict[int, int] = field(default_factory=dict)
    trace_path: str | None = None
    detail: str = ""
    snapshot: str = ""

    @property
    def solved(self) -> bool:
        return self.outcome == "solved"


def render_board(placement: dict[int, int], n: int) -> str:
    """ASCII board, top row first; columns left to right."""
    rows = []
    for row in range(n, 0, -1):
        rows.append(" ".join(
            "Q" if placement.get(col) == row else "."
            for col in range(1, n + 1)))
    return "\n".join(rows)


def validate_queens(placement: dict[int, int] | list[int], n: int) -> bool:
    """Independent acceptance oracle: pairwise attack check."""
    if isinstance(placement, dict):
        rows = [placement.get(c) for c in range(1, n + 1)]
    else:
        rows = list(placement)
    if len(rows) != n or any(r is None or not 1 <= r <= n for r in rows):
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if rows[i] == rows[j] or abs(i - j) == abs(rows[i] - rows[j]):
                return False
    return True


def build_queens(kernel: Kernel, n: int, start: bool = True) -> list[AgentHandle]:
    names = [queen_name(i) for i in range(1, n + 1)]
    queen_specs = [QueenAgentSpec(column=i, board_size=n,
                                  peers=tuple(p for p in names if p != queen_name(i)))
                   for i in range(1, n + 1)]
    agents = []
    for queen in queen_specs:
        spec = AgentSpec(
            name=queen.name,
            communication=True,
            conversation_classes=(QUEENS_CLASS_NAME,),
            clause_modules={"rules": CONFLICT_CLAUSES},
            initial_beliefs=(f"mycol({queen.column}). size({queen.board_size}). "
                             f"myrow({queen.row})."),
        )
        handle = kernel.create_agent(spec, BaseObject(f"{queen.name}-body", {}))
        handle.components["communicator"].register_handler("tell", queens_tell_handler)
        agents.append(handle)
    for handle, queen in zip(agents, queen_specs):
        handle.components["conversations"].spawn(QUEENS_CLASS_NAME, queen.peers,
                                                 start=start)
    return agents


def run_queens(n: int, seed: int = 1, message_cap: int = 10_000,
               tick_cap: int = 100_000, tracer=None,
               free_running: bool = False) -> RunReport:
    """Run to quiescence, then local-detection plus oracle validation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    router = Router()
    kernel = Kernel(seed=seed, router=router)
    if tracer is not None:
        kernel.tracer = tracer
        router.observer = lambda m: kernel.trace(
            m.sender, "routed", Compound("to", (Atom(m.receiver), m.content_term())))
    agents = build_queens(kernel, n)
    instances = [a.components["conversations"].instances[0] for a in agents]
    if free_running:
        return _run_queens_threaded(n, kernel, router, agents, instances, message_cap)

    def placement() -> dict[int, int]:
        return {queen_column(a): current_row(a) for a in agents}

    outcome = None
    while True:
        worked = kernel.scheduler.run_round()
        if router.routed_count > message_cap:
            outcome = "message-limit"
            break
        if kernel.scheduler.tick > tick_cap:
            outcome = "tick-limit"
            break
        if worked or kernel.scheduler.pending() > 0:
            continue
        # quiescent: classify, then try the quiet-round satisfaction sweep
        if any(instance.current == "Stuck" for instance in instances):
            outcome = "unsolvable"
            break
        if all(instance.current == "Satisfied" for instance in instances):
            outcome = "solved"
            break
        quiet = ConvEvent.signal(parse_term("round(quiet)"))
        moved = False
        for instance in instances:
            if not instance.done:
                instance.queue.append(quiet)
                moved = True
        if not moved:
            outcome = "stalled"
            break
        kernel.scheduler.run_until_idle()
        if all(instance.current == "Satisfied" for instance in instances):
            outcome = "solved"
            break
        if any(instance.current == "Stuck" for instance in instances):
            outcome = "unsolvable"
            break
        if kernel.scheduler.pending() == 0 and not any(
                instance.queue for instance in instances):
            # quiet sweep produced no progress and nobody is satisfied
            outcome = "stalled"
            break

    report = RunReport(outcome=outcome, ticks=kernel.scheduler.tick,
                       messages=router.routed_count, placement=placement(),
                       snapshot=render_board(placement(), n))
    if report.solved and not validate_queens(report.placement, n):
        report.outcome = "invalid"
    return report


def _run_queens_threaded(n, kernel, router, agents, instances,
                         message_cap) -> RunReport:
    """Free-running variant: component threads plus quiescence polling."""
    import time
    from ..kernel import ThreadPump

    def placement() -> dict[int, int]:
        return {queen_column(a): current_row(a) for a in agents}

    pump = ThreadPump(kernel.scheduler)
    pump.start()
    outcome = None
    deadline = time.monotonic() + 60
    try:
        while time.monotonic() < deadline:
            if router.routed_count > message_cap:
                outcome = "message-limit"
                break
            if kernel.scheduler.pending() > 0 or any(i.queue for i in instances):
                time.sleep(0.005)
                continue
            # require a stable quiet window before classifying
            time.sleep(0.02)
            if kernel.scheduler.pending() > 0 or any(i.queue for i in instances):
                continue
            if any(i.current == "Stuck" for i in instances):
                outcome = "unsolvable"
                break
            if all(i.current == "Satisfied" for i in instances):
                outcome = "solved"
                break
            quiet = ConvEvent.signal(parse_term("round(quiet)"))
            for instance in instances:
                if not instance.done:
                    instance.queue.append(quiet)
            time.sleep(0.02)
        else:
            outcome = "tick-limit"
    finally:
        pump.stop()
    report = RunReport(outcome=outcome or "tick-limit", ticks=kernel.scheduler.tick,
                       messages=router.routed_count, placement=placement(),
                       snapshot=render_board(placement(), n))
    if report.solved and not validate_queens(report.placement, n):
        report.outcome = "invalid"
    return report
