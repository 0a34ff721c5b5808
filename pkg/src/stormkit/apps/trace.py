"""Line-oriented run traces: one event per line, greppable and diffable.

Format: `tick|agent|kind|payload-term`. Identical (config, seed) runs
produce byte-identical files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from ..logic import Compound, Term, Variable, write_term


def canonical_payload(term: Term) -> Term:
    """Rename generated variables (underscore-prefixed) to stable names.

    Fresh-variable counters are process-global, so payloads carrying
    anonymous variables would otherwise differ between identical runs.
    """
    mapping: dict[Variable, Variable] = {}

    def rename(t: Term) -> Term:
        if isinstance(t, Variable) and t.name.startswith("_"):
            if t not in mapping:
                mapping[t] = Variable(f"_{len(mapping) + 1}")
            return mapping[t]
        if isinstance(t, Compound):
            return Compound(t.functor, tuple(rename(a) for a in t.args))
        return t

    return rename(term)


@dataclass(frozen=True)
class TraceLine:
    tick: int
    agent: str
    kind: str
    payload: str

    def render(self) -> str:
        return f"{self.tick}|{self.agent}|{self.kind}|{self.payload}"


class TraceWriter:
    """A kernel trace sink writing the line format; usable as the tracer."""

    def __init__(self, target: str | io.TextIOBase | None = None):
        if isinstance(target, str):
            self._file = open(target, "w", encoding="utf-8")
            self._owned = True
        else:
            self._file = target if target is not None else io.StringIO()
            self._owned = False
        self.lines = 0

    def __call__(self, tick: int, agent: str, kind: str, payload: Term) -> None:
        rendered = write_term(canonical_payload(payload))
        self._file.write(f"{tick}|{agent}|{kind}|{rendered}\n")
        self.lines += 1

    def getvalue(self) -> str:
        if isinstance(self._file, io.StringIO):
            return self._file.getvalue()
        raise ValueError("trace was written to a file, not memory")

    def close(self) -> None:
        self._file.flush()
        if self._owned:
            self._file.close()


def parse_line(line: str) -> TraceLine:
    tick, agent, kind, payload = line.rstrip("\n").split("|", 3)
    return TraceLine(int(tick), agent, kind, payload)


def read_trace(path: str) -> list[TraceLine]:
    with open(path, encoding="utf-8") as fh:
        return [parse_line(line) for line in fh if line.strip()]


def show_trace(path: str, agent: str | None = None, kind: str | None = None,
               out=None) -> int:
    """Print (filtered) trace lines; returns the number shown."""
    import sys
    out = out or sys.stdout
    shown = 0
    for line in read_trace(path):
        if agent is not None and line.agent != agent:
            continue
        if kind is not None and line.kind != kind:
            continue
        print(line.render(), file=out)
        shown += 1
    return shown
