"""Executable demonstrations and the deterministic simulation harness."""

from .forks import ForkliftSpec, ForksConfig, default_config, run_forks
from .grid import GridWorld, forklift_base, perceive_facts
from .queens import QueenAgentSpec, RunReport, run_queens, validate_queens
from .trace import TraceWriter, read_trace, show_trace

__all__ = [
    "ForkliftSpec", "ForksConfig", "GridWorld", "QueenAgentSpec", "RunReport",
    "TraceWriter", "default_config", "forklift_base", "perceive_facts",
    "read_trace", "run_forks", "run_queens", "show_trace", "validate_queens",
]
