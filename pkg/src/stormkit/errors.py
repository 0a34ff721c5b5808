"""Exception hierarchy shared across the framework."""


class StormkitError(Exception):
    """Base class for all framework errors."""


# --- logic engine ---

class LogicError(StormkitError):
    """Base class for errors raised while evaluating logic goals."""


class ParseError(LogicError):
    """Clause or term text could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownBuiltin(LogicError):
    """A goal named a built-in that is not registered (or has the wrong arity)."""


class NoSuchSkill(LogicError):
    """A skill invocation referenced a selector the target does not provide."""


class UnknownConstructor(LogicError):
    """newInstance named a type tag missing from the constructor registry."""


class NoAgentContext(LogicError):
    """baseObject was solved outside of an agent evaluation context."""


# --- kernel ---

class DuplicateAgentName(StormkitError):
    """An agent name is already taken in this kernel."""


class UnknownTarget(StormkitError):
    """The named agent or object is not registered with the kernel."""


class RouterUnreachable(StormkitError):
    """A communicating agent was created but no router is available."""


class SkillFailed(StormkitError):
    """A base-object skill signalled failure.

    Skills raise this themselves; the kernel propagates it unchanged after
    emitting the after-intercept with a failure marker.
    """

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


# --- deliberation ---

class HotSpotUndefined(StormkitError):
    """A template knowledge source is missing one of its hot-spot methods."""


class InvalidatedPlan(StormkitError):
    """The executor was handed a plan that was invalidated before it started."""


class NoPlanFound(StormkitError):
    """Forward search exhausted its node budget without reaching the goal."""


# --- communication ---

class NameTaken(StormkitError):
    """Router registration attempted for a name with a live connection."""


class UnknownReceiver(StormkitError):
    """A message was routed to a name the router has never seen."""


class ProtocolError(StormkitError):
    """A wire frame or message violated the envelope grammar."""


# --- apps ---

class ConfigInvalid(StormkitError):
    """A scenario configuration failed validation."""
