"""stormkit: turn plain skill-bearing objects into agents.

The framework attaches interception layers for perception, situation
detection, reaction, deliberation, communication, and conversation-based
coordination to objects that only know how to act on their environment.

Typical entry points: build a `BaseObject` around your effector
callables, describe the agent with an `AgentSpec`, and hand both to
`Kernel.create_agent`. The demos in `stormkit.apps` show complete
systems wired this way.
"""

from .errors import StormkitError
from .kernel import AgentHandle, AgentSpec, BaseObject, Kernel, KSDescriptor

__version__ = "0.1.0"

__all__ = ["AgentHandle", "AgentSpec", "BaseObject", "KSDescriptor", "Kernel",
           "StormkitError", "__version__"]
