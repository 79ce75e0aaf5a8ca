"""Exceptions raised by the interconnect models and simulator.

Everything derives from ValueError so callers that only guard against bad
input keep working.
"""


class InterconnectError(ValueError):
    """Base class for all interconnect errors."""


class ConfigParseError(InterconnectError):
    def __init__(self, line_number, line, reason):
        self.line_number = line_number
        self.line = line
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}: {line!r}")


class ValidationError(InterconnectError):
    """Parameter outside its documented range."""


class NoCrossoverError(InterconnectError):
    """Teleportation never becomes faster than ballistic movement."""


class NotPurifiableError(InterconnectError):
    """Input state sits at or below the purification fixed point."""


class ConvergenceError(InterconnectError):
    def __init__(self, message, trace=()):
        self.trace = list(trace)
        super().__init__(message)


class StarvationError(InterconnectError):
    """A purifier chain with no incoming pairs never delivers."""


class InfeasiblePlanError(InterconnectError):
    def __init__(self, message, stage=None):
        self.stage = stage
        super().__init__(message if stage is None else f"{message} (stage: {stage})")


class NoGeneratorNeeded(InterconnectError):
    """Source and destination share a router; no G node is involved."""


class DeadlockError(InterconnectError):
    def __init__(self, message, blocked=()):
        self.blocked = list(blocked)
        super().__init__(message)
