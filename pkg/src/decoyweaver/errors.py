"""Exception types shared across the engine.

Kept in one module so the scenario model, session engine and gateway can
raise each other's error contracts without import cycles.
"""

from __future__ import annotations


class DecoyweaverError(Exception):
    """Base class for all engine errors."""


class SchemaError(DecoyweaverError):
    """Scenario config rejected; carries the offending config path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class DuplicateIdError(SchemaError):
    """Two stages or transitions share an id."""


class CompileError(DecoyweaverError):
    """Graph failed validation at compile time; carries the violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations) or "unknown"
        super().__init__(f"scenario not runnable: {lines}")


class UnknownScenario(DecoyweaverError):
    pass


class UnknownStage(DecoyweaverError):
    pass


class StaleEvent(DecoyweaverError):
    """Event timestamp precedes the session's last event."""


class SessionClosed(DecoyweaverError):
    """Interaction delivered to an already-closed session."""


class EmptyGroup(DecoyweaverError):
    """Round-robin rotation asked for a vulnerability group with no members."""


class ScenarioMismatch(DecoyweaverError):
    """Event log and graph disagree about which scenario they describe."""


class MalformedRecord(DecoyweaverError):
    """A single unparseable event-log line (skipped and counted by readers)."""


class CorruptLog(DecoyweaverError):
    """Event log damaged beyond the tolerated truncated final line."""


class PortInUse(DecoyweaverError):
    pass


class InvalidBundle(DecoyweaverError):
    """Deployment refused: scenario bundle failed validation."""

    def __init__(self, scenario_id: str, violations):
        self.scenario_id = scenario_id
        self.violations = list(violations)
        super().__init__(f"bundle {scenario_id!r} not deployable: "
                         + ("; ".join(str(v) for v in self.violations) or "unknown"))


class EndpointUnreachable(DecoyweaverError):
    """Simulated agent could not connect to a decoy endpoint."""
