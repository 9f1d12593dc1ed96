"""Gamified deception engine: scenario graphs, decoy services, analytics."""

from decoyweaver.engagement import EngagementParams, compute_engagement
from decoyweaver.errors import DecoyweaverError
from decoyweaver.scenario import (
    CompiledScenario,
    ScenarioGraph,
    compile_runtime,
    load_scenario,
    parse_scenario,
    validate_graph,
)
from decoyweaver.sessions import Session, SessionStore, replay_records

__version__ = "0.1.0"

__all__ = [
    "CompiledScenario",
    "DecoyweaverError",
    "EngagementParams",
    "ScenarioGraph",
    "Session",
    "SessionStore",
    "__version__",
    "compile_runtime",
    "compute_engagement",
    "load_scenario",
    "parse_scenario",
    "replay_records",
    "validate_graph",
]
