"""Session tracking and the narrative state machine.

A session aggregates everything one source address does within one reset
window.  Raw interactions arrive from the decoys, are classified, appended
to the event log and run against the compiled scenario: the first matching
transition (priority order) advances the narrative, anything else leaves
the session where it stands.  All mutation of a session happens under its
own lock, so concurrent protocol handlers interleave per event, never
mid-event.
"""

from __future__ import annotations

import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable

from . import engagement as eng
from .errors import SessionClosed, StaleEvent
from .events import (ALLOWED_KINDS, ActionEvent, ActionKind, Protocol,
                     classify_action, extract_target, to_record)
from .scenario import Clue, CompiledScenario, StageKind, VulnKind

log = logging.getLogger(__name__)

RATE_WINDOW_MS = 60_000


class TransitionOutcome(Enum):
    Stayed = "Stayed"
    Advanced = "Advanced"
    Redirected = "Redirected"
    ClueEmitted = "ClueEmitted"
    RewardGranted = "RewardGranted"
    SessionEnded = "SessionEnded"


#: which stage vulnerability kinds an event kind exercises (difficulty ladder)
EVENT_VULN_KINDS: dict[ActionKind, frozenset[VulnKind]] = {
    ActionKind.SqlInjectionAttempt: frozenset({VulnKind.SqlInjectionLogin}),
    ActionKind.XssAttempt: frozenset({VulnKind.StoredXss}),
    ActionKind.LoginAttempt: frozenset({VulnKind.JsPasswordChecker,
                                        VulnKind.DefaultCredentials,
                                        VulnKind.WeakCredentials}),
    ActionKind.FtpLogin: frozenset({VulnKind.DefaultCredentials,
                                    VulnKind.WeakCredentials}),
    ActionKind.SshLogin: frozenset({VulnKind.WeakCredentials,
                                    VulnKind.DefaultCredentials}),
    ActionKind.MqttConnect: frozenset({VulnKind.WeakCredentials,
                                       VulnKind.DefaultCredentials}),
    ActionKind.ExploitAttempt: frozenset({VulnKind.ScriptedExploit}),
}


@dataclass
class SessionFlags:
    scanner_suspected: bool = False
    operator_locked: bool = False


@dataclass
class Session:
    """State of one attacker (source ip) within one reset window."""

    id: str
    scenario_id: str
    source_ip: str
    window: str
    opened_at: int
    current_stage: str
    engagement: float = 0.5
    last_event_at: int | None = None
    first_event_at: int | None = None
    clue_cursor: int = 0
    last_clue_at: int | None = None
    badges: list[str] = field(default_factory=list)
    difficulty_state: dict[str, int] = field(default_factory=dict)
    flags: SessionFlags = field(default_factory=SessionFlags)
    closed: bool = False
    events_seen: int = 0
    action_kinds: set[ActionKind] = field(default_factory=set)
    clues_served: set[tuple[str, int]] = field(default_factory=set)
    pending_messages: list[str] = field(default_factory=list)
    attempts: dict[str, list[bool]] = field(default_factory=dict)

    def summary(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "scenario_id": self.scenario_id,
            "source_ip": self.source_ip,
            "window": self.window,
            "opened_at": self.opened_at,
            "last_event_at": self.last_event_at,
            "current_stage": self.current_stage,
            "engagement": round(self.engagement, 4),
            "events_seen": self.events_seen,
            "badges": list(self.badges),
            "clue_cursor": self.clue_cursor,
            "difficulty_state": dict(self.difficulty_state),
            "flags": {"scanner_suspected": self.flags.scanner_suspected,
                      "operator_locked": self.flags.operator_locked},
            "closed": self.closed,
        }


def session_id_for(scenario_id: str, window: str, ip: str) -> str:
    # reversible on purpose: crash replay recovers the ip from the id alone
    return f"{scenario_id}-{window}-{ip}"


def ip_from_session_id(session_id: str) -> str:
    return session_id.rsplit("-", 1)[-1]


@dataclass
class IngestResult:
    outcome: TransitionOutcome
    stage_before: str
    stage_after: str
    granted: list[str] = field(default_factory=list)
    manipulation: str | None = None


def ingest_event(session: Session, event: ActionEvent,
                 machine: CompiledScenario,
                 params: eng.EngagementParams | None = None) -> IngestResult:
    """Run one classified event through the narrative machine.

    Raises SessionClosed for retired sessions and StaleEvent when the
    timestamp runs backwards.  At most one transition fires; an event that
    matches nothing leaves the stage untouched.  The engagement score is
    recomputed on every ingest.
    """
    params = params or eng.EngagementParams()
    if session.closed:
        raise SessionClosed(session.id)
    if session.last_event_at is not None and event.ts < session.last_event_at:
        raise StaleEvent(f"event at {event.ts} precedes session clock {session.last_event_at}")

    event.inter_event_ms = (event.ts - session.last_event_at) if session.last_event_at else 0

    stage_before = session.current_stage
    session.events_seen += 1
    session.action_kinds.add(event.action)
    if session.first_event_at is None:
        session.first_event_at = event.ts
    if event.action is ActionKind.ScanBurst:
        session.flags.scanner_suspected = True

    # difficulty bookkeeping for the vulnerabilities this event exercises
    stage = machine.stages.get(stage_before)
    if stage is not None:
        touched = EVENT_VULN_KINDS.get(event.action, frozenset())
        for vuln in stage.vulnerabilities:
            if vuln.kind in touched:
                key = vuln.kind.value
                history = session.attempts.setdefault(key, [])
                history.append(event.success)
                del history[:-10]
                level = session.difficulty_state.get(key, vuln.difficulty)
                session.difficulty_state[key] = eng.adjust_difficulty(level, history)

    outcome = TransitionOutcome.Stayed
    granted: list[str] = []
    manipulation: str | None = None
    transition = machine.first_match(stage_before, event.protocol, event.action,
                                     event.success, extract_target(event.protocol, event.raw))
    if transition is not None and not session.flags.operator_locked:
        session.current_stage = transition.to_stage
        session.clue_cursor = 0
        outcome = TransitionOutcome.Advanced
        manipulation = transition.manipulation.value if transition.manipulation else None
        target = machine.stages.get(transition.to_stage)
        if target is not None and target.rewards:
            granted = eng.grant_rewards(session, machine, transition.to_stage)

    session.last_event_at = event.ts
    session.engagement = eng.compute_engagement(session, event.ts, machine, params)

    return IngestResult(outcome=outcome, stage_before=stage_before,
                        stage_after=session.current_stage, granted=granted,
                        manipulation=manipulation)


@dataclass
class ObserveResult:
    session: Session
    event: ActionEvent
    result: IngestResult
    record: dict[str, Any]


class SessionStore:
    """All live sessions for one deployed scenario.

    Keyed by source ip; a second interaction from the same ip within the
    same reset window lands in the same session.  ``on_record`` listeners
    receive every appended log record (persistence, live streaming).
    """

    def __init__(self, machine: CompiledScenario,
                 params: eng.EngagementParams | None = None,
                 clock: Callable[[], int] | None = None):
        self.machine = machine
        self.params = params or eng.EngagementParams()
        self.clock = clock or _wall_ms
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}          # by session id
        self._by_ip: dict[str, str] = {}                 # ip -> current session id
        self._session_locks: dict[str, threading.Lock] = {}
        self._rates: dict[str, deque[int]] = {}
        self._window_seq = 0
        self._window_date = ""
        self.rr_cursors: dict[str, int] = {}
        self.on_record: list[Callable[[dict[str, Any]], None]] = []
        self.reset_hooks: list[Callable[[], None]] = []

    # -- windows ----------------------------------------------------------

    def _window_key(self, now_ms: int) -> str:
        import datetime as dt
        day = dt.datetime.fromtimestamp(now_ms / 1000.0, dt.timezone.utc).strftime("%Y%m%d")
        if day != self._window_date:
            self._window_date = day
            self._window_seq = 0
        return day if self._window_seq == 0 else f"{day}.{self._window_seq}"

    # -- sessions ---------------------------------------------------------

    def open_session(self, ip: str, now_ms: int | None = None) -> Session:
        """Get or create the session for ``ip`` in the current window."""
        now = self.clock() if now_ms is None else now_ms
        with self._lock:
            window = self._window_key(now)
            sid = self._by_ip.get(ip)
            if sid is not None:
                existing = self._sessions[sid]
                if not existing.closed and existing.window == window:
                    return existing
            session = Session(
                id=session_id_for(self.machine.id, window, ip),
                scenario_id=self.machine.id,
                source_ip=ip,
                window=window,
                opened_at=now,
                current_stage=self.machine.entry,
            )
            self._sessions[session.id] = session
            self._by_ip[ip] = session.id
            self._session_locks[session.id] = threading.Lock()
            return session

    def get(self, session_id: str) -> Session | None:
        return self._sessions.get(session_id)

    def sessions(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())

    def adopt(self, session: Session) -> None:
        """Install a replayed session (crash recovery)."""
        with self._lock:
            self._sessions[session.id] = session
            self._session_locks[session.id] = threading.Lock()
            if not session.closed:
                self._by_ip[session.source_ip] = session.id

    # -- ingestion --------------------------------------------------------

    def _rate_per_min(self, ip: str, now_ms: int) -> float:
        window = self._rates.setdefault(ip, deque())
        while window and now_ms - window[0] > RATE_WINDOW_MS:
            window.popleft()
        window.append(now_ms)
        return float(len(window)) * (60_000.0 / RATE_WINDOW_MS)

    def observe(self, ip: str, protocol: Protocol, raw: bytes | str,
                success: bool, now_ms: int | None = None,
                action: ActionKind | None = None) -> ObserveResult:
        """Classify, ingest and log one raw interaction from ``ip``."""
        now = self.clock() if now_ms is None else now_ms
        with self._lock:
            rate = self._rate_per_min(ip, now)
        if action is None:
            action = classify_action(protocol, raw, recent_rate_per_min=rate,
                                     scan_threshold=self.params.scan_threshold_per_min)
        if action not in ALLOWED_KINDS[protocol]:
            action = ActionKind.Other
        text = raw.decode("latin-1", errors="replace") if isinstance(raw, bytes) else raw
        event = ActionEvent(ts=now, protocol=protocol, raw=text,
                            action=action, success=success)
        session = self.open_session(ip, now)
        with self._session_locks[session.id]:
            result = ingest_event(session, event, self.machine, self.params)
        record = to_record(session.id, event, result.stage_before, result.stage_after)
        self._emit(record)
        return ObserveResult(session=session, event=event, result=result, record=record)

    def decorations(self, ip: str, now_ms: int | None = None) -> tuple[list[str], Clue | None]:
        """Drain queued operator messages and poll for a clue to embed."""
        now = self.clock() if now_ms is None else now_ms
        session = self.open_session(ip, now)
        with self._session_locks[session.id]:
            messages = session.pending_messages[:]
            session.pending_messages.clear()
            clue = eng.maybe_emit_clue(session, now, self.machine, self.params)
        return messages, clue

    def apply_operator(self, session_id: str, action: eng.OperatorAction,
                       now_ms: int | None = None) -> eng.OperatorResult:
        """Apply an operator action and append its audit record."""
        now = self.clock() if now_ms is None else now_ms
        session = self._sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        with self._session_locks[session_id]:
            before = session.current_stage
            result = eng.apply_operator_action(session, action, self.machine, now)
        record = {
            "session_id": session.id,
            "ts": now,
            "protocol": "HTTP",
            "action": "Other",
            "success": True,
            "stage_before": before,
            "stage_after": session.current_stage,
            "raw_excerpt": f"operator {action.kind.value} {result.detail}",
            "operator_id": action.operator_id,
            "operator_action": _operator_action_payload(action),
        }
        self._emit(record)
        return result

    def _emit(self, record: dict[str, Any]) -> None:
        for listener in self.on_record:
            try:
                listener(record)
            except Exception:  # a broken listener must not drop attacker state
                log.exception("record listener failed")

    # -- reset ------------------------------------------------------------

    def reset_environment(self, now_ms: int | None = None) -> int:
        """Close every open session and restore decoy mutable state.

        Returns the number of sessions closed.  The next interaction from
        any ip lands in a fresh session in a new window.
        """
        now = self.clock() if now_ms is None else now_ms
        with self._lock:
            closed = 0
            for session in self._sessions.values():
                if not session.closed:
                    session.closed = True
                    closed += 1
            self._by_ip.clear()
            self._rates.clear()
            self._window_key(now)
            self._window_seq += 1
        for hook in self.reset_hooks:
            try:
                hook()
            except Exception:
                log.exception("reset hook failed")
        return closed


def _operator_action_payload(action: eng.OperatorAction) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": action.kind.value}
    for fname in ("message", "stage", "clue_index", "reward_value", "vuln_kind", "level"):
        value = getattr(action, fname)
        if value is not None:
            out[fname] = value
    return out


def replay_records(records: Iterable[dict[str, Any]],
                   machine: CompiledScenario,
                   params: eng.EngagementParams | None = None) -> dict[str, Session]:
    """Rebuild session state by replaying log records in order.

    Protocol records run back through ingest_event; operator records are
    reapplied.  Returns sessions keyed by id.
    """
    from .events import record_to_event

    params = params or eng.EngagementParams()
    sessions: dict[str, Session] = {}
    for record in records:
        sid = record["session_id"]
        session = sessions.get(sid)
        if session is None:
            window, ip = _split_session_id(sid, machine.id)
            session = Session(id=sid, scenario_id=machine.id, source_ip=ip,
                              window=window, opened_at=int(record["ts"]),
                              current_stage=machine.entry)
            sessions[sid] = session
        if "operator_id" in record:
            payload = record.get("operator_action") or {}
            payload = dict(payload)
            payload["operator_id"] = record["operator_id"]
            try:
                action = eng.OperatorAction.from_mapping(payload)
                eng.apply_operator_action(session, action, machine, int(record["ts"]))
            except Exception:
                # a malformed audit record must not abort recovery
                log.warning("skipping unreplayable operator record for %s", sid)
            continue
        ingest_event(session, record_to_event(record), machine, params)
    return sessions


def _split_session_id(session_id: str, scenario_id: str) -> tuple[str, str]:
    rest = session_id[len(scenario_id) + 1:] if session_id.startswith(scenario_id + "-") else session_id
    window, _, ip = rest.partition("-")
    return window or "unknown", ip or "0.0.0.0"


def _wall_ms() -> int:
    import time
    return int(time.time() * 1000)
