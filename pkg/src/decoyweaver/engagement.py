"""Gamification mechanics that keep an attacker playing.

The score blends three normalized terms: how recently the attacker acted
(exponential decay with a configurable half-life), how deep into the
narrative backbone they are, and how varied their actions have been.  When
the score sags below the threshold the engine serves the next unserved clue
for the current stage, at most once per cooldown and never the same clue
twice to one session.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Mapping, MutableMapping, Sequence

from .errors import EmptyGroup, SessionClosed, UnknownStage
from .events import ActionKind
from .scenario import Clue, CompiledScenario, VulnSpec

if TYPE_CHECKING:
    from .sessions import Session

TOTAL_ACTION_KINDS = len(ActionKind)

MIN_DIFFICULTY = 1
MAX_DIFFICULTY = 5

#: consecutive failures after which a vulnerability is made easier
FAILS_TO_EASE = 3
#: consecutive successes after which it is made harder
WINS_TO_HARDEN = 2


@dataclass(frozen=True)
class EngagementParams:
    w_recency: float = 0.5
    w_depth: float = 0.3
    w_diversity: float = 0.2
    theta: float = 0.35           # clue threshold
    half_life_s: float = 300.0
    clue_cooldown_s: float = 120.0
    scan_threshold_per_min: float = 60.0

    @classmethod
    def from_mapping(cls, overrides: Mapping[str, Any] | None) -> "EngagementParams":
        if not overrides:
            return cls()
        known = {f for f in cls.__dataclass_fields__}
        bad = sorted(set(overrides) - known)
        if bad:
            raise ValueError(f"unknown engagement parameter {bad[0]!r}")
        return cls(**{k: float(v) for k, v in overrides.items()})


def compute_engagement(session: "Session", now_ms: int,
                       machine: CompiledScenario,
                       params: EngagementParams | None = None) -> float:
    """Score in [0, 1]; pure in (session snapshot, now, machine, params)."""
    p = params or EngagementParams()
    if session.last_event_at is None:
        dt_s = 0.0
    else:
        dt_s = max(0.0, (now_ms - session.last_event_at) / 1000.0)
    recency = p.w_recency * math.exp(-math.log(2.0) * dt_s / p.half_life_s)

    backbone_len = len(machine.backbone)
    depth_idx = machine.stage_depth(session.current_stage)
    depth = p.w_depth * min(1.0, depth_idx / backbone_len) if backbone_len else 0.0

    diversity = p.w_diversity * (len(session.action_kinds) / TOTAL_ACTION_KINDS)

    return max(0.0, min(1.0, recency + depth + diversity))


def maybe_emit_clue(session: "Session", now_ms: int,
                    machine: CompiledScenario,
                    params: EngagementParams | None = None) -> Clue | None:
    """Serve the next clue for the current stage when engagement droops.

    Emits only when the score is below theta, the cooldown since the last
    clue has elapsed, and the stage still has an unserved clue.  Advances
    the session clue cursor; a (stage, index) pair is never served twice.
    """
    p = params or EngagementParams()
    if session.closed:
        return None
    score = compute_engagement(session, now_ms, machine, p)
    if score >= p.theta:
        return None
    if session.last_clue_at is not None and (now_ms - session.last_clue_at) < p.clue_cooldown_s * 1000.0:
        return None
    stage = machine.stages.get(session.current_stage)
    if stage is None or not stage.clues:
        return None
    for idx, clue in enumerate(stage.clues):
        if (stage.id, idx) not in session.clues_served:
            session.clues_served.add((stage.id, idx))
            session.clue_cursor = idx + 1
            session.last_clue_at = now_ms
            session.engagement = score
            return clue
    return None


def serve_clue_by_index(session: "Session", machine: CompiledScenario,
                        index: int, now_ms: int) -> Clue:
    """Operator-forced clue service; bypasses threshold but not monotonicity."""
    stage = machine.stages.get(session.current_stage)
    if stage is None:
        raise UnknownStage(session.current_stage)
    if not 0 <= index < len(stage.clues):
        raise UnknownStage(f"stage {stage.id} has no clue #{index}")
    session.clues_served.add((stage.id, index))
    session.clue_cursor = max(session.clue_cursor, index + 1)
    session.last_clue_at = now_ms
    return stage.clues[index]


def adjust_difficulty(level: int, recent_outcomes: Sequence[bool]) -> int:
    """Step the difficulty ladder from the trailing attempt outcomes.

    Three consecutive failures ease the vulnerability one level (floor 1);
    two consecutive successes harden it one level (cap 5).
    """
    level = max(MIN_DIFFICULTY, min(MAX_DIFFICULTY, level))
    tail = list(recent_outcomes)
    if len(tail) >= FAILS_TO_EASE and all(not o for o in tail[-FAILS_TO_EASE:]):
        return max(MIN_DIFFICULTY, level - 1)
    if len(tail) >= WINS_TO_HARDEN and all(tail[-WINS_TO_HARDEN:]):
        return min(MAX_DIFFICULTY, level + 1)
    return level


def next_round_robin(members: Sequence[VulnSpec],
                     cursors: MutableMapping[str, int]) -> VulnSpec:
    """Rotate deterministically through a vulnerability group.

    ``cursors`` maps group name to the number of picks already made; it is
    the piece of state that must survive restarts so rotation resumes
    where it stopped.
    """
    if not members:
        raise EmptyGroup("round-robin group has no members")
    group = members[0].round_robin_group or ""
    idx = cursors.get(group, 0)
    pick = members[idx % len(members)]
    cursors[group] = idx + 1
    return pick


class GateDecision(Enum):
    Grant = "Grant"
    Withhold = "Withhold"


def reciprocity_gate(session: "Session", reward) -> GateDecision:
    """Withhold gratification from suspected scanners, grant it to humans."""
    if session.flags.scanner_suspected:
        return GateDecision.Withhold
    return GateDecision.Grant


def grant_rewards(session: "Session", machine: CompiledScenario,
                  stage_id: str) -> list[str]:
    """Apply the reciprocity gate to a stage's rewards; idempotent per badge."""
    stage = machine.stages.get(stage_id)
    if stage is None:
        return []
    granted: list[str] = []
    for reward in stage.rewards:
        if reciprocity_gate(session, reward) is not GateDecision.Grant:
            continue
        badge = f"{reward.kind.value}:{reward.value}"
        if badge not in session.badges:
            session.badges.append(badge)
            granted.append(badge)
    return granted


# ---------------------------------------------------------------------------
# operator actions
# ---------------------------------------------------------------------------

class OperatorActionKind(Enum):
    CoerciveMessage = "CoerciveMessage"
    ForceRedirect = "ForceRedirect"
    ServeClue = "ServeClue"
    GrantReward = "GrantReward"
    SetDifficulty = "SetDifficulty"
    LockSession = "LockSession"
    UnlockSession = "UnlockSession"


@dataclass(frozen=True)
class OperatorAction:
    kind: OperatorActionKind
    operator_id: str
    message: str | None = None       # CoerciveMessage
    stage: str | None = None         # ForceRedirect
    clue_index: int | None = None    # ServeClue
    reward_value: str | None = None  # GrantReward
    vuln_kind: str | None = None     # SetDifficulty
    level: int | None = None         # SetDifficulty

    @classmethod
    def from_mapping(cls, obj: Mapping[str, Any]) -> "OperatorAction":
        try:
            kind = OperatorActionKind(obj["kind"])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"unknown operator action kind: {obj.get('kind')!r}") from exc
        operator_id = obj.get("operator_id")
        if not operator_id or not isinstance(operator_id, str):
            raise ValueError("operator_id is required")
        known = {"kind", "operator_id", "message", "stage", "clue_index",
                 "reward_value", "vuln_kind", "level"}
        bad = sorted(set(obj) - known)
        if bad:
            raise ValueError(f"unknown operator action field {bad[0]!r}")
        action = cls(kind=kind, operator_id=operator_id,
                     message=obj.get("message"), stage=obj.get("stage"),
                     clue_index=obj.get("clue_index"),
                     reward_value=obj.get("reward_value"),
                     vuln_kind=obj.get("vuln_kind"), level=obj.get("level"))
        action.require_fields()
        return action

    def require_fields(self) -> None:
        need = {
            OperatorActionKind.CoerciveMessage: ("message",),
            OperatorActionKind.ForceRedirect: ("stage",),
            OperatorActionKind.ServeClue: ("clue_index",),
            OperatorActionKind.GrantReward: ("reward_value",),
            OperatorActionKind.SetDifficulty: ("vuln_kind", "level"),
            OperatorActionKind.LockSession: (),
            OperatorActionKind.UnlockSession: (),
        }[self.kind]
        for fname in need:
            if getattr(self, fname) is None:
                raise ValueError(f"{self.kind.value} requires {fname!r}")


@dataclass
class OperatorResult:
    outcome: "Any"  # sessions.TransitionOutcome; typed loosely to avoid a cycle
    detail: dict[str, Any] = field(default_factory=dict)


def apply_operator_action(session: "Session", action: OperatorAction,
                          machine: CompiledScenario, now_ms: int) -> OperatorResult:
    """Mutate a session on the operator's behalf.

    CoerciveMessage queues text that the next protocol response carries
    verbatim; ForceRedirect moves the narrative stage directly.  Raises
    UnknownStage for a bad redirect target and SessionClosed for a session
    that has already been retired.
    """
    from .sessions import TransitionOutcome  # local import avoids module cycle

    if session.closed:
        raise SessionClosed(session.id)

    if action.kind is OperatorActionKind.CoerciveMessage:
        session.pending_messages.append(action.message or "")
        return OperatorResult(TransitionOutcome.Stayed, {"queued": action.message})

    if action.kind is OperatorActionKind.ForceRedirect:
        if action.stage not in machine.stages:
            raise UnknownStage(action.stage or "")
        before = session.current_stage
        session.current_stage = action.stage
        session.clue_cursor = 0
        return OperatorResult(TransitionOutcome.Redirected,
                              {"from": before, "to": action.stage})

    if action.kind is OperatorActionKind.ServeClue:
        clue = serve_clue_by_index(session, machine, int(action.clue_index or 0), now_ms)
        session.pending_messages.append(f"hint: see {clue.asset}")
        return OperatorResult(TransitionOutcome.ClueEmitted,
                              {"clue": clue.asset, "kind": clue.kind.value})

    if action.kind is OperatorActionKind.GrantReward:
        badge = action.reward_value or ""
        if badge not in session.badges:
            session.badges.append(badge)
        return OperatorResult(TransitionOutcome.RewardGranted, {"badge": badge})

    if action.kind is OperatorActionKind.SetDifficulty:
        level = max(MIN_DIFFICULTY, min(MAX_DIFFICULTY, int(action.level or 1)))
        session.difficulty_state[action.vuln_kind or ""] = level
        return OperatorResult(TransitionOutcome.Stayed,
                              {"vuln_kind": action.vuln_kind, "level": level})

    if action.kind is OperatorActionKind.LockSession:
        session.flags.operator_locked = True
        return OperatorResult(TransitionOutcome.Stayed, {"locked": True})

    session.flags.operator_locked = False
    return OperatorResult(TransitionOutcome.Stayed, {"locked": False})
