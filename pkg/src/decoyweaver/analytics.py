"""Funnel, drop-out, and dwell analytics over event logs.

Batch computation only: load a JSONL log, group records into sessions,
and read stage trajectories out of the stage_before/stage_after fields.
Backbone stages are counted by cumulative reach (a session that skipped a
stage through a branch but arrived further down the main path still counts
for every earlier backbone stage), which is the only reading under which
funnel conservation and monotonicity both survive rejoining branches.
Off-backbone stages are counted by plain visits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import MalformedRecord, ScenarioMismatch
from .events import ATTACK_KINDS, ActionKind, parse_record_line
from .scenario import CompiledScenario, ScenarioGraph, compile_runtime

__all__ = [
    "EventLog", "StageStat", "FunnelReport", "ActionStat",
    "load_event_log", "event_log_from_records", "build_funnel",
    "action_stats", "compare_funnels", "render_report", "report_from_json",
]


# ---------------------------------------------------------------------------
# event log loading
# ---------------------------------------------------------------------------

@dataclass
class EventLog:
    """Parsed JSONL log plus a note of every line that would not parse."""

    records: list[dict[str, Any]]
    skipped_lines: list[int]        # 1-based line numbers
    line_count: int
    path: Path | None = None

    @property
    def skipped(self) -> int:
        return len(self.skipped_lines)

    def session_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec["session_id"])
        return list(seen)


def load_event_log(path: str | Path) -> EventLog:
    """Read a JSONL event log, skipping and counting unusable lines.

    A truncated final line (crash mid-append) is handled the same way as
    any other malformed line: skipped, with its line number recorded so
    callers can tell tail truncation from mid-file corruption.
    """
    p = Path(path)
    records: list[dict[str, Any]] = []
    skipped: list[int] = []
    line_count = 0
    with p.open("r", encoding="utf-8", errors="replace") as fh:
        for line_no, line in enumerate(fh, 1):
            line_count = line_no
            if not line.strip():
                continue
            try:
                records.append(parse_record_line(line))
            except MalformedRecord:
                skipped.append(line_no)
    return EventLog(records=records, skipped_lines=skipped,
                    line_count=line_count, path=p)


def event_log_from_records(records: Iterable[Mapping[str, Any]]) -> EventLog:
    recs = [dict(r) for r in records]
    return EventLog(records=recs, skipped_lines=[], line_count=len(recs))


# ---------------------------------------------------------------------------
# report types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageStat:
    stage: str
    entrants: int
    advancers: int
    dropouts: int
    pct_of_total: float
    pct_of_previous: float
    on_backbone: bool


@dataclass(frozen=True)
class FunnelReport:
    scenario_id: str
    total_sessions: int
    stages: tuple[StageStat, ...]
    mean_dwell_min: float
    attack_attempt_rate: float
    attack_success_rate: float


@dataclass(frozen=True)
class ActionStat:
    kind: str
    events: int
    successes: int
    sessions: int               # sessions with at least one such event
    sessions_succeeding: int    # sessions with at least one success


def _pct(n: int, d: int) -> float:
    """Percentage rounded half-up to one decimal, 0.0 on an empty base."""
    if d <= 0:
        return 0.0
    q = Decimal(100 * n) / Decimal(d)
    return float(q.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


# ---------------------------------------------------------------------------
# funnel construction
# ---------------------------------------------------------------------------

def _as_machine(graph: ScenarioGraph | CompiledScenario) -> CompiledScenario:
    if isinstance(graph, CompiledScenario):
        return graph
    return compile_runtime(graph)


def _record_order(r: Mapping[str, Any]) -> tuple:
    # total order, so same-millisecond records cannot leak input order
    # into the report
    return (r["ts"], r["session_id"], str(r["stage_before"]),
            str(r["stage_after"]), str(r["action"]), bool(r["success"]),
            str(r.get("raw_excerpt", "")))


def _sessionize(log: EventLog, scenario_id: str) -> dict[str, list[dict[str, Any]]]:
    prefix = scenario_id + "-"
    sessions: dict[str, list[dict[str, Any]]] = {}
    for rec in sorted(log.records, key=_record_order):
        sid = rec["session_id"]
        if not sid.startswith(prefix):
            raise ScenarioMismatch(
                f"record session {sid!r} does not belong to scenario {scenario_id!r}")
        sessions.setdefault(sid, []).append(rec)
    return sessions


def _visited_stages(records: list[dict[str, Any]]) -> set[str]:
    visited: set[str] = set()
    for rec in records:
        visited.add(rec["stage_before"])
        visited.add(rec["stage_after"])
    return visited


def build_funnel(log: EventLog,
                 graph: ScenarioGraph | CompiledScenario) -> FunnelReport:
    """Aggregate an event log into a per-stage funnel report."""
    machine = _as_machine(graph)
    sessions = _sessionize(log, machine.id)
    total = len(sessions)

    reach: dict[str, set[str]] = {}        # per session: stages visited
    max_backbone: dict[str, int] = {}      # per session: deepest backbone index
    final_stage: dict[str, str] = {}
    dwell_ms_sum = 0
    attempted = 0
    succeeded = 0

    for sid, recs in sessions.items():
        visited = _visited_stages(recs)
        reach[sid] = visited
        max_backbone[sid] = max(
            (machine.backbone_index[s] for s in visited
             if s in machine.backbone_index), default=0)
        final_stage[sid] = recs[-1]["stage_after"]
        proto_recs = [r for r in recs if "operator_id" not in r]
        if proto_recs:
            dwell_ms_sum += proto_recs[-1]["ts"] - proto_recs[0]["ts"]
        kinds_ok = [(r["action"], r["success"]) for r in proto_recs]
        if any(ActionKind(k) in ATTACK_KINDS for k, _ in kinds_ok):
            attempted += 1
        if any(ok and ActionKind(k) in ATTACK_KINDS for k, ok in kinds_ok):
            succeeded += 1

    stats: list[StageStat] = []

    # backbone: cumulative reach
    n = len(machine.backbone)
    reach_counts = [sum(1 for d in max_backbone.values() if d >= k)
                    for k in range(n)]
    for k, stage_id in enumerate(machine.backbone):
        entrants = reach_counts[k]
        advancers = reach_counts[k + 1] if k + 1 < n else 0
        prev = total if k == 0 else reach_counts[k - 1]
        stats.append(StageStat(
            stage=stage_id, entrants=entrants, advancers=advancers,
            dropouts=entrants - advancers,
            pct_of_total=_pct(entrants, total),
            pct_of_previous=_pct(entrants, prev),
            on_backbone=True,
        ))

    # branches: visit counts, anchored to their feeder stage
    branch_ids = [s for s in machine.stages if s not in machine.backbone_index]
    branch_ids.sort(key=lambda s: (machine.depth.get(s, 0), s))
    visit_count = {s: sum(1 for v in reach.values() if s in v)
                   for s in machine.stages}
    for stage_id in branch_ids:
        entrants = visit_count[stage_id]
        moved_on = sum(1 for sid, v in reach.items()
                       if stage_id in v and final_stage[sid] != stage_id)
        anchor = next((t.from_stage for t in machine.graph.transitions
                       if t.to_stage == stage_id), None)
        prev = visit_count.get(anchor, total) if anchor else total
        stats.append(StageStat(
            stage=stage_id, entrants=entrants, advancers=moved_on,
            dropouts=entrants - moved_on,
            pct_of_total=_pct(entrants, total),
            pct_of_previous=_pct(entrants, prev),
            on_backbone=False,
        ))

    mean_dwell = (dwell_ms_sum / total / 60000.0) if total else 0.0
    return FunnelReport(
        scenario_id=machine.id,
        total_sessions=total,
        stages=tuple(stats),
        mean_dwell_min=mean_dwell,
        attack_attempt_rate=_pct(attempted, total),
        attack_success_rate=_pct(succeeded, total),
    )


def action_stats(log: EventLog) -> dict[str, ActionStat]:
    """Per-action-kind counts over protocol records (operator audit skipped)."""
    events: dict[str, int] = {}
    successes: dict[str, int] = {}
    per_session: dict[str, set[str]] = {}
    per_session_ok: dict[str, set[str]] = {}
    for rec in log.records:
        if "operator_id" in rec:
            continue
        kind = rec["action"]
        events[kind] = events.get(kind, 0) + 1
        per_session.setdefault(kind, set()).add(rec["session_id"])
        if rec["success"]:
            successes[kind] = successes.get(kind, 0) + 1
            per_session_ok.setdefault(kind, set()).add(rec["session_id"])
    return {
        kind: ActionStat(
            kind=kind,
            events=events[kind],
            successes=successes.get(kind, 0),
            sessions=len(per_session[kind]),
            sessions_succeeding=len(per_session_ok.get(kind, ())),
        )
        for kind in sorted(events)
    }


# ---------------------------------------------------------------------------
# comparison and rendering
# ---------------------------------------------------------------------------

def compare_funnels(a: FunnelReport, b: FunnelReport) -> dict[str, Any]:
    """Absolute per-stage percentage-point divergence between two funnels."""
    if a.scenario_id != b.scenario_id:
        raise ScenarioMismatch(f"{a.scenario_id!r} vs {b.scenario_id!r}")
    pa = {s.stage: s.pct_of_total for s in a.stages}
    pb = {s.stage: s.pct_of_total for s in b.stages}
    stages = {stage: round(abs(pa.get(stage, 0.0) - pb.get(stage, 0.0)), 10)
              for stage in sorted(set(pa) | set(pb))}
    return {
        "scenario_id": a.scenario_id,
        "stages": stages,
        "max_divergence": max(stages.values(), default=0.0),
    }


_JSON_KEYS = ("scenario_id", "total_sessions", "stages", "mean_dwell_min",
              "attack_attempt_rate", "attack_success_rate")


def render_report(report: FunnelReport, format: str = "text") -> str:
    if format == "json":
        doc = {
            "scenario_id": report.scenario_id,
            "total_sessions": report.total_sessions,
            "stages": [
                {"stage": s.stage, "entrants": s.entrants,
                 "advancers": s.advancers, "dropouts": s.dropouts,
                 "pct_of_total": s.pct_of_total,
                 "pct_of_previous": s.pct_of_previous,
                 "on_backbone": s.on_backbone}
                for s in report.stages
            ],
            "mean_dwell_min": report.mean_dwell_min,
            "attack_attempt_rate": report.attack_attempt_rate,
            "attack_success_rate": report.attack_success_rate,
        }
        return json.dumps(doc, indent=2)
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")

    lines = [
        f"scenario {report.scenario_id}: {report.total_sessions} sessions, "
        f"mean dwell {report.mean_dwell_min:.2f} min",
        f"attack attempt rate {report.attack_attempt_rate:.1f}%  "
        f"success rate {report.attack_success_rate:.1f}%",
        "",
        f"{'stage':<20} {'entrants':>8} {'advance':>8} {'dropout':>8} "
        f"{'%total':>7} {'%prev':>7}",
    ]
    for s in report.stages:
        marker = "" if s.on_backbone else "  (branch)"
        lines.append(
            f"{s.stage:<20} {s.entrants:>8} {s.advancers:>8} {s.dropouts:>8} "
            f"{s.pct_of_total:>7.1f} {s.pct_of_previous:>7.1f}{marker}")
    return "\n".join(lines)


def report_from_json(doc: str | Mapping[str, Any]) -> FunnelReport:
    """Inverse of render_report(..., "json")."""
    obj = json.loads(doc) if isinstance(doc, str) else doc
    missing = [k for k in _JSON_KEYS if k not in obj]
    if missing:
        raise MalformedRecord(f"funnel document missing keys: {missing}")
    return FunnelReport(
        scenario_id=obj["scenario_id"],
        total_sessions=int(obj["total_sessions"]),
        stages=tuple(
            StageStat(stage=s["stage"], entrants=int(s["entrants"]),
                      advancers=int(s["advancers"]), dropouts=int(s["dropouts"]),
                      pct_of_total=float(s["pct_of_total"]),
                      pct_of_previous=float(s["pct_of_previous"]),
                      on_backbone=bool(s["on_backbone"]))
            for s in obj["stages"]),
        mean_dwell_min=float(obj["mean_dwell_min"]),
        attack_attempt_rate=float(obj["attack_attempt_rate"]),
        attack_success_rate=float(obj["attack_success_rate"]),
    )
