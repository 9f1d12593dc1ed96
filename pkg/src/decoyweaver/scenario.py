"""Narrative scenario model: graph types, parser, validator and compiler.

A scenario is a JSON config plus an asset directory.  The graph is a single
linear backbone (exactly one main-path transition out of every non-terminal
stage) with optional side branches that either rejoin the backbone or end
in their own terminal stage.  Parsing is strict: unknown keys are rejected
with the offending path, so a typo'd config never half-loads.
"""

from __future__ import annotations

import fnmatch
import json
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterator, Mapping

from .errors import CompileError, DuplicateIdError, SchemaError, UnknownScenario
from .events import ActionKind, Protocol


class StageKind(Enum):
    Entry = "Entry"
    Vulnerability = "Vulnerability"
    Reward = "Reward"
    Terminal = "Terminal"


class ManipulationTechnique(Enum):
    Coercion = "Coercion"
    ReciprocityReward = "ReciprocityReward"
    Debasement = "Debasement"
    Charm = "Charm"
    PleasureInduction = "PleasureInduction"
    SocialComparison = "SocialComparison"
    MonetaryReward = "MonetaryReward"


class VulnKind(Enum):
    RobotsDisclosure = "RobotsDisclosure"
    JsPasswordChecker = "JsPasswordChecker"
    SqlInjectionLogin = "SqlInjectionLogin"
    StoredXss = "StoredXss"
    DefaultCredentials = "DefaultCredentials"
    WeakCredentials = "WeakCredentials"
    PlantedFile = "PlantedFile"
    MisleadingScan = "MisleadingScan"
    ScriptedExploit = "ScriptedExploit"


class ClueKind(Enum):
    PacketCapture = "PacketCapture"
    MisleadingNetworkScan = "MisleadingNetworkScan"
    VulnerabilityScanOutput = "VulnerabilityScanOutput"
    PlantedComment = "PlantedComment"
    DefacementPage = "DefacementPage"


class RewardKind(Enum):
    FakeMonetary = "FakeMonetary"
    Badge = "Badge"
    Trophy = "Trophy"
    InfoFile = "InfoFile"


@dataclass(frozen=True)
class ActionPattern:
    """Trigger matched against classified events of one protocol."""

    protocol: Protocol
    action: ActionKind
    path_glob: str | None = None
    success: bool | None = None

    def matches(self, protocol: Protocol, action: ActionKind,
                success: bool, target: str) -> bool:
        if protocol is not self.protocol or action is not self.action:
            return False
        if self.success is not None and success != self.success:
            return False
        if self.path_glob is not None and not fnmatch.fnmatchcase(target, self.path_glob):
            return False
        return True


@dataclass(frozen=True)
class VulnSpec:
    kind: VulnKind
    difficulty: int = 1  # 1 (trivial) .. 5 (expert)
    params: Mapping[str, Any] = field(default_factory=dict)
    round_robin_group: str | None = None


@dataclass(frozen=True)
class Clue:
    kind: ClueKind
    asset: str
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Reward:
    kind: RewardKind
    value: str
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Stage:
    id: str
    name: str
    kind: StageKind
    vulnerabilities: tuple[VulnSpec, ...] = ()
    clues: tuple[Clue, ...] = ()
    rewards: tuple[Reward, ...] = ()


@dataclass(frozen=True)
class Transition:
    from_stage: str
    to_stage: str
    trigger: ActionPattern
    manipulation: ManipulationTechnique | None = None
    main_path: bool = False
    priority: int = 0


@dataclass(frozen=True)
class ScenarioGraph:
    id: str
    title: str
    entry: str
    stages: tuple[Stage, ...]
    transitions: tuple[Transition, ...]
    assets_dir: str

    @property
    def terminal_stages(self) -> frozenset[str]:
        return frozenset(s.id for s in self.stages if s.kind is StageKind.Terminal)

    def stage(self, stage_id: str) -> Stage:
        for s in self.stages:
            if s.id == stage_id:
                return s
        raise KeyError(stage_id)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _require(obj: Mapping[str, Any], key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(path, f"missing required key {key!r}")
    return obj[key]


def _check_keys(obj: Mapping[str, Any], allowed: set[str], path: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise SchemaError(f"{path}.{unknown[0]}", "unknown key")


def _enum(cls, value: Any, path: str):
    try:
        return cls(value)
    except (ValueError, TypeError):
        names = ", ".join(m.value for m in cls)
        raise SchemaError(path, f"expected one of [{names}], got {value!r}") from None


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise SchemaError(path, f"expected non-empty string, got {value!r}")
    return value


def _parse_pattern(obj: Any, path: str) -> ActionPattern:
    if not isinstance(obj, dict):
        raise SchemaError(path, "trigger must be an object")
    _check_keys(obj, {"protocol", "action", "path_glob", "success"}, path)
    protocol = _enum(Protocol, _require(obj, "protocol", path), f"{path}.protocol")
    action = _enum(ActionKind, _require(obj, "action", path), f"{path}.action")
    path_glob = obj.get("path_glob")
    if path_glob is not None and not isinstance(path_glob, str):
        raise SchemaError(f"{path}.path_glob", "expected string")
    success = obj.get("success")
    if success is not None and not isinstance(success, bool):
        raise SchemaError(f"{path}.success", "expected boolean")
    return ActionPattern(protocol=protocol, action=action, path_glob=path_glob, success=success)


def _parse_vuln(obj: Any, path: str) -> VulnSpec:
    if not isinstance(obj, dict):
        raise SchemaError(path, "vulnerability must be an object")
    _check_keys(obj, {"kind", "difficulty", "params", "round_robin_group"}, path)
    kind = _enum(VulnKind, _require(obj, "kind", path), f"{path}.kind")
    difficulty = obj.get("difficulty", 1)
    if not isinstance(difficulty, int) or not 1 <= difficulty <= 5:
        raise SchemaError(f"{path}.difficulty", f"expected integer in [1, 5], got {difficulty!r}")
    group = obj.get("round_robin_group")
    if group is not None:
        group = _str(group, f"{path}.round_robin_group")
    return VulnSpec(kind=kind, difficulty=difficulty,
                    params=dict(obj.get("params", {})), round_robin_group=group)


def _parse_clue(obj: Any, path: str) -> Clue:
    if not isinstance(obj, dict):
        raise SchemaError(path, "clue must be an object")
    _check_keys(obj, {"kind", "asset", "params"}, path)
    return Clue(kind=_enum(ClueKind, _require(obj, "kind", path), f"{path}.kind"),
                asset=_str(_require(obj, "asset", path), f"{path}.asset"),
                params=dict(obj.get("params", {})))


def _parse_reward(obj: Any, path: str) -> Reward:
    if not isinstance(obj, dict):
        raise SchemaError(path, "reward must be an object")
    _check_keys(obj, {"kind", "value", "params"}, path)
    return Reward(kind=_enum(RewardKind, _require(obj, "kind", path), f"{path}.kind"),
                  value=_str(_require(obj, "value", path), f"{path}.value"),
                  params=dict(obj.get("params", {})))


def _parse_stage(obj: Any, path: str) -> Stage:
    if not isinstance(obj, dict):
        raise SchemaError(path, "stage must be an object")
    _check_keys(obj, {"id", "name", "kind", "vulnerabilities", "clues", "rewards"}, path)
    return Stage(
        id=_str(_require(obj, "id", path), f"{path}.id"),
        name=_str(obj.get("name", obj.get("id", "")), f"{path}.name"),
        kind=_enum(StageKind, _require(obj, "kind", path), f"{path}.kind"),
        vulnerabilities=tuple(_parse_vuln(v, f"{path}.vulnerabilities[{i}]")
                              for i, v in enumerate(obj.get("vulnerabilities", []))),
        clues=tuple(_parse_clue(c, f"{path}.clues[{i}]")
                    for i, c in enumerate(obj.get("clues", []))),
        rewards=tuple(_parse_reward(r, f"{path}.rewards[{i}]")
                      for i, r in enumerate(obj.get("rewards", []))),
    )


def _parse_transition(obj: Any, path: str) -> Transition:
    if not isinstance(obj, dict):
        raise SchemaError(path, "transition must be an object")
    _check_keys(obj, {"from", "to", "trigger", "manipulation", "main_path", "priority"}, path)
    manipulation = obj.get("manipulation")
    if manipulation is not None:
        manipulation = _enum(ManipulationTechnique, manipulation, f"{path}.manipulation")
    main_path = obj.get("main_path", False)
    if not isinstance(main_path, bool):
        raise SchemaError(f"{path}.main_path", "expected boolean")
    priority = obj.get("priority", 0)
    if not isinstance(priority, int):
        raise SchemaError(f"{path}.priority", "expected integer")
    return Transition(
        from_stage=_str(_require(obj, "from", path), f"{path}.from"),
        to_stage=_str(_require(obj, "to", path), f"{path}.to"),
        trigger=_parse_pattern(_require(obj, "trigger", path), f"{path}.trigger"),
        manipulation=manipulation,
        main_path=main_path,
        priority=priority,
    )


TOP_LEVEL_KEYS = {"id", "title", "entry", "stages", "transitions", "assets_dir"}


def parse_scenario(config: str | Mapping[str, Any], base_dir: str | Path | None = None) -> ScenarioGraph:
    """Parse a scenario config (JSON text or mapping) into a ScenarioGraph.

    Unknown keys anywhere in the document raise SchemaError with the
    config path of the offender; duplicate stage ids raise
    DuplicateIdError.  ``base_dir`` anchors a relative assets_dir.
    """
    if isinstance(config, str):
        try:
            obj = json.loads(config)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"not valid JSON: {exc}") from exc
    else:
        obj = config
    if not isinstance(obj, dict):
        raise SchemaError("$", "config must be a JSON object")
    _check_keys(obj, TOP_LEVEL_KEYS, "$")

    stages = tuple(_parse_stage(s, f"$.stages[{i}]")
                   for i, s in enumerate(_require(obj, "stages", "$")))
    seen: set[str] = set()
    for i, s in enumerate(stages):
        if s.id in seen:
            raise DuplicateIdError(f"$.stages[{i}].id", f"duplicate stage id {s.id!r}")
        seen.add(s.id)

    transitions = tuple(_parse_transition(t, f"$.transitions[{i}]")
                        for i, t in enumerate(_require(obj, "transitions", "$")))

    assets_dir = _str(_require(obj, "assets_dir", "$"), "$.assets_dir")
    if base_dir is not None and not Path(assets_dir).is_absolute():
        assets_dir = str((Path(base_dir) / assets_dir).resolve())

    return ScenarioGraph(
        id=_str(_require(obj, "id", "$"), "$.id"),
        title=_str(_require(obj, "title", "$"), "$.title"),
        entry=_str(_require(obj, "entry", "$"), "$.entry"),
        stages=stages,
        transitions=transitions,
        assets_dir=assets_dir,
    )


def serialize_scenario(graph: ScenarioGraph) -> str:
    """Canonical JSON for a graph; parse(serialize(g)) == g."""
    def pattern(p: ActionPattern) -> dict:
        out: dict[str, Any] = {"protocol": p.protocol.value, "action": p.action.value}
        if p.path_glob is not None:
            out["path_glob"] = p.path_glob
        if p.success is not None:
            out["success"] = p.success
        return out

    doc = {
        "id": graph.id,
        "title": graph.title,
        "entry": graph.entry,
        "stages": [
            {
                "id": s.id,
                "name": s.name,
                "kind": s.kind.value,
                "vulnerabilities": [
                    {k: v for k, v in (("kind", vu.kind.value),
                                       ("difficulty", vu.difficulty),
                                       ("params", dict(vu.params)),
                                       ("round_robin_group", vu.round_robin_group))
                     if not (k == "round_robin_group" and v is None)}
                    for vu in s.vulnerabilities
                ],
                "clues": [{"kind": c.kind.value, "asset": c.asset, "params": dict(c.params)}
                          for c in s.clues],
                "rewards": [{"kind": r.kind.value, "value": r.value, "params": dict(r.params)}
                            for r in s.rewards],
            }
            for s in graph.stages
        ],
        "transitions": [
            {k: v for k, v in (("from", t.from_stage),
                               ("to", t.to_stage),
                               ("trigger", pattern(t.trigger)),
                               ("manipulation", t.manipulation.value if t.manipulation else None),
                               ("main_path", t.main_path),
                               ("priority", t.priority))
             if not (k == "manipulation" and v is None)}
            for t in graph.transitions
        ],
        "assets_dir": graph.assets_dir,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False)


def load_scenario(path: str | Path) -> ScenarioGraph:
    """Load a scenario from its bundle directory or config file path."""
    p = Path(path)
    if p.is_dir():
        p = p / "config.json"
    if not p.is_file():
        raise UnknownScenario(f"no scenario config at {p}")
    return parse_scenario(p.read_text(encoding="utf-8"), base_dir=p.parent)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

class ViolationKind(Enum):
    UNKNOWN_STAGE_REF = "unknown_stage_ref"
    MISSING_ENTRY = "missing_entry"
    MISSING_TERMINAL = "missing_terminal"
    UNREACHABLE_STAGE = "unreachable_stage"
    BROKEN_BACKBONE = "broken_backbone"
    AMBIGUOUS_TRIGGERS = "ambiguous_triggers"
    DANGLING_ASSET = "dangling_asset"
    BARE_VULN_STAGE = "bare_vulnerability_stage"
    BARE_REWARD_STAGE = "bare_reward_stage"
    SPLIT_ROUND_ROBIN = "split_round_robin_group"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind.value}({self.subject}): {self.detail}"


def _patterns_overlap(a: ActionPattern, b: ActionPattern) -> bool:
    if a.protocol is not b.protocol or a.action is not b.action:
        return False
    if a.success is not None and b.success is not None and a.success != b.success:
        return False
    if a.path_glob is not None and b.path_glob is not None and a.path_glob != b.path_glob:
        return False
    return True


def validate_graph(graph: ScenarioGraph) -> list[Violation]:
    """Structural validation; an empty list means the scenario is runnable."""
    out: list[Violation] = []
    ids = {s.id for s in graph.stages}
    by_id = {s.id: s for s in graph.stages}

    if graph.entry not in ids:
        out.append(Violation(ViolationKind.MISSING_ENTRY, graph.entry,
                             "entry stage is not defined"))
    for i, t in enumerate(graph.transitions):
        for ref in (t.from_stage, t.to_stage):
            if ref not in ids:
                out.append(Violation(ViolationKind.UNKNOWN_STAGE_REF, ref,
                                     f"transition {i} references undefined stage"))
    if not any(s.kind is StageKind.Terminal for s in graph.stages):
        out.append(Violation(ViolationKind.MISSING_TERMINAL, graph.id,
                             "no Terminal stage in graph"))

    # reachability over all transitions
    if graph.entry in ids:
        seen = {graph.entry}
        frontier = [graph.entry]
        outgoing: dict[str, list[Transition]] = {}
        for t in graph.transitions:
            outgoing.setdefault(t.from_stage, []).append(t)
        while frontier:
            cur = frontier.pop()
            for t in outgoing.get(cur, []):
                if t.to_stage in ids and t.to_stage not in seen:
                    seen.add(t.to_stage)
                    frontier.append(t.to_stage)
        for s in graph.stages:
            if s.id not in seen:
                out.append(Violation(ViolationKind.UNREACHABLE_STAGE, s.id,
                                     "no path from entry reaches this stage"))

    # backbone: every non-terminal stage has exactly one main-path exit and
    # following them from the entry ends on a terminal stage
    for s in graph.stages:
        mains = [t for t in graph.transitions if t.from_stage == s.id and t.main_path]
        if s.kind is StageKind.Terminal:
            if mains:
                out.append(Violation(ViolationKind.BROKEN_BACKBONE, s.id,
                                     "terminal stage has an outgoing main-path transition"))
        elif len(mains) != 1:
            out.append(Violation(ViolationKind.BROKEN_BACKBONE, s.id,
                                 f"expected exactly 1 main-path transition, found {len(mains)}"))
    if graph.entry in ids and not out:
        cur, hops = graph.entry, 0
        while by_id[cur].kind is not StageKind.Terminal:
            nxt = [t.to_stage for t in graph.transitions if t.from_stage == cur and t.main_path]
            if len(nxt) != 1 or nxt[0] not in ids:
                out.append(Violation(ViolationKind.BROKEN_BACKBONE, cur,
                                     "main path does not continue from here"))
                break
            cur = nxt[0]
            hops += 1
            if hops > len(graph.stages):
                out.append(Violation(ViolationKind.BROKEN_BACKBONE, cur,
                                     "main path loops without reaching a terminal stage"))
                break

    # trigger ambiguity: same stage, same priority, overlapping patterns
    for s in graph.stages:
        outs = [t for t in graph.transitions if t.from_stage == s.id]
        for i, a in enumerate(outs):
            for b in outs[i + 1:]:
                if a.priority == b.priority and _patterns_overlap(a.trigger, b.trigger):
                    out.append(Violation(
                        ViolationKind.AMBIGUOUS_TRIGGERS, s.id,
                        f"two transitions match {a.trigger.action.value} at priority {a.priority}"))

    # stage shape
    for s in graph.stages:
        if s.kind is StageKind.Vulnerability and not s.vulnerabilities:
            out.append(Violation(ViolationKind.BARE_VULN_STAGE, s.id,
                                 "Vulnerability stage exposes no vulnerability"))
        if s.kind is StageKind.Reward and not s.rewards:
            out.append(Violation(ViolationKind.BARE_REWARD_STAGE, s.id,
                                 "Reward stage carries no reward"))

    # round-robin groups must not span stages
    group_home: dict[str, str] = {}
    for s in graph.stages:
        for v in s.vulnerabilities:
            if v.round_robin_group:
                home = group_home.setdefault(v.round_robin_group, s.id)
                if home != s.id:
                    out.append(Violation(ViolationKind.SPLIT_ROUND_ROBIN, v.round_robin_group,
                                         f"group spans stages {home} and {s.id}"))

    # clue assets must resolve inside the bundle
    assets = Path(graph.assets_dir)
    for s in graph.stages:
        for c in s.clues:
            if not (assets / c.asset).is_file():
                out.append(Violation(ViolationKind.DANGLING_ASSET, c.asset,
                                     f"clue asset missing from {graph.assets_dir} (stage {s.id})"))
        for r in s.rewards:
            if r.kind is RewardKind.InfoFile and not (assets / r.value).is_file():
                out.append(Violation(ViolationKind.DANGLING_ASSET, r.value,
                                     f"reward file missing from {graph.assets_dir} (stage {s.id})"))
    return out


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompiledScenario:
    """Immutable runtime form of a validated graph."""

    graph: ScenarioGraph
    stages: Mapping[str, Stage]
    transitions_from: Mapping[str, tuple[Transition, ...]]
    backbone: tuple[str, ...]
    backbone_index: Mapping[str, int]
    depth: Mapping[str, int]  # BFS distance from entry, for off-backbone stages
    terminal: frozenset[str]

    @property
    def id(self) -> str:
        return self.graph.id

    @property
    def entry(self) -> str:
        return self.graph.entry

    @property
    def assets_dir(self) -> Path:
        return Path(self.graph.assets_dir)

    def first_match(self, stage_id: str, protocol: Protocol, action: ActionKind,
                    success: bool, target: str) -> Transition | None:
        """Highest-priority transition out of ``stage_id`` matching the event."""
        for t in self.transitions_from.get(stage_id, ()):
            if t.trigger.matches(protocol, action, success, target):
                return t
        return None

    def stage_depth(self, stage_id: str) -> int:
        if stage_id in self.backbone_index:
            return self.backbone_index[stage_id]
        return self.depth.get(stage_id, 0)

    def round_robin_groups(self) -> dict[str, tuple[VulnSpec, ...]]:
        groups: dict[str, list[VulnSpec]] = {}
        for s in self.stages.values():
            for v in s.vulnerabilities:
                if v.round_robin_group:
                    groups.setdefault(v.round_robin_group, []).append(v)
        return {k: tuple(v) for k, v in groups.items()}

    def to_bytes(self) -> bytes:
        """Deterministic serialization of the compiled tables."""
        doc = {
            "scenario": json.loads(serialize_scenario(self.graph)),
            "backbone": list(self.backbone),
            "depth": {k: self.depth[k] for k in sorted(self.depth)},
            "order": {k: [graph_transition_key(t) for t in v]
                      for k, v in sorted(self.transitions_from.items())},
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def graph_transition_key(t: Transition) -> str:
    glob = t.trigger.path_glob or "*"
    suc = "-" if t.trigger.success is None else str(t.trigger.success).lower()
    return (f"{t.from_stage}->{t.to_stage}:{t.trigger.protocol.value}"
            f":{t.trigger.action.value}:{glob}:{suc}:{t.priority}:{int(t.main_path)}")


def compile_runtime(graph: ScenarioGraph) -> CompiledScenario:
    """Validate and freeze a graph into its runtime machine.

    Raises CompileError carrying the violation list when the graph is not
    runnable.  Compiling the same graph twice yields byte-identical
    machines (see CompiledScenario.to_bytes).
    """
    violations = validate_graph(graph)
    if violations:
        raise CompileError(violations)

    by_id = {s.id: s for s in graph.stages}

    transitions_from: dict[str, list[Transition]] = {}
    for t in graph.transitions:
        transitions_from.setdefault(t.from_stage, []).append(t)
    ordered = {
        sid: tuple(sorted(ts, key=lambda t: (-t.priority, graph_transition_key(t))))
        for sid, ts in transitions_from.items()
    }

    backbone = [graph.entry]
    cur = graph.entry
    while by_id[cur].kind is not StageKind.Terminal:
        cur = next(t.to_stage for t in graph.transitions
                   if t.from_stage == cur and t.main_path)
        backbone.append(cur)

    depth = {graph.entry: 0}
    frontier = [graph.entry]
    while frontier:
        nxt: list[str] = []
        for sid in frontier:
            for t in ordered.get(sid, ()):
                if t.to_stage not in depth:
                    depth[t.to_stage] = depth[sid] + 1
                    nxt.append(t.to_stage)
        frontier = nxt

    return CompiledScenario(
        graph=graph,
        stages=by_id,
        transitions_from=ordered,
        backbone=tuple(backbone),
        backbone_index={sid: i for i, sid in enumerate(backbone)},
        depth=depth,
        terminal=graph.terminal_stages,
    )


# ---------------------------------------------------------------------------
# bundled scenarios
# ---------------------------------------------------------------------------

def bundled_scenario_dir() -> Path:
    return Path(__file__).parent / "scenarios"


def bundled_scenario_ids() -> list[str]:
    root = bundled_scenario_dir()
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if (p / "config.json").is_file())


def find_scenario(ref: str) -> ScenarioGraph:
    """Resolve a bundled scenario id or a filesystem path to a graph."""
    bundled = bundled_scenario_dir() / ref
    if (bundled / "config.json").is_file():
        return load_scenario(bundled)
    p = Path(ref)
    if p.exists():
        return load_scenario(p)
    raise UnknownScenario(f"{ref!r} is neither a bundled scenario id {bundled_scenario_ids()} "
                          f"nor a path")


def iter_bundled() -> Iterator[ScenarioGraph]:
    for sid in bundled_scenario_ids():
        yield load_scenario(bundled_scenario_dir() / sid)


def runtime_settings(graph: ScenarioGraph) -> dict[str, Any]:
    """Load the bundle's decoy/engine wiring (assets/runtime.json), if any."""
    path = Path(graph.assets_dir) / "runtime.json"
    if not path.is_file():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


if __name__ == "__main__":  # quick bundle check: python -m decoyweaver.scenario
    for g in iter_bundled():
        problems = validate_graph(g)
        status = "ok" if not problems else "; ".join(str(v) for v in problems)
        print(f"{g.id}: {len(g.stages)} stages, {len(g.transitions)} transitions -> {status}",
              file=sys.stdout)
