"""Scenario parsing, validation and compilation."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from decoyweaver.errors import (
    CompileError,
    DuplicateIdError,
    SchemaError,
    UnknownScenario,
)
from decoyweaver.events import ActionKind, Protocol
from decoyweaver.scenario import (
    ViolationKind,
    bundled_scenario_dir,
    bundled_scenario_ids,
    compile_runtime,
    find_scenario,
    load_scenario,
    parse_scenario,
    runtime_settings,
    serialize_scenario,
    validate_graph,
)


def minimal(**overrides) -> dict:
    """Smallest valid scenario document; overrides merge at the top level."""
    doc = {
        "id": "tiny",
        "title": "tiny",
        "entry": "start",
        "assets_dir": "assets",
        "stages": [
            {"id": "start", "name": "start", "kind": "Entry"},
            {"id": "end", "name": "end", "kind": "Terminal"},
        ],
        "transitions": [
            {"from": "start", "to": "end", "main_path": True,
             "trigger": {"protocol": "HTTP", "action": "PageFetch"}},
        ],
    }
    doc.update(overrides)
    return doc


def compile_doc(doc):
    return compile_runtime(parse_scenario(doc))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def test_parse_minimal():
    graph = parse_scenario(minimal())
    assert graph.entry == "start"
    assert [s.id for s in graph.stages] == ["start", "end"]
    assert graph.transitions[0].main_path is True


def test_parse_accepts_json_text():
    graph = parse_scenario(json.dumps(minimal()))
    assert graph.id == "tiny"


@pytest.mark.parametrize("mutate,fragment", [
    (lambda d: d.update(surprise=1), "surprise"),
    (lambda d: d["stages"][0].update(color="red"), "color"),
    (lambda d: d["transitions"][0].update(weight=2), "weight"),
    (lambda d: d["transitions"][0]["trigger"].update(verb="GET"), "verb"),
])
def test_unknown_keys_are_rejected(mutate, fragment):
    doc = minimal()
    mutate(doc)
    with pytest.raises(SchemaError) as err:
        parse_scenario(doc)
    assert fragment in str(err.value)


def test_unknown_keys_in_vuln_clue_reward():
    doc = minimal()
    doc["stages"][0]["vulnerabilities"] = [
        {"kind": "RobotsDisclosure", "difficulty": 1, "bogus": True}]
    with pytest.raises(SchemaError):
        parse_scenario(doc)

    doc = minimal()
    doc["stages"][0]["clues"] = [{"kind": "PlantedComment", "asset": "x.txt", "oops": 1}]
    with pytest.raises(SchemaError):
        parse_scenario(doc)

    doc = minimal()
    doc["stages"][1]["rewards"] = [{"kind": "Badge", "value": "v", "extra": 1}]
    with pytest.raises(SchemaError):
        parse_scenario(doc)


def test_missing_required_key():
    doc = minimal()
    del doc["entry"]
    with pytest.raises(SchemaError) as err:
        parse_scenario(doc)
    assert "entry" in str(err.value)


def test_bad_enum_value_names_path():
    doc = minimal()
    doc["stages"][0]["kind"] = "Lobby"
    with pytest.raises(SchemaError) as err:
        parse_scenario(doc)
    assert "Lobby" in str(err.value)


def test_duplicate_stage_ids():
    doc = minimal()
    doc["stages"].append({"id": "start", "name": "again", "kind": "Terminal"})
    with pytest.raises(DuplicateIdError):
        parse_scenario(doc)


def test_difficulty_range_enforced():
    doc = minimal()
    doc["stages"][0]["vulnerabilities"] = [{"kind": "StoredXss", "difficulty": 9}]
    with pytest.raises(SchemaError):
        parse_scenario(doc)


def test_serialize_round_trip(tmp_path):
    graph = find_scenario("webshop")
    text = serialize_scenario(graph)
    again = parse_scenario(text, base_dir=Path(graph.assets_dir).parent)
    assert again == graph
    assert serialize_scenario(again) == text


# ---------------------------------------------------------------------------
# validation catalogue
# ---------------------------------------------------------------------------

def kinds_of(graph) -> set[ViolationKind]:
    return {v.kind for v in validate_graph(graph)}


def test_missing_entry():
    doc = minimal(entry="nowhere")
    assert ViolationKind.MISSING_ENTRY in kinds_of(parse_scenario(doc))


def test_unknown_stage_ref():
    doc = minimal()
    doc["transitions"].append({"from": "start", "to": "ghost",
                               "trigger": {"protocol": "HTTP", "action": "Other"}})
    assert ViolationKind.UNKNOWN_STAGE_REF in kinds_of(parse_scenario(doc))


def test_missing_terminal():
    doc = minimal()
    doc["stages"][1]["kind"] = "Reward"
    doc["stages"][1]["rewards"] = [{"kind": "Badge", "value": "v"}]
    doc["transitions"].append({"from": "end", "to": "start", "main_path": True,
                               "trigger": {"protocol": "HTTP", "action": "AdminAccess"}})
    assert ViolationKind.MISSING_TERMINAL in kinds_of(parse_scenario(doc))


def test_unreachable_stage():
    doc = minimal()
    doc["stages"].append({"id": "island", "name": "island", "kind": "Terminal"})
    assert ViolationKind.UNREACHABLE_STAGE in kinds_of(parse_scenario(doc))


def test_backbone_must_be_single_main_path():
    doc = minimal()
    doc["transitions"][0]["main_path"] = False
    assert ViolationKind.BROKEN_BACKBONE in kinds_of(parse_scenario(doc))

    doc = minimal()
    doc["transitions"].append({"from": "start", "to": "end", "main_path": True, "priority": 5,
                               "trigger": {"protocol": "FTP", "action": "FtpLogin"}})
    assert ViolationKind.BROKEN_BACKBONE in kinds_of(parse_scenario(doc))


def test_terminal_stage_with_main_exit_is_broken():
    doc = minimal()
    doc["transitions"].append({"from": "end", "to": "start", "main_path": True,
                               "trigger": {"protocol": "HTTP", "action": "Other"}})
    assert ViolationKind.BROKEN_BACKBONE in kinds_of(parse_scenario(doc))


def test_ambiguous_triggers_same_priority():
    doc = minimal()
    doc["transitions"].append({"from": "start", "to": "end", "priority": 10,
                               "trigger": {"protocol": "HTTP", "action": "LoginAttempt"}})
    doc["transitions"].append({"from": "start", "to": "end", "priority": 10,
                               "trigger": {"protocol": "HTTP", "action": "LoginAttempt"}})
    assert ViolationKind.AMBIGUOUS_TRIGGERS in kinds_of(parse_scenario(doc))


def test_distinct_priorities_are_not_ambiguous():
    doc = minimal()
    doc["transitions"].append({"from": "start", "to": "end", "priority": 10,
                               "trigger": {"protocol": "HTTP", "action": "LoginAttempt"}})
    doc["transitions"].append({"from": "start", "to": "end", "priority": 9,
                               "trigger": {"protocol": "HTTP", "action": "LoginAttempt"}})
    assert ViolationKind.AMBIGUOUS_TRIGGERS not in kinds_of(parse_scenario(doc))


def test_bare_stage_shapes():
    doc = minimal()
    doc["stages"][0]["kind"] = "Vulnerability"
    assert ViolationKind.BARE_VULN_STAGE in kinds_of(parse_scenario(doc))

    doc = minimal()
    doc["stages"][1]["kind"] = "Reward"
    doc["stages"].append({"id": "fin", "name": "fin", "kind": "Terminal"})
    doc["transitions"].append({"from": "end", "to": "fin", "main_path": True,
                               "trigger": {"protocol": "HTTP", "action": "Other"}})
    assert ViolationKind.BARE_REWARD_STAGE in kinds_of(parse_scenario(doc))


def test_round_robin_group_must_live_on_one_stage():
    doc = minimal()
    doc["stages"][0]["vulnerabilities"] = [
        {"kind": "WeakCredentials", "difficulty": 2, "round_robin_group": "g"}]
    doc["stages"][1]["kind"] = "Vulnerability"
    doc["stages"][1]["vulnerabilities"] = [
        {"kind": "WeakCredentials", "difficulty": 2, "round_robin_group": "g"}]
    doc["stages"].append({"id": "fin", "name": "fin", "kind": "Terminal"})
    doc["transitions"].append({"from": "end", "to": "fin", "main_path": True,
                               "trigger": {"protocol": "HTTP", "action": "Other"}})
    assert ViolationKind.SPLIT_ROUND_ROBIN in kinds_of(parse_scenario(doc))


def test_dangling_clue_asset(tmp_path):
    doc = minimal(assets_dir="assets")
    doc["stages"][0]["clues"] = [{"kind": "PlantedComment", "asset": "missing.txt"}]
    (tmp_path / "assets").mkdir()
    graph = parse_scenario(doc, base_dir=tmp_path)
    assert ViolationKind.DANGLING_ASSET in kinds_of(graph)


def test_compile_error_carries_violations():
    doc = minimal(entry="nowhere")
    with pytest.raises(CompileError) as err:
        compile_doc(doc)
    assert any(v.kind is ViolationKind.MISSING_ENTRY for v in err.value.violations)


# ---------------------------------------------------------------------------
# compiled machine
# ---------------------------------------------------------------------------

def test_bundled_ids():
    assert bundled_scenario_ids() == ["ftp-depot", "iot-fleet", "webshop", "webshop-annex"]


@pytest.mark.parametrize("sid", ["webshop", "webshop-annex", "ftp-depot", "iot-fleet"])
def test_bundled_scenarios_validate_and_compile(sid):
    graph = find_scenario(sid)
    assert validate_graph(graph) == []
    machine = compile_runtime(graph)
    assert machine.backbone[0] == graph.entry
    assert machine.backbone[-1] in machine.terminal


def test_webshop_backbone(webshop):
    assert webshop.backbone == ("shop_front", "admin_disclosed", "admin", "loot")


def test_ftp_depot_backbone(ftp_depot):
    assert ftp_depot.backbone == ("ftp_entry", "ftp_files", "planted_site", "site_breached")


def test_iot_fleet_backbone(iot_fleet):
    assert iot_fleet.backbone == (
        "iot_entry", "device", "broker", "scan_reviewed", "secondary_target")


def test_stage_depth_on_and_off_backbone(webshop):
    assert webshop.stage_depth("admin") == 2
    assert webshop.stage_depth("xss_posted") == 1  # branch terminal, one hop out


def test_first_match_orders_by_priority():
    doc = minimal()
    doc["stages"].insert(1, {"id": "alt", "name": "alt", "kind": "Terminal"})
    doc["transitions"].append({"from": "start", "to": "alt", "priority": 50,
                               "trigger": {"protocol": "HTTP", "action": "PageFetch"}})
    machine = compile_doc(doc)
    hit = machine.first_match("start", Protocol.HTTP, ActionKind.PageFetch, True, "/")
    assert hit is not None and hit.to_stage == "alt"  # 50 beats the default 0


def test_first_match_respects_success_and_glob(webshop):
    miss = webshop.first_match("admin", Protocol.HTTP, ActionKind.FileDownload,
                               True, "/admin/theme.css.db")
    assert miss is None
    hit = webshop.first_match("admin", Protocol.HTTP, ActionKind.FileDownload,
                              True, "/admin/database.db")
    assert hit is not None and hit.to_stage == "loot"
    assert webshop.first_match("admin", Protocol.HTTP, ActionKind.FileDownload,
                               False, "/admin/database.db") is None


def test_compilation_is_deterministic(webshop):
    graph = find_scenario("webshop")
    assert compile_runtime(graph).to_bytes() == webshop.to_bytes()


def test_round_robin_groups_surface(iot_fleet):
    groups = iot_fleet.round_robin_groups()
    assert set(groups) == {"fleet-nodes"}
    assert len(groups["fleet-nodes"]) == 5


def test_find_scenario_by_path_and_unknown():
    by_path = load_scenario(bundled_scenario_dir() / "webshop")
    assert by_path.id == "webshop"
    with pytest.raises(UnknownScenario):
        find_scenario("no-such-scenario")


def test_runtime_settings_loaded():
    settings = runtime_settings(find_scenario("webshop"))
    roles = [e["role"] for e in settings["endpoints"]]
    assert roles == ["http"]
    assert settings["endpoints"][0]["decoy"] == "http_shop"
