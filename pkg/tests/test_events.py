"""Classifier and log record tests."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decoyweaver.errors import MalformedRecord
from decoyweaver.events import (
    ALLOWED_KINDS,
    ATTACK_KINDS,
    RAW_EXCERPT_LIMIT,
    RECORD_FIELDS,
    ActionEvent,
    ActionKind,
    Protocol,
    classify_action,
    dump_record,
    extract_target,
    parse_record_line,
    record_to_event,
    sqli_breaks_out,
    ssh_file_target,
    to_record,
    xss_would_fire,
)


def http(method: str, path: str, body: str = "", headers: str = "") -> str:
    head = f"{method} {path} HTTP/1.1\r\nHost: shop\r\n{headers}"
    return head + "\r\n\r\n" + body


# ---------------------------------------------------------------------------
# classification rule list
# ---------------------------------------------------------------------------

HTTP_CASES = [
    (http("GET", "/"), ActionKind.PageFetch),
    (http("GET", "/products?id=3"), ActionKind.PageFetch),
    (http("GET", "/robots.txt"), ActionKind.RobotsFetch),
    (http("GET", "/robot.txt"), ActionKind.RobotsFetch),
    (http("POST", "/login", body="username=bob&password=hunter2"), ActionKind.LoginAttempt),
    (http("POST", "/login", body="username=' OR '1'='1&password=x"), ActionKind.SqlInjectionAttempt),
    (http("GET", "/products?id=1+UNION+SELECT+name+FROM+users"), ActionKind.SqlInjectionAttempt),
    (http("POST", "/login", body="username=admin'--"), ActionKind.SqlInjectionAttempt),
    (http("POST", "/comments", body="text=<script>alert(1)</script>"), ActionKind.XssAttempt),
    (http("POST", "/comments", body='text=<img src=x onerror=alert(1)>'), ActionKind.XssAttempt),
    (http("GET", "/admin"), ActionKind.AdminAccess),
    (http("GET", "/admin/panel"), ActionKind.AdminAccess),
    (http("GET", "/admin/database.db"), ActionKind.FileDownload),
    (http("GET", "/export/orders.csv"), ActionKind.FileDownload),
    (http("POST", "/upload", body="x"), ActionKind.FileUpload),
    (http("DELETE", "/zzz"), ActionKind.Other),
]


@pytest.mark.parametrize("raw,expected", HTTP_CASES, ids=lambda v: repr(v)[:48])
def test_classify_http(raw, expected):
    assert classify_action(Protocol.HTTP, raw) is expected


FTP_CASES = [
    ("USER anonymous", ActionKind.FtpLogin),
    ("PASS guest@", ActionKind.FtpLogin),
    ("RETR Database.DB", ActionKind.FileDownload),
    ("STOR shell.php", ActionKind.FileUpload),
    ("LIST", ActionKind.PageFetch),
    ("CWD pub", ActionKind.PageFetch),
    ("SYST", ActionKind.Other),
    ("USER " + "A" * 2000, ActionKind.ExploitAttempt),
]


@pytest.mark.parametrize("raw,expected", FTP_CASES)
def test_classify_ftp(raw, expected):
    assert classify_action(Protocol.FTP, raw) is expected


SSH_CASES = [
    ("auth user=root pass=root node=front", ActionKind.SshLogin),
    ("login user=svc pass=brokersvc node=broker", ActionKind.SshLogin),
    ("cat nmap_scan.txt node=broker", ActionKind.FileDownload),
    ("ls node=front", ActionKind.PageFetch),
    ("\x90" * 12, ActionKind.ExploitAttempt),
    ("A" * 80, ActionKind.ExploitAttempt),
    ("x" * 2000, ActionKind.ExploitAttempt),
    ("plugh", ActionKind.Other),
]


@pytest.mark.parametrize("raw,expected", SSH_CASES)
def test_classify_ssh(raw, expected):
    assert classify_action(Protocol.SSH, raw) is expected


def test_classify_mqtt():
    assert classify_action(Protocol.MQTT, "CONNECT client=box user=fleet") is ActionKind.MqttConnect
    assert classify_action(Protocol.MQTT, "PUBLISH topic=a") is ActionKind.Other


def test_scanner_user_agent_wins():
    raw = http("GET", "/", headers="User-Agent: sqlmap/1.4.7#stable\r\n")
    assert classify_action(Protocol.HTTP, raw) is ActionKind.ScanBurst


def test_rate_threshold_forces_scan_burst():
    raw = http("GET", "/")
    assert classify_action(Protocol.HTTP, raw, recent_rate_per_min=61.0) is ActionKind.ScanBurst
    assert classify_action(Protocol.HTTP, raw, recent_rate_per_min=60.0) is ActionKind.PageFetch


def test_classifier_accepts_bytes():
    assert classify_action(Protocol.HTTP, b"GET /robots.txt HTTP/1.1\r\n\r\n") is ActionKind.RobotsFetch
    assert classify_action(Protocol.SSH, b"\x90" * 20) is ActionKind.ExploitAttempt


def test_attack_kinds_partition():
    benign = set(ActionKind) - set(ATTACK_KINDS)
    assert benign == {ActionKind.PageFetch, ActionKind.RobotsFetch,
                      ActionKind.FileDownload, ActionKind.Other}


@settings(max_examples=300, deadline=None)
@given(protocol=st.sampled_from(list(Protocol)), raw=st.binary(max_size=300))
def test_classifier_total_on_arbitrary_bytes(protocol, raw):
    """Any input classifies to a kind that is legal for the protocol."""
    kind = classify_action(protocol, raw)
    assert isinstance(kind, ActionKind)
    assert kind in ALLOWED_KINDS[protocol]


@settings(max_examples=200, deadline=None)
@given(raw=st.text(max_size=200), rate=st.floats(0, 500, allow_nan=False))
def test_classifier_deterministic(raw, rate):
    a = classify_action(Protocol.HTTP, raw, recent_rate_per_min=rate)
    b = classify_action(Protocol.HTTP, raw, recent_rate_per_min=rate)
    assert a is b


# ---------------------------------------------------------------------------
# payload sub-checks
# ---------------------------------------------------------------------------

def test_sqli_breakout_vs_probe():
    assert sqli_breaks_out("username=' OR '1'='1&password=x")
    assert sqli_breaks_out("u=1 UNION SELECT pass FROM users")
    assert not sqli_breaks_out("username=admin'--")  # cuts the query, no tautology
    assert not sqli_breaks_out("plain text")


def test_xss_would_fire_requires_complete_element():
    assert xss_would_fire("<script>alert(1)</script>")
    assert xss_would_fire('<img src=x onerror=alert(1)>')
    assert not xss_would_fire("<script>alert(1)")       # never closed
    assert not xss_would_fire("onerror=alert(1)")       # handler outside an element


# ---------------------------------------------------------------------------
# target extraction
# ---------------------------------------------------------------------------

def test_extract_target_http_strips_query():
    assert extract_target(Protocol.HTTP, http("GET", "/admin/database.db?dl=1")) == "/admin/database.db"


def test_extract_target_ftp_argument():
    assert extract_target(Protocol.FTP, "RETR Database.DB") == "Database.DB"
    assert extract_target(Protocol.FTP, "LIST") == ""


def test_extract_target_ssh_prefers_file_over_node():
    assert extract_target(Protocol.SSH, "cat nmap_scan.txt node=broker") == "nmap_scan.txt"
    assert extract_target(Protocol.SSH, "ls node=node-3") == "node-3"
    assert ssh_file_target("cat audit.txt node=broker") == "audit.txt"
    assert ssh_file_target("ls node=broker") == ""


def test_extract_target_mqtt_client_id():
    assert extract_target(Protocol.MQTT, "CONNECT client=sensor-7 user=fleet") == "sensor-7"


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

def test_raw_excerpt_is_bounded():
    ev = ActionEvent(ts=1, protocol=Protocol.HTTP, raw="G" * (RAW_EXCERPT_LIMIT + 500),
                     action=ActionKind.Other, success=False)
    assert len(ev.raw) == RAW_EXCERPT_LIMIT


def test_record_round_trip():
    ev = ActionEvent(ts=1736000000000, protocol=Protocol.HTTP,
                     raw=http("GET", "/robots.txt"), action=ActionKind.RobotsFetch,
                     success=True)
    rec = to_record("webshop-20260101-127.0.0.9", ev, "shop_front", "admin_disclosed")
    line = dump_record(rec)
    back = parse_record_line(line)
    assert back == rec
    ev2 = record_to_event(back)
    assert (ev2.ts, ev2.protocol, ev2.action, ev2.success, ev2.raw) == \
           (ev.ts, ev.protocol, ev.action, ev.success, ev.raw)


def test_dump_record_key_order_is_fixed():
    ev = ActionEvent(ts=5, protocol=Protocol.FTP, raw="USER x",
                     action=ActionKind.FtpLogin, success=False)
    rec = to_record("s", ev, "a", "a")
    rec["operator_id"] = "op-1"
    keys = list(json.loads(dump_record(rec)))
    assert keys == list(RECORD_FIELDS) + ["operator_id"]


@pytest.mark.parametrize("line", [
    "",
    "   ",
    "not json",
    "[1,2]",
    '{"session_id":"s"}',
    '{"session_id":"s","ts":"NaNish","protocol":"HTTP","action":"Other",'
    '"success":true,"stage_before":"a","stage_after":"a","raw_excerpt":""}',
    '{"session_id":"s","ts":1,"protocol":"GOPHER","action":"Other",'
    '"success":true,"stage_before":"a","stage_after":"a","raw_excerpt":""}',
])
def test_parse_record_line_rejects_garbage(line):
    with pytest.raises(MalformedRecord):
        parse_record_line(line)
