"""Protocol events and the rule-list classifier.

Every interaction a decoy sees is condensed to an ActionEvent: a timestamp,
the protocol, a bounded raw excerpt and a classified ActionKind.  The
classifier is a pure, ordered rule list over the raw bytes plus the
caller-supplied request rate, so identical input always yields the same
kind regardless of engine state.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any
from urllib.parse import unquote_plus

RAW_EXCERPT_LIMIT = 4096

# requests per minute beyond which a source is treated as an automated scan
DEFAULT_SCAN_THRESHOLD = 60.0


class Protocol(Enum):
    HTTP = "HTTP"
    FTP = "FTP"
    SSH = "SSH"
    MQTT = "MQTT"


class ActionKind(Enum):
    PageFetch = "PageFetch"
    RobotsFetch = "RobotsFetch"
    LoginAttempt = "LoginAttempt"
    SqlInjectionAttempt = "SqlInjectionAttempt"
    XssAttempt = "XssAttempt"
    AdminAccess = "AdminAccess"
    FileDownload = "FileDownload"
    FileUpload = "FileUpload"
    FtpLogin = "FtpLogin"
    SshLogin = "SshLogin"
    MqttConnect = "MqttConnect"
    ScanBurst = "ScanBurst"
    ExploitAttempt = "ExploitAttempt"
    Other = "Other"


#: action kinds that count as hostile engagement rather than plain browsing
#: kinds that count as attacks for the attempt/success session rates.
#: Pure reconnaissance (page pulls, robots.txt) and carrying loot away
#: (FileDownload) stay out: a robots probe is served with a 200 and would
#: otherwise count every curious crawler as a successful attacker.
ATTACK_KINDS = frozenset({
    ActionKind.LoginAttempt,
    ActionKind.SqlInjectionAttempt,
    ActionKind.XssAttempt,
    ActionKind.AdminAccess,
    ActionKind.FileUpload,
    ActionKind.FtpLogin,
    ActionKind.SshLogin,
    ActionKind.MqttConnect,
    ActionKind.ScanBurst,
    ActionKind.ExploitAttempt,
})

#: which kinds may legally appear under which protocol
ALLOWED_KINDS = {
    Protocol.HTTP: frozenset({
        ActionKind.PageFetch, ActionKind.RobotsFetch, ActionKind.LoginAttempt,
        ActionKind.SqlInjectionAttempt, ActionKind.XssAttempt, ActionKind.AdminAccess,
        ActionKind.FileDownload, ActionKind.FileUpload, ActionKind.ScanBurst,
        ActionKind.Other,
    }),
    Protocol.FTP: frozenset({
        ActionKind.FtpLogin, ActionKind.FileDownload, ActionKind.FileUpload,
        ActionKind.PageFetch, ActionKind.ScanBurst, ActionKind.ExploitAttempt,
        ActionKind.Other,
    }),
    Protocol.SSH: frozenset({
        ActionKind.SshLogin, ActionKind.FileDownload, ActionKind.PageFetch,
        ActionKind.ExploitAttempt, ActionKind.ScanBurst, ActionKind.Other,
    }),
    Protocol.MQTT: frozenset({
        ActionKind.MqttConnect, ActionKind.ScanBurst, ActionKind.Other,
    }),
}


@dataclass
class ActionEvent:
    """One classified protocol interaction."""

    ts: int  # epoch milliseconds
    protocol: Protocol
    raw: str  # bounded excerpt of the request
    action: ActionKind
    success: bool
    inter_event_ms: int = 0

    def __post_init__(self) -> None:
        if len(self.raw) > RAW_EXCERPT_LIMIT:
            self.raw = self.raw[:RAW_EXCERPT_LIMIT]


# ---------------------------------------------------------------------------
# signature tables
# ---------------------------------------------------------------------------

SCANNER_SIGNATURES = [
    re.compile(sig, re.IGNORECASE)
    for sig in (r"sqlmap", r"nikto", r"nmap", r"masscan", r"dirbuster", r"dirb",
                r"gobuster", r"wpscan", r"zgrab", r"nuclei", r"hydra")
]

SQLI_RULES = [
    re.compile(r"union\s+(all\s+)?select", re.IGNORECASE),
    re.compile(r"'\s*(or|and)\s*'?\d*'?\s*=\s*'?\d*", re.IGNORECASE),  # '1'='1 tautology
    re.compile(r"\b(or|and)\s+1\s*=\s*1\b", re.IGNORECASE),
    re.compile(r"(--|#|/\*)\s*$"),  # trailing comment cuts the query
    re.compile(r";\s*(drop|insert|update|delete)\s", re.IGNORECASE),
]

#: a tautology or stacked statement that would actually subvert the login
SQLI_BREAKOUT = [
    re.compile(r"'\s*or\s*'?1'?\s*=\s*'?1", re.IGNORECASE),
    re.compile(r"\bor\s+1\s*=\s*1\b", re.IGNORECASE),
    re.compile(r"union\s+(all\s+)?select", re.IGNORECASE),
]

XSS_RULES = [
    re.compile(r"<\s*script", re.IGNORECASE),
    re.compile(r"\bon(error|load|click|mouseover|focus)\s*=", re.IGNORECASE),
    re.compile(r"javascript\s*:", re.IGNORECASE),
    re.compile(r"<\s*(img|svg|iframe)[^>]*>", re.IGNORECASE),
]

#: payload that would fire when echoed back unescaped: a closed script tag
#: or an event handler inside a complete element
XSS_EXECUTABLE = [
    re.compile(r"<\s*script[^>]*>.*</\s*script\s*>", re.IGNORECASE | re.DOTALL),
    re.compile(r"<[a-z]+[^>]*\bon(error|load|click|mouseover|focus)\s*=[^>]*>", re.IGNORECASE),
]

DOWNLOAD_EXTENSIONS = (".db", ".csv", ".sql", ".zip", ".tar", ".gz", ".bak", ".pcap", ".txt")

_unbalanced_quote = re.compile(r"=[^&]*'[^'&]*(&|$)")

_EXPLOIT_PAYLOAD_MIN = 1024
_NOP_SLED = re.compile(r"(\\x90|\x90|%90){8,}|A{64,}")


def _http_parts(raw: str) -> tuple[str, str, str, str]:
    """Split an HTTP request excerpt into (method, path, headers, body)."""
    head, _, body = raw.partition("\r\n\r\n")
    if body == "" and "\n\n" in raw:
        head, _, body = raw.partition("\n\n")
    lines = head.splitlines()
    request_line = lines[0] if lines else ""
    parts = request_line.split()
    method = parts[0].upper() if parts else ""
    path = parts[1] if len(parts) > 1 else ""
    headers = "\n".join(lines[1:])
    return method, path, headers, body


def _to_text(raw: bytes | str) -> str:
    if isinstance(raw, bytes):
        return raw.decode("latin-1", errors="replace")
    return raw


def extract_target(protocol: Protocol, raw: bytes | str) -> str:
    """Pull the matcher target out of a raw excerpt.

    HTTP -> request path (query stripped), FTP -> command argument,
    SSH -> node tag (``node=<id>``), MQTT -> client id if present.
    The result is what transition path globs match against.
    """
    text = _to_text(raw)
    if protocol is Protocol.HTTP:
        _, path, _, _ = _http_parts(text)
        return path.split("?", 1)[0]
    if protocol is Protocol.FTP:
        first = text.splitlines()[0] if text else ""
        parts = first.split(None, 1)
        return parts[1].strip() if len(parts) > 1 else ""
    if protocol is Protocol.SSH:
        # file reads match on the file name, everything else on the node tag
        m = re.search(r"\bcat\s+(\S+)", text)
        if m:
            return m.group(1)
        m = re.search(r"node=(\S+)", text)
        return m.group(1) if m else ""
    if protocol is Protocol.MQTT:
        m = re.search(r"client=(\S+)", text)
        return m.group(1) if m else ""
    return ""


def ssh_file_target(raw: bytes | str) -> str:
    """File argument of an SSH shell read (``cat <file>``), if any."""
    m = re.search(r"\bcat\s+(\S+)", _to_text(raw))
    return m.group(1) if m else ""


def looks_like_sqli(text: str) -> bool:
    if any(r.search(text) for r in SQLI_RULES):
        return True
    # unbalanced quote inside a form value is the classic probe
    return bool(_unbalanced_quote.search(text)) and text.count("'") % 2 == 1


def sqli_breaks_out(text: str) -> bool:
    """True when the payload is the kind of tautology the login falls for."""
    return any(r.search(text) for r in SQLI_BREAKOUT)


def looks_like_xss(text: str) -> bool:
    return any(r.search(text) for r in XSS_RULES)


def xss_would_fire(text: str) -> bool:
    return any(r.search(text) for r in XSS_EXECUTABLE)


def _classify_http(text: str) -> ActionKind:
    method, path, headers, body = _http_parts(text)
    # form posts and query strings arrive percent-encoded; match on the
    # decoded payload or 'id=1+UNION+SELECT...' sails straight past the rules
    probe = unquote_plus(path) + "\n" + unquote_plus(body)
    if looks_like_sqli(probe):
        return ActionKind.SqlInjectionAttempt
    if looks_like_xss(probe):
        return ActionKind.XssAttempt
    bare = path.split("?", 1)[0]
    if bare in ("/robots.txt", "/robot.txt"):
        return ActionKind.RobotsFetch
    if method == "POST" and ("upload" in bare or "multipart/form-data" in headers):
        return ActionKind.FileUpload
    if method == "POST" and (bare.endswith("/login") or ("password=" in body and ("user" in body or "login" in body))):
        return ActionKind.LoginAttempt
    if bare.lower().endswith(DOWNLOAD_EXTENSIONS) and bare not in ("/robots.txt", "/robot.txt"):
        return ActionKind.FileDownload
    if bare == "/admin" or bare.startswith("/admin/"):
        return ActionKind.AdminAccess
    if method in ("GET", "HEAD", "POST"):
        return ActionKind.PageFetch
    return ActionKind.Other


def _classify_ftp(text: str) -> ActionKind:
    first = text.splitlines()[0] if text else ""
    verb = first.split(None, 1)[0].upper() if first.split() else ""
    if len(first) > _EXPLOIT_PAYLOAD_MIN or _NOP_SLED.search(first):
        return ActionKind.ExploitAttempt
    if verb in ("USER", "PASS"):
        return ActionKind.FtpLogin
    if verb == "RETR":
        return ActionKind.FileDownload
    if verb in ("STOR", "APPE"):
        return ActionKind.FileUpload
    if verb in ("LIST", "NLST", "CWD", "PWD"):
        return ActionKind.PageFetch
    return ActionKind.Other


def _classify_ssh(text: str) -> ActionKind:
    if len(text) > _EXPLOIT_PAYLOAD_MIN or _NOP_SLED.search(text):
        return ActionKind.ExploitAttempt
    if re.search(r"\b(login|auth)\b", text) and "user=" in text:
        return ActionKind.SshLogin
    if re.search(r"\bcat\s+\S+", text):
        return ActionKind.FileDownload
    if re.search(r"\b(ls|dir|pwd|id|uname|whoami|help)\b", text):
        return ActionKind.PageFetch
    return ActionKind.Other


def _classify_mqtt(text: str) -> ActionKind:
    if text.startswith("CONNECT"):
        return ActionKind.MqttConnect
    return ActionKind.Other


def classify_action(protocol: Protocol, raw: bytes | str,
                    recent_rate_per_min: float = 0.0,
                    scan_threshold: float = DEFAULT_SCAN_THRESHOLD) -> ActionKind:
    """Classify one raw request into an ActionKind.

    Pure function of its arguments: the rule list is walked in a fixed
    order and the first match wins.  Unmatched input falls through to
    Other, never to an exception.
    """
    try:
        text = _to_text(raw)
        if recent_rate_per_min > scan_threshold:
            return ActionKind.ScanBurst
        if protocol is Protocol.HTTP:
            _, _, headers, _ = _http_parts(text)
            if any(sig.search(headers) for sig in SCANNER_SIGNATURES):
                return ActionKind.ScanBurst
            return _classify_http(text)
        if protocol is Protocol.FTP:
            return _classify_ftp(text)
        if protocol is Protocol.SSH:
            return _classify_ssh(text)
        if protocol is Protocol.MQTT:
            return _classify_mqtt(text)
    except Exception:
        return ActionKind.Other
    return ActionKind.Other


# ---------------------------------------------------------------------------
# event log records
# ---------------------------------------------------------------------------

RECORD_FIELDS = ("session_id", "ts", "protocol", "action", "success",
                 "stage_before", "stage_after", "raw_excerpt")


def to_record(session_id: str, event: ActionEvent, stage_before: str,
              stage_after: str) -> dict[str, Any]:
    """Build the append-only log record for one ingested event."""
    return {
        "session_id": session_id,
        "ts": event.ts,
        "protocol": event.protocol.value,
        "action": event.action.value,
        "success": event.success,
        "stage_before": stage_before,
        "stage_after": stage_after,
        "raw_excerpt": event.raw,
    }


def record_to_event(record: dict[str, Any]) -> ActionEvent:
    """Rebuild an ActionEvent from a log record (used by replay)."""
    return ActionEvent(
        ts=int(record["ts"]),
        protocol=Protocol(record["protocol"]),
        raw=str(record.get("raw_excerpt", "")),
        action=ActionKind(record["action"]),
        success=bool(record["success"]),
    )


def parse_record_line(line: str) -> dict[str, Any]:
    """Parse one JSONL line, raising MalformedRecord on anything unusable."""
    from .errors import MalformedRecord

    line = line.strip()
    if not line:
        raise MalformedRecord("blank line")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"bad json: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not an object")
    missing = [f for f in RECORD_FIELDS if f not in obj]
    if missing:
        raise MalformedRecord(f"missing fields: {missing}")
    try:
        Protocol(obj["protocol"])
        ActionKind(obj["action"])
        int(obj["ts"])
    except (ValueError, TypeError) as exc:
        raise MalformedRecord(f"bad field value: {exc}") from exc
    return obj


def dump_record(record: dict[str, Any]) -> str:
    """Serialize a record with a fixed key order (byte-stable logs)."""
    ordered = {k: record[k] for k in RECORD_FIELDS}
    for extra in record:
        if extra not in ordered:
            ordered[extra] = record[extra]
    return json.dumps(ordered, ensure_ascii=False, separators=(",", ":"))
