"""Deployment gateway: boots decoys, persists logs, serves the operator API.

One process hosts any number of scenario bundles.  Each scenario gets its
own session store, an append-only daily event log, and the decoy endpoints
its runtime manifest declares.  A small stdlib HTTP server exposes the
operator surface (session table, steering, funnels, an SSE event stream)
behind a single bearer token, and optionally serves the console's static
build.

Recovery is replay-based: on boot the gateway reads today's log back
through the session engine, which restores every session to the exact
stage it had when the process died.  The log is never rewritten; a
truncated final line (the one interrupted append a crash can produce) is
dropped and counted, anything else unparseable is treated as corruption.
"""

from __future__ import annotations

import errno
import hmac
import json
import logging
import os
import re
import threading
import queue
import datetime as dt
from collections import deque
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any, Callable, Mapping

from . import engagement as eng
from .analytics import build_funnel, event_log_from_records, render_report
from .decoys import DECOY_TYPES, DecoyContext, TcpDecoy
from .errors import (CorruptLog, DecoyweaverError, InvalidBundle,
                     MalformedRecord, PortInUse, UnknownStage)
from .events import dump_record, parse_record_line
from .scenario import (CompiledScenario, compile_runtime, find_scenario,
                       runtime_settings, serialize_scenario, validate_graph)
from .sessions import Session, SessionStore, replay_records

log = logging.getLogger(__name__)

#: overrides DeploymentConfig.operator_token when set
TOKEN_ENV_VAR = "DECOYWEAVER_OPERATOR_TOKEN"

MIN_TOKEN_LEN = 16
RECENT_EVENTS_PER_SESSION = 100
SSE_HEARTBEAT_S = 15.0

_HHMM = re.compile(r"^([01]\d|2[0-3]):([0-5]\d)$")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EndpointBinding:
    """Pins one runtime endpoint role to a TCP port (0 = ephemeral)."""

    role: str
    port: int = 0


@dataclass(frozen=True)
class ScenarioEntry:
    ref: str                                # bundled id or filesystem path
    endpoints: tuple[EndpointBinding, ...] = ()


@dataclass(frozen=True)
class DeploymentConfig:
    scenarios: tuple[ScenarioEntry, ...]
    data_dir: Path
    operator_token: str
    api_port: int = 0
    reset_time_local: str = "00:00"
    host: str = "127.0.0.1"
    console_dir: Path | None = None

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise ValueError("config lists no scenarios")
        if len(self.operator_token) < MIN_TOKEN_LEN:
            raise ValueError(
                f"operator_token must be at least {MIN_TOKEN_LEN} characters")
        if not _HHMM.match(self.reset_time_local):
            raise ValueError(
                f"reset_time_local {self.reset_time_local!r} is not HH:MM")
        pinned = [b.port for e in self.scenarios for b in e.endpoints if b.port]
        if self.api_port:
            pinned.append(self.api_port)
        dupes = sorted({p for p in pinned if pinned.count(p) > 1})
        if dupes:
            raise ValueError(f"ports assigned more than once: {dupes}")

    @staticmethod
    def from_mapping(obj: Mapping[str, Any],
                     base_dir: Path | None = None) -> "DeploymentConfig":
        def _path(value: str) -> Path:
            p = Path(value)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            return p

        scenarios = []
        for entry in obj.get("scenarios", ()):
            endpoints = tuple(
                EndpointBinding(role=str(b["role"]), port=int(b.get("port", 0)))
                for b in entry.get("endpoints", ()))
            scenarios.append(ScenarioEntry(ref=str(entry["scenario"]),
                                           endpoints=endpoints))
        console = obj.get("console_dir")
        return DeploymentConfig(
            scenarios=tuple(scenarios),
            data_dir=_path(str(obj.get("data_dir", "data"))),
            operator_token=str(obj.get("operator_token", "")),
            api_port=int(obj.get("api_port", 0)),
            reset_time_local=str(obj.get("reset_time_local", "00:00")),
            host=str(obj.get("host", "127.0.0.1")),
            console_dir=_path(str(console)) if console else None,
        )

    @staticmethod
    def from_file(path: str | Path) -> "DeploymentConfig":
        p = Path(path)
        return DeploymentConfig.from_mapping(
            json.loads(p.read_text(encoding="utf-8")), base_dir=p.parent)


# ---------------------------------------------------------------------------
# event log persistence
# ---------------------------------------------------------------------------

def day_key(ts_ms: int) -> str:
    return dt.datetime.fromtimestamp(
        ts_ms / 1000.0, dt.timezone.utc).strftime("%Y%m%d")


def log_path(data_dir: Path, scenario_id: str, day: str) -> Path:
    return data_dir / f"{scenario_id}-{day}.events.jsonl"


class EventLogWriter:
    """Append-only JSONL writer with daily rotation.

    Appends are serialized by a lock and flushed per record, so the most a
    crash can cost is one partially written line, which the restore path
    tolerates by construction.
    """

    def __init__(self, data_dir: Path, scenario_id: str):
        self.data_dir = data_dir
        self.scenario_id = scenario_id
        self._lock = threading.Lock()
        self._day = ""
        self._fh = None

    def append(self, record: Mapping[str, Any]) -> None:
        line = dump_record(dict(record))
        day = day_key(int(record["ts"]))
        with self._lock:
            if self._fh is None or day != self._day:
                if self._fh is not None:
                    self._fh.close()
                self.data_dir.mkdir(parents=True, exist_ok=True)
                self._fh = log_path(self.data_dir, self.scenario_id,
                                    day).open("a", encoding="utf-8")
                self._day = day
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
                self._day = ""


def read_log_strict(path: Path) -> tuple[list[dict[str, Any]], int]:
    """Read one day's log for replay.

    Returns (records, dropped).  Only the final non-blank line may be
    malformed; that is the crash-truncation case and it is dropped and
    counted.  A bad line with good lines after it means the file was
    edited or damaged, and replaying around it would silently change
    session state, so that raises CorruptLog instead.
    """
    if not path.is_file():
        return [], 0
    records: list[dict[str, Any]] = []
    bad_at: int | None = None
    with path.open("r", encoding="utf-8", errors="replace") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                parsed = parse_record_line(line)
            except MalformedRecord as exc:
                if bad_at is not None:
                    raise CorruptLog(
                        f"{path.name}: unparseable lines {bad_at} and {line_no}")
                bad_at = line_no
                last_error = exc
                continue
            if bad_at is not None:
                raise CorruptLog(
                    f"{path.name}: line {bad_at} is unreadable but later "
                    f"records follow ({last_error})")
            records.append(parsed)
    return records, (0 if bad_at is None else 1)


@dataclass
class RestoreResult:
    sessions: dict[str, Session]
    records: list[dict[str, Any]]
    dropped: int

    @property
    def replayed(self) -> int:
        return len(self.records)


def snapshot_and_restore(data_dir: Path, machine: CompiledScenario,
                         now_ms: int | None = None) -> RestoreResult:
    """Rebuild session state from today's event log (crash recovery)."""
    import time
    now = int(time.time() * 1000) if now_ms is None else now_ms
    path = log_path(Path(data_dir), machine.id, day_key(now))
    records, dropped = read_log_strict(path)
    sessions = replay_records(records, machine)
    if dropped:
        log.warning("%s: dropped %d truncated trailing record", path.name, dropped)
    return RestoreResult(sessions=sessions, records=records, dropped=dropped)


# ---------------------------------------------------------------------------
# reset scheduling
# ---------------------------------------------------------------------------

def seconds_until_reset(reset_hhmm: str, now: dt.datetime | None = None) -> float:
    """Seconds until the next local occurrence of HH:MM."""
    m = _HHMM.match(reset_hhmm)
    if not m:
        raise ValueError(f"bad reset time {reset_hhmm!r}")
    now = now if now is not None else dt.datetime.now()
    target = now.replace(hour=int(m.group(1)), minute=int(m.group(2)),
                         second=0, microsecond=0)
    if target <= now:
        target += dt.timedelta(days=1)
    return max((target - now).total_seconds(), 1.0)


class _ResetTimer(threading.Thread):
    def __init__(self, reset_hhmm: str, fire: Callable[[], None]):
        super().__init__(name="decoyweaver-reset", daemon=True)
        self.reset_hhmm = reset_hhmm
        self.fire = fire
        self._stop = threading.Event()

    def run(self) -> None:
        while not self._stop.is_set():
            delay = seconds_until_reset(self.reset_hhmm)
            if self._stop.wait(delay):
                return
            try:
                self.fire()
            except Exception:
                log.exception("scheduled reset failed")
            # step past the minute boundary so the recompute lands tomorrow
            if self._stop.wait(61.0):
                return

    def stop(self) -> None:
        self._stop.set()


# ---------------------------------------------------------------------------
# the running deployment
# ---------------------------------------------------------------------------

class _Broadcast:
    """Fan-out of log records to any number of SSE subscribers."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._subscribers: list[queue.Queue] = []

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=1000)
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def publish(self, item: Any) -> None:
        with self._lock:
            targets = list(self._subscribers)
        for q in targets:
            try:
                q.put_nowait(item)
            except queue.Full:
                pass    # a stalled reader loses events rather than stalling us

    def close(self) -> None:
        self.publish(None)


@dataclass
class ScenarioRuntime:
    machine: CompiledScenario
    store: SessionStore
    writer: EventLogWriter
    records: list[dict[str, Any]]               # today's, oldest first
    decoys: list[TcpDecoy] = field(default_factory=list)
    endpoints: dict[str, tuple[str, int]] = field(default_factory=dict)
    restored_dropped: int = 0


class Deployment:
    """Handle over everything deploy() started; stop() tears it all down."""

    def __init__(self, config: DeploymentConfig, token: str):
        self.config = config
        self.token = token
        self.scenarios: dict[str, ScenarioRuntime] = {}
        self.broadcast = _Broadcast()
        self.recent: dict[str, deque] = {}          # session id -> records
        self._recent_lock = threading.Lock()
        self._api_server: ThreadingHTTPServer | None = None
        self._api_thread: threading.Thread | None = None
        self._reset_timer: _ResetTimer | None = None
        self.running = False

    # -- lookups -----------------------------------------------------------

    @property
    def api_port(self) -> int:
        assert self._api_server is not None
        return self._api_server.server_address[1]

    def find_session(self, session_id: str) -> tuple[ScenarioRuntime, Session] | None:
        for rt in self.scenarios.values():
            session = rt.store.get(session_id)
            if session is not None:
                return rt, session
        return None

    def recent_events(self, session_id: str) -> list[dict[str, Any]]:
        with self._recent_lock:
            return list(self.recent.get(session_id, ()))

    # -- record plumbing ----------------------------------------------------

    def _on_record(self, scenario_id: str, record: dict[str, Any]) -> None:
        rt = self.scenarios[scenario_id]
        rt.writer.append(record)
        rt.records.append(record)
        with self._recent_lock:
            ring = self.recent.setdefault(
                record["session_id"], deque(maxlen=RECENT_EVENTS_PER_SESSION))
            ring.append(record)
        self.broadcast.publish({"scenario_id": scenario_id, **record})

    def reset_all(self) -> int:
        closed = 0
        for rt in self.scenarios.values():
            closed += rt.store.reset_environment()
        log.info("environment reset: closed %d sessions", closed)
        return closed

    # -- teardown -----------------------------------------------------------

    def stop(self) -> None:
        self.running = False
        if self._reset_timer is not None:
            self._reset_timer.stop()
            self._reset_timer = None
        if self._api_server is not None:
            self._api_server.shutdown()
            self._api_server.server_close()
            self._api_server = None
        self.broadcast.close()
        for rt in self.scenarios.values():
            for decoy in rt.decoys:
                try:
                    decoy.stop()
                except Exception:
                    log.exception("decoy stop failed")
            rt.writer.close()

    def __enter__(self) -> "Deployment":
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def _load_machine(ref: str) -> CompiledScenario:
    try:
        graph = find_scenario(ref)
    except DecoyweaverError as exc:
        raise InvalidBundle(ref, [exc]) from exc
    problems = validate_graph(graph)
    if problems:
        raise InvalidBundle(graph.id, problems)
    try:
        return compile_runtime(graph)
    except DecoyweaverError as exc:
        raise InvalidBundle(graph.id, [exc]) from exc


def deploy(config: DeploymentConfig,
           clock: Callable[[], int] | None = None) -> Deployment:
    """Validate bundles, restore state, start decoys, API and reset timer."""
    token = os.environ.get(TOKEN_ENV_VAR) or config.operator_token
    if len(token) < MIN_TOKEN_LEN:
        raise ValueError(f"operator token must be at least {MIN_TOKEN_LEN} characters")
    dep = Deployment(config, token)
    config.data_dir.mkdir(parents=True, exist_ok=True)
    try:
        _deploy_scenarios(dep, config, clock)
        _start_api(dep, config)
        dep._reset_timer = _ResetTimer(config.reset_time_local, dep.reset_all)
        dep._reset_timer.start()
        dep.running = True
    except BaseException:
        dep.stop()
        raise
    return dep


def _deploy_scenarios(dep: Deployment, config: DeploymentConfig,
                      clock: Callable[[], int] | None) -> None:
    for entry in config.scenarios:
        machine = _load_machine(entry.ref)
        sid = machine.id
        if sid in dep.scenarios:
            raise InvalidBundle(sid, ["scenario deployed twice"])
        store = SessionStore(machine, clock=clock)
        restored = snapshot_and_restore(config.data_dir, machine,
                                        now_ms=store.clock())
        for session in restored.sessions.values():
            store.adopt(session)
        writer = EventLogWriter(config.data_dir, sid)
        rt = ScenarioRuntime(machine=machine, store=store, writer=writer,
                             records=list(restored.records),
                             restored_dropped=restored.dropped)
        dep.scenarios[sid] = rt
        for record in restored.records:
            with dep._recent_lock:
                ring = dep.recent.setdefault(
                    record["session_id"], deque(maxlen=RECENT_EVENTS_PER_SESSION))
                ring.append(record)
        store.on_record.append(
            lambda record, _sid=sid: dep._on_record(_sid, record))
        _start_decoys(dep, config, entry, rt)
        if restored.sessions:
            log.info("%s: restored %d sessions from %d records (%d dropped)",
                     sid, len(restored.sessions), restored.replayed,
                     restored.dropped)


def _start_decoys(dep: Deployment, config: DeploymentConfig,
                  entry: ScenarioEntry, rt: ScenarioRuntime) -> None:
    manifest = runtime_settings(rt.machine.graph)
    declared = manifest.get("endpoints", [])
    known_roles = {ep["role"] for ep in declared}
    port_map = {}
    for binding in entry.endpoints:
        if binding.role not in known_roles:
            raise InvalidBundle(rt.machine.id, [
                f"config pins unknown endpoint role {binding.role!r}; "
                f"bundle declares {sorted(known_roles)}"])
        port_map[binding.role] = binding.port

    quarantine = config.data_dir / "quarantine" / rt.machine.id
    quarantine.mkdir(parents=True, exist_ok=True)
    url_context: dict[str, str] = {}
    # web endpoints come up first so file-planting decoys can point at them
    ordered = sorted(declared, key=lambda ep: ep["decoy"] != "http_shop")
    for ep in ordered:
        options = dict(ep.get("options", {}))
        options["url_context"] = dict(url_context)
        ctx = DecoyContext(store=rt.store, assets_dir=rt.machine.assets_dir,
                           data_dir=quarantine, options=options,
                           role=ep["role"])
        decoy = DECOY_TYPES[ep["decoy"]](ctx, host=config.host,
                                         port=port_map.get(ep["role"], 0))
        decoy.start()
        rt.decoys.append(decoy)
        rt.endpoints[ep["role"]] = (config.host, decoy.port)
        url_context[ep["role"]] = f"{config.host}:{decoy.port}"


# ---------------------------------------------------------------------------
# operator API
# ---------------------------------------------------------------------------

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript",
    ".mjs": "application/javascript",
    ".css": "text/css",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


def _start_api(dep: Deployment, config: DeploymentConfig) -> None:
    handler = _make_handler(dep)
    try:
        server = ThreadingHTTPServer((config.host, config.api_port), handler)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise PortInUse(f"{config.host}:{config.api_port} (operator api)") from exc
        raise
    server.daemon_threads = True
    dep._api_server = server
    dep._api_thread = threading.Thread(
        target=server.serve_forever, name="decoyweaver-api", daemon=True)
    dep._api_thread.start()


def _make_handler(dep: Deployment):
    class OperatorApiHandler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "decoyweaver"

        # -- plumbing -------------------------------------------------------

        def log_message(self, fmt, *args):
            log.debug("api: " + fmt, *args)

        def _json(self, status: int, obj: Any) -> None:
            body = json.dumps(obj).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            if status == 401:
                self.send_header("WWW-Authenticate", "Bearer")
            self.end_headers()
            self.wfile.write(body)

        def _authorized(self) -> bool:
            header = self.headers.get("Authorization", "")
            if not header.startswith("Bearer "):
                return False
            return hmac.compare_digest(header[7:].strip(), dep.token)

        def _read_body(self) -> Any:
            length = int(self.headers.get("Content-Length") or 0)
            if length <= 0 or length > 65536:
                raise ValueError("missing or oversized request body")
            return json.loads(self.rfile.read(length))

        # -- routing --------------------------------------------------------

        def do_GET(self) -> None:
            path = self.path.split("?", 1)[0]
            if path.startswith("/api/"):
                if not self._authorized():
                    self._json(401, {"error": "missing or bad bearer token"})
                    return
                self._api_get(path)
            else:
                self._static(path)

        def do_POST(self) -> None:
            path = self.path.split("?", 1)[0]
            if not self._authorized():
                self._json(401, {"error": "missing or bad bearer token"})
                return
            m = re.match(r"^/api/sessions/([^/]+)/action$", path)
            if m:
                self._post_action(m.group(1))
            else:
                self._json(404, {"error": f"no such endpoint {path}"})

        # -- GET endpoints ---------------------------------------------------

        def _api_get(self, path: str) -> None:
            if path == "/api/sessions":
                self._list_sessions()
            elif path == "/api/scenarios":
                self._list_scenarios()
            elif path == "/api/events/stream":
                self._stream()
            elif m := re.match(r"^/api/sessions/([^/]+)$", path):
                self._session_detail(m.group(1))
            elif m := re.match(r"^/api/funnel/([^/]+)$", path):
                self._funnel(m.group(1))
            else:
                self._json(404, {"error": f"no such endpoint {path}"})

        def _list_sessions(self) -> None:
            query = self.path.partition("?")[2]
            want = None
            for pair in query.split("&"):
                if pair.startswith("scenario="):
                    want = pair[len("scenario="):]
            out = []
            for sid, rt in dep.scenarios.items():
                if want and sid != want:
                    continue
                now = rt.store.clock()
                for session in rt.store.sessions():
                    doc = session.summary()
                    doc["engagement"] = round(
                        eng.compute_engagement(session, now, rt.machine), 4)
                    out.append(doc)
            out.sort(key=lambda d: (d["opened_at"], d["id"]))
            self._json(200, out)

        def _session_detail(self, session_id: str) -> None:
            found = dep.find_session(session_id)
            if found is None:
                self._json(404, {"error": f"unknown session {session_id!r}"})
                return
            rt, session = found
            doc = session.summary()
            doc["engagement"] = round(
                eng.compute_engagement(session, rt.store.clock(), rt.machine), 4)
            doc["recent_events"] = dep.recent_events(session_id)
            self._json(200, doc)

        def _list_scenarios(self) -> None:
            out = []
            for sid, rt in dep.scenarios.items():
                doc = json.loads(serialize_scenario(rt.machine.graph))
                doc.pop("assets_dir", None)
                doc["backbone"] = list(rt.machine.backbone)
                doc["depth"] = {k: rt.machine.depth[k]
                                for k in sorted(rt.machine.depth)}
                doc["endpoints"] = {role: {"host": host, "port": port}
                                    for role, (host, port) in rt.endpoints.items()}
                doc["open_sessions"] = sum(
                    1 for s in rt.store.sessions() if not s.closed)
                out.append(doc)
            self._json(200, out)

        def _funnel(self, scenario_id: str) -> None:
            rt = dep.scenarios.get(scenario_id)
            if rt is None:
                self._json(404, {"error": f"unknown scenario {scenario_id!r}"})
                return
            report = build_funnel(event_log_from_records(rt.records), rt.machine)
            self._json(200, json.loads(render_report(report, format="json")))

        def _stream(self) -> None:
            q = dep.broadcast.subscribe()
            try:
                self.send_response(200)
                self.send_header("Content-Type", "text/event-stream")
                self.send_header("Cache-Control", "no-store")
                self.end_headers()
                self.wfile.write(b": connected\n\n")
                self.wfile.flush()
                while dep.running:
                    try:
                        item = q.get(timeout=SSE_HEARTBEAT_S)
                    except queue.Empty:
                        self.wfile.write(b": ping\n\n")
                        self.wfile.flush()
                        continue
                    if item is None:
                        break
                    payload = json.dumps(item)
                    self.wfile.write(f"data: {payload}\n\n".encode())
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                pass
            finally:
                dep.broadcast.unsubscribe(q)
                self.close_connection = True

        # -- POST endpoints ----------------------------------------------------

        def _post_action(self, session_id: str) -> None:
            found = dep.find_session(session_id)
            if found is None:
                self._json(404, {"error": f"unknown session {session_id!r}"})
                return
            rt, _ = found
            try:
                body = self._read_body()
                action = eng.OperatorAction.from_mapping(body)
            except (ValueError, TypeError, json.JSONDecodeError) as exc:
                self._json(422, {"error": str(exc)})
                return
            try:
                result = rt.store.apply_operator(session_id, action)
            except KeyError:
                self._json(404, {"error": f"unknown session {session_id!r}"})
                return
            except (UnknownStage, DecoyweaverError, ValueError) as exc:
                self._json(422, {"error": str(exc)})
                return
            session = rt.store.get(session_id)
            self._json(200, {"ok": True, "applied": action.kind.value,
                             "session": session.summary() if session else None})

        # -- static console ----------------------------------------------------

        def _static(self, path: str) -> None:
            root = dep.config.console_dir
            if root is None:
                if path in ("/", "/index.html"):
                    self._json(200, {
                        "service": "decoyweaver",
                        "scenarios": sorted(dep.scenarios),
                        "console": "not bundled; set console_dir to serve a UI",
                    })
                else:
                    self._json(404, {"error": "no console bundled"})
                return
            rel = path.lstrip("/") or "index.html"
            target = (root / rel).resolve()
            try:
                inside = target.is_relative_to(root.resolve())
            except ValueError:
                inside = False
            if not inside or not target.is_file():
                # SPA routes fall back to the shell page
                target = root / "index.html"
                if not target.is_file():
                    self._json(404, {"error": f"no such file {path}"})
                    return
            body = target.read_bytes()
            ctype = _CONTENT_TYPES.get(target.suffix.lower(),
                                       "application/octet-stream")
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return OperatorApiHandler
