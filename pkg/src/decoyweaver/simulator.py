"""Deterministic attacker cohorts played against live decoys.

Agents are tiny scripted adversaries: each one connects to the deployed
decoy endpoints over real loopback sockets, probes the scenario's planted
weaknesses, and succeeds or walks away according to its profile.  Every
random draw is addressed by a stable label instead of pulled from a shared
stream, so the same seed always produces the same log, and turning one
knob (skill, curiosity) never reshuffles the randomness behind another
decision.  That is what makes the cohort-level monotonicity properties
hold exactly rather than just on average.

Logs collected here are normalized for byte-stable replay: decoys embed
their own host:port in HTTP excerpts, and ephemeral ports differ between
deployments, so the collector rewrites each endpoint's address to a fixed
"<role>.sim" marker before a record is stored.
"""

from __future__ import annotations

import hashlib
import http.client
import json
import re
import socket
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from tempfile import TemporaryDirectory
from typing import Any, Callable, Iterable, Mapping
from urllib.parse import urlencode

from .analytics import EventLog, event_log_from_records
from .decoys import DECOY_TYPES
from .decoys.base import DecoyContext
from .errors import EndpointUnreachable, InvalidBundle, UnknownScenario
from .events import ActionEvent, record_to_event
from .scenario import CompiledScenario, VulnKind, compile_runtime, find_scenario, \
    runtime_settings, validate_graph
from .sessions import SessionStore

__all__ = [
    "AgentProfile", "CohortSpec", "VirtualClock", "SimulatedScenario",
    "run_agent", "run_cohort", "derive_agent_seed", "agent_source_ip",
    "success_chance", "DIFFICULTY_SLOPE", "SIM_EPOCH_MS",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

#: difficulty penalty per level above 1 in the success-probability model
DIFFICULTY_SLOPE = 0.15

#: simulated wall clock origin: 2026-01-15 06:00:00 UTC, early enough in the
#: UTC day that even a long cohort stays inside one reset window
SIM_EPOCH_MS = 1_768_456_800_000

#: virtual gap between consecutive agents' first actions
AGENT_SPACING_MS = 90_000

MIN_THINK_MS = 2_000
MAX_THINK_MS = 15_000

#: idle long enough to sink the engagement score below the clue threshold
#: at every stage (the recency term needs roughly two half-lives)
STALL_IDLE_MS = 900_000

#: primary tries per gate before the agent stalls and waits for help
BASE_ATTEMPTS = 3
#: stall-and-retry rounds after the primary tries run out
STALL_ROUNDS = 2
#: extra success probability when the agent studied a served clue
CLUE_BOOST = 0.35

#: share of webshop visitors who come to deface rather than to steal
XSS_TRACK_SHARE = 0.25

SCAN_BURST_REQUESTS = 8
SCAN_TICK_MS = 150

CLIENT_TIMEOUT_S = 10.0

BROWSER_UA = "Mozilla/5.0 (X11; Linux x86_64; rv:115.0) Gecko/20100101 Firefox/115.0"
SCANNER_UA = "sqlmap/1.7.2#stable (http://sqlmap.org)"

_ADMIN_TOKEN_RE = re.compile(r'var ADMIN_SESSION = "([^"]+)"')
_SET_COOKIE_RE = re.compile(r"shop_admin=([^;]+)")
_PLANTED_URL_RE = re.compile(rb"http://([0-9.]+:\d+)/")
_FTP_NOTE_RE = re.compile(r"^\d{3}-NOTE see \S+", re.MULTILINE)
_SSH_NOTE_RE = re.compile(r"\*\*\* note: see \S+")
_MQTT_CREDS_RE = re.compile(r"mqtt .*user=(\S+) pass=(\S+)")
_SSH_CREDS_RE = re.compile(r"ssh .*user=(\S+) pass=(\S+)")


def splitmix64(state: int) -> int:
    """One output of the splitmix64 generator for the given state."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_agent_seed(master_seed: int, index: int) -> int:
    """Per-agent seed: the index-th value of the splitmix64 stream."""
    return splitmix64((master_seed + index * _GOLDEN) & _MASK64)


def success_chance(skill: float, difficulty: int,
                   slope: float = DIFFICULTY_SLOPE) -> float:
    """Per-attempt success probability for a vulnerability of a difficulty."""
    return max(0.0, min(1.0, skill - slope * (difficulty - 1)))


def agent_source_ip(index: int) -> str:
    """Loopback source address for agent ``index`` (one session per agent)."""
    if not 0 <= index < 250 * 250:
        raise ValueError(f"agent index {index} out of range")
    return f"127.91.{1 + index // 250}.{1 + index % 250}"


# ---------------------------------------------------------------------------
# profiles and cohorts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AgentProfile:
    """Behavioral knobs for one scripted attacker."""

    name: str = "agent"
    skill: float = 0.5
    persistence: float = 0.8     # per-step probability of carrying on
    curiosity: float = 0.5       # probability of acting on a served clue
    tool_user: bool = False      # opens with a noisy scanner burst
    seed: int = 1

    def __post_init__(self) -> None:
        for fname in ("skill", "persistence", "curiosity"):
            value = getattr(self, fname)
            if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
                raise ValueError(f"{fname} must be within [0, 1], got {value!r}")
        if not isinstance(self.seed, int):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")

    @classmethod
    def from_mapping(cls, obj: Mapping[str, Any]) -> "AgentProfile":
        known = {f for f in cls.__dataclass_fields__}
        bad = sorted(set(obj) - known)
        if bad:
            raise ValueError(f"unknown agent profile field {bad[0]!r}")
        return cls(**dict(obj))


@dataclass(frozen=True)
class CohortSpec:
    """A run request: how many agents, drawn from which profile mix."""

    scenario_id: str
    n_agents: int
    master_seed: int
    profile_distribution: tuple[tuple[AgentProfile, float], ...]
    difficulty_slope: float = DIFFICULTY_SLOPE

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be at least 1, got {self.n_agents}")
        if not self.profile_distribution:
            raise ValueError("profile_distribution is empty")
        for _, weight in self.profile_distribution:
            if not weight > 0:
                raise ValueError(f"profile weights must be positive, got {weight!r}")

    def normalized_weights(self) -> list[float]:
        total = sum(w for _, w in self.profile_distribution)
        return [w / total for _, w in self.profile_distribution]

    @classmethod
    def from_mapping(cls, obj: Mapping[str, Any]) -> "CohortSpec":
        known = {"scenario_id", "n_agents", "master_seed",
                 "profile_distribution", "difficulty_slope"}
        bad = sorted(set(obj) - known)
        if bad:
            raise ValueError(f"unknown cohort field {bad[0]!r}")
        try:
            raw_dist = obj["profile_distribution"]
            dist = tuple(
                (AgentProfile.from_mapping(entry["profile"]), float(entry["weight"]))
                for entry in raw_dist)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad profile_distribution: {exc}") from exc
        return cls(scenario_id=str(obj.get("scenario_id", "")),
                   n_agents=int(obj.get("n_agents", 0)),
                   master_seed=int(obj.get("master_seed", 0)),
                   profile_distribution=dist,
                   difficulty_slope=float(obj.get("difficulty_slope",
                                                  DIFFICULTY_SLOPE)))

    @classmethod
    def from_file(cls, path: str | Path) -> "CohortSpec":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        if not isinstance(obj, dict):
            raise ValueError(f"{path}: cohort spec must be a JSON object")
        return cls.from_mapping(obj)


class VirtualClock:
    """Millisecond clock the simulation advances by hand."""

    def __init__(self, start_ms: int = SIM_EPOCH_MS):
        self.now_ms = int(start_ms)

    def __call__(self) -> int:
        return self.now_ms

    def advance(self, ms: int) -> int:
        self.now_ms += int(ms)
        return self.now_ms

    def jump_to(self, ms: int) -> None:
        self.now_ms = int(ms)


class Dice:
    """Label-addressed randomness.

    Every draw is a pure function of (seed, label, index): no stream, no
    consumption order.  Two runs that differ in one decision still see
    identical draws everywhere else, which is what the cohort monotonicity
    guarantees lean on.
    """

    def __init__(self, seed: int):
        self.seed = seed & _MASK64

    def unit(self, label: str, index: int = 0) -> float:
        payload = f"{self.seed}:{label}:{index}".encode()
        digest = hashlib.blake2b(payload, digest_size=8).digest()
        return int.from_bytes(digest, "big") / 2.0 ** 64

    def passes(self, probability: float, label: str, index: int = 0) -> bool:
        return self.unit(label, index) < probability

    def between(self, lo: int, hi: int, label: str, index: int = 0) -> int:
        return lo + int(self.unit(label, index) * (hi - lo))


# ---------------------------------------------------------------------------
# scenario deployment for simulation
# ---------------------------------------------------------------------------

class SimulatedScenario:
    """One scenario's machine, store, and decoys on ephemeral loopback ports.

    Unlike a gateway deployment there is no persistence and no API server:
    the store's records are collected in memory (excerpts normalized) and
    the quarantine area lives in a temporary directory.  Use as a context
    manager or call start()/stop() explicitly.
    """

    def __init__(self, scenario_ref: str, *, start_ms: int = SIM_EPOCH_MS,
                 host: str = "127.0.0.1"):
        graph = find_scenario(scenario_ref)
        problems = validate_graph(graph)
        if problems:
            raise InvalidBundle(graph.id, problems)
        self.machine: CompiledScenario = compile_runtime(graph)
        self.host = host
        self.clock = VirtualClock(start_ms)
        self.store = SessionStore(self.machine, clock=self.clock)
        self.records: list[dict[str, Any]] = []
        self.endpoints: dict[str, tuple[str, int]] = {}
        self.decoys: list[Any] = []
        self._tmp: TemporaryDirectory | None = None
        self.store.on_record.append(self._collect)

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "SimulatedScenario":
        if self.decoys:
            return self
        self._tmp = TemporaryDirectory(prefix=f"dwsim-{self.machine.id}-")
        declared = runtime_settings(self.machine.graph).get("endpoints", [])
        url_context: dict[str, str] = {}
        # web endpoints first so file-planting decoys can point at them
        for ep in sorted(declared, key=lambda e: e["decoy"] != "http_shop"):
            options = dict(ep.get("options", {}))
            options["url_context"] = dict(url_context)
            ctx = DecoyContext(store=self.store,
                               assets_dir=self.machine.assets_dir,
                               data_dir=Path(self._tmp.name),
                               options=options, role=ep["role"])
            decoy = DECOY_TYPES[ep["decoy"]](ctx, host=self.host, port=0)
            decoy.start()
            self.decoys.append(decoy)
            self.endpoints[ep["role"]] = (self.host, decoy.port)
            url_context[ep["role"]] = f"{self.host}:{decoy.port}"
        return self

    def stop(self) -> None:
        for decoy in self.decoys:
            try:
                decoy.stop()
            except Exception:
                pass
        self.decoys.clear()
        if self._tmp is not None:
            self._tmp.cleanup()
            self._tmp = None

    def __enter__(self) -> "SimulatedScenario":
        return self.start()

    def __exit__(self, *exc_info: Any) -> None:
        self.stop()

    # -- record collection ---------------------------------------------------

    def _collect(self, record: dict[str, Any]) -> None:
        record["raw_excerpt"] = self._normalize(record.get("raw_excerpt", ""))
        self.records.append(record)

    def _normalize(self, text: str) -> str:
        for role, (host, port) in self.endpoints.items():
            text = text.replace(f"{host}:{port}", f"{role}.sim")
        return text


# ---------------------------------------------------------------------------
# protocol clients
# ---------------------------------------------------------------------------

def _bound_socket(endpoint: tuple[str, int], source_ip: str) -> socket.socket:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        sock.bind((source_ip, 0))
        sock.settimeout(CLIENT_TIMEOUT_S)
        sock.connect(endpoint)
    except OSError as exc:
        sock.close()
        raise EndpointUnreachable(f"{endpoint[0]}:{endpoint[1]}: {exc}") from exc
    return sock


class _HttpClient:
    def __init__(self, endpoint: tuple[str, int], source_ip: str):
        self.host, self.port = endpoint
        self.source_ip = source_ip

    def request(self, method: str, path: str, *, form: dict[str, str] | None = None,
                cookie: str | None = None, ua: str = BROWSER_UA,
                ) -> tuple[int, Any, bytes]:
        headers = {"User-Agent": ua, "Accept": "*/*"}
        body = None
        if form is not None:
            body = urlencode(form)
            headers["Content-Type"] = "application/x-www-form-urlencoded"
        if cookie:
            headers["Cookie"] = cookie
        conn = http.client.HTTPConnection(self.host, self.port,
                                          timeout=CLIENT_TIMEOUT_S,
                                          source_address=(self.source_ip, 0))
        try:
            conn.request(method, path, body=body, headers=headers)
            resp = conn.getresponse()
            data = resp.read()
            return resp.status, resp.headers, data
        except OSError as exc:
            raise EndpointUnreachable(
                f"http {self.host}:{self.port}: {exc}") from exc
        finally:
            conn.close()

    def get(self, path: str, **kw: Any) -> tuple[int, Any, bytes]:
        return self.request("GET", path, **kw)

    def post(self, path: str, form: dict[str, str], **kw: Any) -> tuple[int, Any, bytes]:
        return self.request("POST", path, form=form, **kw)


class _FtpClient:
    """Just enough RFC 959 to log in, list, and pull files over PASV."""

    def __init__(self, endpoint: tuple[str, int], source_ip: str):
        self.endpoint = endpoint
        self.source_ip = source_ip
        self.sock = _bound_socket(endpoint, source_ip)
        self._buf = self.sock.makefile("rb")
        self.greeting = self._reply()

    def _reply(self) -> str:
        lines = []
        while True:
            raw = self._buf.readline()
            if not raw:
                raise EndpointUnreachable("ftp control connection closed")
            line = raw.decode("latin-1").rstrip("\r\n")
            lines.append(line)
            if re.match(r"^\d{3} ", line):
                return "\n".join(lines)

    def command(self, line: str) -> str:
        self.sock.sendall((line + "\r\n").encode("latin-1"))
        return self._reply()

    def login(self, user: str, password: str) -> str:
        self.command(f"USER {user}")
        return self.command(f"PASS {password}")

    def _open_data(self) -> socket.socket:
        reply = self.command("PASV")
        m = re.search(r"\((\d+),(\d+),(\d+),(\d+),(\d+),(\d+)\)", reply)
        if m is None:
            raise EndpointUnreachable(f"unparseable PASV reply: {reply!r}")
        host = ".".join(m.group(1, 2, 3, 4))
        port = int(m.group(5)) * 256 + int(m.group(6))
        return _bound_socket((host, port), self.source_ip)

    def _drain(self, data: socket.socket) -> bytes:
        chunks = []
        while True:
            block = data.recv(65536)
            if not block:
                break
            chunks.append(block)
        data.close()
        return b"".join(chunks)

    def list(self) -> str:
        data = self._open_data()
        self.sock.sendall(b"LIST\r\n")
        self._reply()                       # 150
        listing = self._drain(data)
        self._reply()                       # 226
        return listing.decode("latin-1")

    def retr(self, name: str) -> tuple[bytes | None, str]:
        data = self._open_data()
        self.sock.sendall(f"RETR {name}\r\n".encode("latin-1"))
        opening = self._reply()
        if not opening.splitlines()[-1].startswith("150"):
            data.close()
            return None, opening            # 550 and friends
        payload = self._drain(data)
        return payload, self._reply()

    def quit(self) -> None:
        try:
            self.command("QUIT")
        except (OSError, EndpointUnreachable):
            pass
        self.close()

    def close(self) -> None:
        try:
            self._buf.close()
            self.sock.close()
        except OSError:
            pass


class _SshClient:
    """Client for the plaintext SSH emulation (line in, prompt out)."""

    PROMPTS = ("login: ", "$ ", "# ")

    def __init__(self, endpoint: tuple[str, int], source_ip: str):
        self.sock = _bound_socket(endpoint, source_ip)
        self.banner = self._read_to_prompt()

    def _read_to_prompt(self) -> str:
        buf = bytearray()
        while True:
            block = self.sock.recv(4096)
            if not block:
                return buf.decode("utf-8", "replace")
            buf += block
            text = buf.decode("utf-8", "replace")
            for prompt in self.PROMPTS:
                if text.endswith(prompt):
                    return text[: -len(prompt)]

    def send_line(self, line: str) -> str:
        self.sock.sendall((line + "\r\n").encode("utf-8"))
        return self._read_to_prompt()

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def _mqtt_string(text: str) -> bytes:
    data = text.encode("utf-8")
    return struct.pack("!H", len(data)) + data


def _mqtt_varint(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


class _MqttClient:
    def __init__(self, endpoint: tuple[str, int], source_ip: str):
        self.sock = _bound_socket(endpoint, source_ip)

    def connect(self, client_id: str, user: str, password: str) -> int:
        """Send CONNECT with credentials; return the CONNACK return code."""
        flags = 0x02 | 0x80 | 0x40          # clean session, username, password
        var_header = _mqtt_string("MQTT") + bytes([0x04, flags]) + struct.pack("!H", 60)
        payload = _mqtt_string(client_id) + _mqtt_string(user) + _mqtt_string(password)
        remaining = var_header + payload
        self.sock.sendall(bytes([0x10]) + _mqtt_varint(len(remaining)) + remaining)
        ack = self._read_exact(4)
        if ack is None or ack[0] != 0x20:
            raise EndpointUnreachable("no CONNACK from broker")
        return ack[3]

    def publish(self, topic: str, body: str) -> None:
        var = _mqtt_string(topic) + body.encode("utf-8")
        self.sock.sendall(bytes([0x30]) + _mqtt_varint(len(var)) + var)

    def disconnect(self) -> None:
        try:
            self.sock.sendall(bytes([0xE0, 0x00]))
        except OSError:
            pass
        self.close()

    def _read_exact(self, n: int) -> bytes | None:
        buf = b""
        while len(buf) < n:
            block = self.sock.recv(n - len(buf))
            if not block:
                return None
            buf += block
        return buf

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


# ---------------------------------------------------------------------------
# the agent
# ---------------------------------------------------------------------------

def _stage_difficulty(machine: CompiledScenario, stage_id: str,
                      kind: VulnKind, fallback: int) -> int:
    stage = machine.stages.get(stage_id)
    if stage is not None:
        for vuln in stage.vulnerabilities:
            if vuln.kind is kind:
                return vuln.difficulty
    return fallback


def _clue_in_http(headers: Any, body: bytes) -> bool:
    if headers.get("X-Hint"):
        return True
    text = body.decode("latin-1", "replace")
    return 'data-user="drift_by"' in text or "<!-- " in text


class _AgentRun:
    """One agent's walk through one scenario.

    The generic piece is ``gate``: a skill check against one planted
    weakness, retried a fixed number of times, then (if the scenario can
    serve clues) re-tried after long stalls that let the engagement score
    sag.  Playbooks supply the protocol actions; gate supplies abandonment,
    pacing, and clue-following.
    """

    def __init__(self, profile: AgentProfile, scenario: SimulatedScenario,
                 source_ip: str, difficulty_slope: float = DIFFICULTY_SLOPE):
        self.profile = profile
        self.sim = scenario
        self.ip = source_ip
        self.slope = difficulty_slope
        self.dice = Dice(profile.seed)
        self.alive = True
        self._tick = 0

    # -- pacing and abandonment -------------------------------------------

    def pause(self, lo: int = MIN_THINK_MS, hi: int = MAX_THINK_MS) -> None:
        self._tick += 1
        self.sim.clock.advance(self.dice.between(lo, hi, "think", self._tick))

    def stall(self) -> None:
        self._tick += 1
        self.sim.clock.advance(STALL_IDLE_MS + self.dice.between(0, 60_000, "stall", self._tick))

    def keeps_going(self, label: str, index: int) -> bool:
        if not self.alive:
            return False
        if self.dice.unit(f"stay:{label}", index) < 1.0 - self.profile.persistence:
            self.alive = False
        return self.alive

    # -- the skill check ----------------------------------------------------

    def gate(self, label: str, difficulty: int,
             attempt: Callable[[bool], bool],
             poll: Callable[[], bool] | None = None,
             discovery: bool = False) -> bool:
        """Work one planted weakness until it gives, or give up.

        ``attempt(correct)`` performs the protocol action and reports
        whether the decoy accepted it; for ``discovery`` gates a failed
        roll means the agent never found the thing, so nothing is sent.
        After the primary attempts, each stall round idles long enough for
        the engine to serve a clue, polls for it, and (curiosity willing)
        retries with a boosted chance.
        """
        p = success_chance(self.profile.skill, difficulty, self.slope)
        for i in range(BASE_ATTEMPTS):
            if not self.keeps_going(label, i):
                return False
            self.pause()
            if self.dice.passes(p, f"try:{label}", i):
                if attempt(True):
                    return True
            elif not discovery:
                attempt(False)
        if poll is None:
            return False
        for r in range(STALL_ROUNDS):
            if not self.keeps_going(f"{label}:stall", r):
                return False
            self.stall()
            clue_seen = poll()
            boost = 0.0
            if clue_seen and self.dice.passes(self.profile.curiosity, f"study:{label}", r):
                boost = CLUE_BOOST
            self.pause()
            if self.dice.passes(min(1.0, p + boost), f"retry:{label}", r):
                if attempt(True):
                    return True
            elif not discovery:
                attempt(False)
        return False

    def scan_burst(self, http: _HttpClient) -> None:
        """Noisy scanner opening: junk paths under a scanner User-Agent."""
        for i in range(SCAN_BURST_REQUESTS):
            self.sim.clock.advance(SCAN_TICK_MS)
            http.get(f"/probe-{i:02d}", ua=SCANNER_UA)

    def play(self) -> None:
        playbook = _PLAYBOOKS.get(self.sim.machine.id)
        if playbook is None:
            raise UnknownScenario(
                f"no attacker playbook for scenario {self.sim.machine.id!r}")
        playbook(self)


# ---------------------------------------------------------------------------
# playbooks
# ---------------------------------------------------------------------------

def _play_webshop(run: _AgentRun) -> None:
    """Storefront raid: robots or the login form, then the admin panel."""
    machine = run.sim.machine
    http = _HttpClient(run.sim.endpoints["http"], run.ip)

    if run.profile.tool_user:
        run.scan_burst(http)
    run.pause()
    http.get("/")

    def poll_page(path: str) -> Callable[[], bool]:
        def poll() -> bool:
            _, headers, body = http.get(path)
            return _clue_in_http(headers, body)
        return poll

    if run.dice.passes(XSS_TRACK_SHARE, "track"):
        # defacement-minded visitor: the comment board is the whole game
        run.pause()
        http.get("/comments")

        def xss_attempt(correct: bool) -> bool:
            payload = ("<script>window.__tagged=1</script>" if correct
                       else "<script>window.__tagged=1")
            http.post("/comments", {"author": "guest", "text": payload})
            run.pause()
            http.get("/comments")           # check whether it fired
            return correct

        run.gate("xss", _stage_difficulty(machine, "shop_front", VulnKind.StoredXss, 3),
                 xss_attempt, poll=poll_page("/comments"))
        return

    def robots_attempt(correct: bool) -> bool:
        status, _, _ = http.get("/robots.txt")
        run.pause()
        http.get("/admin")                  # the disclosed path, still locked
        return status == 200

    robots_ok = run.gate(
        "robots", _stage_difficulty(machine, "shop_front", VulnKind.RobotsDisclosure, 1),
        robots_attempt, poll=poll_page("/"), discovery=True)
    if not run.alive:
        return
    if not robots_ok:
        # no map, so rattle the front-door login instead
        run.pause()
        http.post("/login", {"username": "admin", "password": "admin2024"})

    admin_cookie: str | None = None

    def checker_attempt(correct: bool) -> bool:
        nonlocal admin_cookie
        _, _, body = http.get("/static/password_check.js")
        run.pause()
        m = _ADMIN_TOKEN_RE.search(body.decode("utf-8", "replace"))
        if m is None:
            return False
        cookie = f"shop_admin={m.group(1)}"
        status, _, _ = http.get("/admin", cookie=cookie)
        if status == 200:
            admin_cookie = cookie
            return True
        return False

    checker_difficulty = _stage_difficulty(machine, "admin_disclosed",
                                           VulnKind.JsPasswordChecker, 2)
    js_ok = run.gate("checker", checker_difficulty, checker_attempt,
                     poll=poll_page("/"), discovery=True)
    if not run.alive:
        return

    if not js_ok:
        def sqli_attempt(correct: bool) -> bool:
            nonlocal admin_cookie
            password = "' OR '1'='1" if correct else "'--"
            status, headers, _ = http.post(
                "/login", {"username": "admin", "password": password})
            if status == 302:
                m = _SET_COOKIE_RE.search(headers.get("Set-Cookie", "") or "")
                if m is not None:
                    admin_cookie = f"shop_admin={m.group(1)}"
                return True
            return False

        sqli_difficulty = _stage_difficulty(machine, "admin_disclosed",
                                            VulnKind.SqlInjectionLogin, 2)
        run.gate("sqli", sqli_difficulty, sqli_attempt, poll=poll_page("/"))

    if admin_cookie is None or not run.alive:
        return
    run.pause()
    http.get("/admin", cookie=admin_cookie)
    run.pause()
    http.get("/admin/notes.txt", cookie=admin_cookie)
    run.pause()
    http.get("/admin/database.db", cookie=admin_cookie)


def _play_ftp_depot(run: _AgentRun) -> None:
    """Depot raid: log in, then follow either the database or the scan file."""
    machine = run.sim.machine
    http = _HttpClient(run.sim.endpoints["http"], run.ip)
    if run.profile.tool_user:
        run.scan_burst(http)

    run.pause()
    ftp = _FtpClient(run.sim.endpoints["ftp"], run.ip)

    def login_attempt(correct: bool) -> bool:
        user, password = (("anonymous", "guest@") if correct
                          else ("admin", "letmein"))
        return ftp.login(user, password).splitlines()[-1].startswith("230")

    def poll_ftp() -> bool:
        return _FTP_NOTE_RE.search(ftp.command("PWD")) is not None

    logged_in = run.gate(
        "ftp-login", _stage_difficulty(machine, "ftp_entry", VulnKind.DefaultCredentials, 1),
        login_attempt, poll=poll_ftp)
    if not logged_in or not run.alive:
        ftp.quit()
        return

    run.pause()
    ftp.list()

    if run.dice.passes(0.7, "track"):
        # the bait database, and the storefront URL planted inside it
        run.pause()
        payload, _ = ftp.retr("Database.DB")
        ftp.quit()
        if payload is None or not run.alive:
            return
        m = _PLANTED_URL_RE.search(payload)
        site = _HttpClient(run.sim.endpoints["http"], run.ip)
        if m is not None:
            host, _, port = m.group(1).decode("latin-1").partition(":")
            site = _HttpClient((host, int(port)), run.ip)
        run.pause()
        site.get("/")

        breached = False

        def site_sqli(correct: bool) -> bool:
            password = "' OR '1'='1" if correct else "'--"
            status, _, _ = site.post("/login",
                                     {"username": "admin", "password": password})
            return status == 302

        def poll_site() -> bool:
            _, headers, body = site.get("/")
            return _clue_in_http(headers, body)

        sqli_difficulty = _stage_difficulty(machine, "planted_site",
                                            VulnKind.SqlInjectionLogin, 3)
        breached = run.gate("sqli", sqli_difficulty, site_sqli, poll=poll_site)
        if not breached and run.alive:
            def site_xss(correct: bool) -> bool:
                payload = ("<script>window.__tagged=1</script>" if correct
                           else "<script>window.__tagged=1")
                site.post("/comments", {"author": "guest", "text": payload})
                return correct

            xss_difficulty = _stage_difficulty(machine, "planted_site",
                                               VulnKind.StoredXss, 3)
            run.gate("xss", xss_difficulty, site_xss, poll=poll_site)
        return

    # scan-file track: the fabricated nmap output points at the legacy host
    run.pause()
    payload, _ = ftp.retr("nmap_scan.txt")
    ftp.quit()
    if payload is None or not run.alive:
        return

    run.pause()
    ssh = _SshClient(run.sim.endpoints["legacy-vm"], run.ip)

    def exploit_attempt(correct: bool) -> bool:
        if correct:
            reply = ssh.send_line("A" * 96)
            return "segmentation fault" in reply
        ssh.send_line("login user=root pass=root")
        return False

    def poll_ssh() -> bool:
        return _SSH_NOTE_RE.search(ssh.send_line("uptime?")) is not None

    exploit_difficulty = _stage_difficulty(machine, "exploit_lead",
                                           VulnKind.ScriptedExploit, 5)
    rooted = run.gate("exploit", exploit_difficulty, exploit_attempt, poll=poll_ssh)
    if rooted:
        run.pause()
        ssh.send_line("id")
    ssh.close()


def _play_iot_fleet(run: _AgentRun) -> None:
    """Fleet walk: front device, broker creds, the scan, then a target."""
    machine = run.sim.machine
    http = _HttpClient(run.sim.endpoints["http"], run.ip)
    if run.profile.tool_user:
        run.scan_burst(http)

    run.pause()
    front = _SshClient(run.sim.endpoints["ssh-front"], run.ip)

    def front_login(correct: bool) -> bool:
        creds = "login user=root pass=root" if correct else "login user=root pass=toor"
        return "access granted" in front.send_line(creds)

    def poll_front() -> bool:
        # an unauthenticated junk line returns usage text plus any notices
        return _SSH_NOTE_RE.search(front.send_line("hello?")) is not None

    entered = run.gate(
        "ssh-front", _stage_difficulty(machine, "iot_entry", VulnKind.WeakCredentials, 2),
        front_login, poll=poll_front)
    if not entered or not run.alive:
        front.close()
        return

    run.pause()
    front.send_line("ls")
    run.pause()
    creds_text = front.send_line("cat broker_credentials.txt")
    mqtt_creds = _MQTT_CREDS_RE.search(creds_text)
    ssh_creds = _SSH_CREDS_RE.search(creds_text)

    def mqtt_attempt(correct: bool) -> bool:
        client = _MqttClient(run.sim.endpoints["mqtt"], run.ip)
        try:
            if correct and mqtt_creds is not None:
                user, password = mqtt_creds.group(1, 2)
            else:
                user, password = "fleet", "fleet"
            rc = client.connect("sim-agent", user, password)
            if rc == 0:
                client.publish("factory/line1/ping", "hello")
                client.disconnect()
                return True
            return False
        finally:
            client.close()

    def poll_device() -> bool:
        # the device note, when served, rides the open maintenance shell
        return _SSH_NOTE_RE.search(front.send_line("pwd")) is not None

    on_broker = run.gate("mqtt", 1, mqtt_attempt, poll=poll_device)
    front.close()
    if not on_broker or not run.alive:
        return

    run.pause()
    broker = _SshClient(run.sim.endpoints["ssh-broker"], run.ip)
    if ssh_creds is not None:
        run.pause()
        broker.send_line(f"login user={ssh_creds.group(1)} pass={ssh_creds.group(2)}")

    def scan_attempt(correct: bool) -> bool:
        reply = broker.send_line("cat nmap_scan.txt")
        return "no such file" not in reply

    def poll_broker() -> bool:
        return _SSH_NOTE_RE.search(broker.send_line("ls")) is not None

    reviewed = run.gate(
        "scan-review", _stage_difficulty(machine, "broker", VulnKind.MisleadingScan, 1),
        scan_attempt, poll=poll_broker, discovery=True)
    broker.close()
    if not reviewed or not run.alive:
        return

    track = run.dice.unit("track")
    if track < 0.45:
        run.pause()
        http.get("/")

        def sqli_attempt(correct: bool) -> bool:
            password = "' OR '1'='1" if correct else "'--"
            status, _, _ = http.post("/login",
                                     {"username": "admin", "password": password})
            return status == 302

        sqli_difficulty = _stage_difficulty(machine, "scan_reviewed",
                                            VulnKind.SqlInjectionLogin, 3)
        run.gate("sqli", sqli_difficulty, sqli_attempt, poll=None)
    elif track < 0.75:
        run.pause()
        ftp = _FtpClient(run.sim.endpoints["ftp"], run.ip)

        def ftp_attempt(correct: bool) -> bool:
            user, password = ("admin", "admin") if correct else ("admin", "password")
            return ftp.login(user, password).splitlines()[-1].startswith("230")

        ftp_difficulty = _stage_difficulty(machine, "scan_reviewed",
                                           VulnKind.DefaultCredentials, 2)
        if run.gate("ftp-creds", ftp_difficulty, ftp_attempt, poll=None):
            run.pause()
            ftp.list()
        ftp.quit()
    else:
        # the "closed and secured" nodes from the scan, tried in turn
        counter = {"i": 0}

        def node_attempt(correct: bool) -> bool:
            role = f"node-{1 + counter['i'] % 5}"
            counter["i"] += 1
            node = _SshClient(run.sim.endpoints[role], run.ip)
            try:
                creds = ("login user=admin pass=admin" if correct
                         else "login user=admin pass=12345")
                return "access granted" in node.send_line(creds)
            finally:
                node.close()

        node_difficulty = _stage_difficulty(machine, "scan_reviewed",
                                            VulnKind.WeakCredentials, 3)
        run.gate("nodes", node_difficulty, node_attempt, poll=None)


_PLAYBOOKS: dict[str, Callable[[_AgentRun], None]] = {
    "webshop": _play_webshop,
    "webshop-annex": _play_webshop,
    "ftp-depot": _play_ftp_depot,
    "iot-fleet": _play_iot_fleet,
}


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------

def run_agent(profile: AgentProfile, scenario: SimulatedScenario,
              *, source_ip: str = "127.91.0.1",
              difficulty_slope: float = DIFFICULTY_SLOPE) -> list[ActionEvent]:
    """Walk one agent through a deployed scenario; return its events.

    The scenario must be started. Events are read back from the store's
    record stream, so they carry exactly what the engine classified and
    logged, not what the agent believes it did.
    """
    if not scenario.endpoints:
        raise EndpointUnreachable("scenario has no running endpoints (not started?)")
    first = len(scenario.records)
    _AgentRun(profile, scenario, source_ip, difficulty_slope).play()
    return [record_to_event(r) for r in scenario.records[first:]]


def run_cohort(spec: CohortSpec) -> EventLog:
    """Run a full cohort against a fresh deployment; return the merged log.

    Pure in the spec: agent seeds derive from master_seed via splitmix64,
    each agent starts on its own virtual epoch, and the merged records are
    ordered by (timestamp, session). Two calls with the same spec yield
    byte-identical logs.
    """
    master = Dice(spec.master_seed)
    weights = spec.normalized_weights()
    templates = [profile for profile, _ in spec.profile_distribution]
    with SimulatedScenario(spec.scenario_id) as sim:
        for i in range(spec.n_agents):
            draw = master.unit("profile", i)
            chosen = templates[-1]
            acc = 0.0
            for template, share in zip(templates, weights):
                acc += share
                if draw < acc:
                    chosen = template
                    break
            agent = replace(chosen, seed=derive_agent_seed(spec.master_seed, i))
            sim.clock.jump_to(SIM_EPOCH_MS + i * AGENT_SPACING_MS)
            run_agent(agent, sim, source_ip=agent_source_ip(i),
                      difficulty_slope=spec.difficulty_slope)
        records = sorted(sim.records, key=lambda r: (r["ts"], r["session_id"]))
    return event_log_from_records(records)
