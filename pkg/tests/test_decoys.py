"""Live socket tests for the four decoy servers.

Each test boots a decoy on an ephemeral loopback port, drives it with a
real client (http.client, ftplib, or a raw socket), and then checks both
the wire behaviour and the session state it left behind in the store.
"""

from __future__ import annotations

import ftplib
import http.client
import io
import socket
import struct
import time
from pathlib import Path

import pytest

from decoyweaver.decoys import DECOY_TYPES
from decoyweaver.decoys.base import DecoyContext
from decoyweaver.decoys.fabrication import TEST_CARD_IINS, luhn_valid
from decoyweaver.engagement import OperatorAction
from decoyweaver.events import ActionKind
from decoyweaver.scenario import compile_runtime, find_scenario, runtime_settings
from decoyweaver.sessions import SessionStore

from conftest import StepClock


# ---------------------------------------------------------------------------
# harness
# ---------------------------------------------------------------------------

class Rig:
    """One decoy wired to a fresh store, plus the records it produced."""

    def __init__(self, scenario_id: str, role: str, data_dir: Path,
                 clock=None, options_override: dict | None = None):
        machine = compile_runtime(find_scenario(scenario_id))
        self.store = SessionStore(machine, clock=clock)
        self.records: list[dict] = []
        self.store.on_record.append(self.records.append)
        endpoint = next(ep for ep in runtime_settings(machine.graph)["endpoints"]
                        if ep["role"] == role)
        options = dict(endpoint["options"])
        if options_override:
            options.update(options_override)
        ctx = DecoyContext(store=self.store, assets_dir=machine.assets_dir,
                           data_dir=data_dir, options=options, role=role)
        self.decoy = DECOY_TYPES[endpoint["decoy"]](ctx)
        self.decoy.start()

    def stop(self):
        self.decoy.stop()

    @property
    def address(self):
        return self.decoy.address

    def session(self):
        sessions = self.store.sessions()
        assert len(sessions) == 1, f"expected one session, saw {len(sessions)}"
        return sessions[0]


@pytest.fixture
def rig(tmp_path):
    rigs = []

    def build(scenario_id: str, role: str, clock=None, options_override=None):
        r = Rig(scenario_id, role, tmp_path, clock=clock,
                options_override=options_override)
        rigs.append(r)
        return r

    yield build
    for r in rigs:
        r.stop()


def fetch(rig, method: str, path: str, body: str | None = None,
          headers: dict | None = None):
    conn = http.client.HTTPConnection(*rig.address, timeout=5)
    try:
        conn.request(method, path, body=body, headers=headers or {})
        resp = conn.getresponse()
        data = resp.read()
        return resp.status, dict(resp.getheaders()), data
    finally:
        conn.close()


def read_until(sock: socket.socket, marker: bytes, timeout: float = 5.0) -> bytes:
    sock.settimeout(timeout)
    buf = b""
    while marker not in buf:
        block = sock.recv(4096)
        if not block:
            break
        buf += block
    return buf


# ---------------------------------------------------------------------------
# HTTP shop
# ---------------------------------------------------------------------------

class TestHttpShop:
    def test_front_page_serves_skin_and_opens_session(self, rig):
        shop = rig("webshop", "http")
        status, headers, body = fetch(shop, "GET", "/")
        assert status == 200
        assert headers["Content-Type"].startswith("text/html")
        assert b"Velvet Cart" in body
        assert b"Refurb mechanical keyboard" in body
        session = shop.session()
        assert session.current_stage == "shop_front"
        assert session.events_seen == 1
        assert shop.records[-1]["action"] == "PageFetch"

    def test_robots_discloses_admin_and_advances(self, rig):
        shop = rig("webshop", "http")
        status, _, body = fetch(shop, "GET", "/robots.txt")
        assert status == 200
        assert b"Disallow: /admin" in body
        assert shop.session().current_stage == "admin_disclosed"
        assert shop.records[-1]["action"] == "RobotsFetch"

    def test_password_checker_leaks_the_admin_token(self, rig):
        shop = rig("webshop", "http")
        status, headers, body = fetch(shop, "GET", "/static/password_check.js")
        assert status == 200
        assert headers["Content-Type"] == "application/javascript"
        assert b"c0ffee-cafe-babe-1337" in body
        assert b"{{ADMIN_TOKEN}}" not in body

    def test_plain_login_fails_but_still_advances_to_login_stage(self, rig):
        shop = rig("webshop", "http")
        status, _, body = fetch(shop, "POST", "/login",
                                body="username=admin&password=hunter2")
        assert status == 401
        assert shop.records[-1]["action"] == "LoginAttempt"
        assert shop.records[-1]["success"] is False
        # the webshop graph moves any login attempt off the storefront
        assert shop.session().current_stage == "login"

    def test_sqli_login_sets_cookie_and_grants_rewards(self, rig):
        shop = rig("webshop", "http")
        fetch(shop, "GET", "/robots.txt")
        status, headers, _ = fetch(
            shop, "POST", "/login",
            body="username=admin&password=%27+OR+%271%27%3D%271")
        assert status == 302
        assert headers["Location"] == "/admin"
        assert "shop_admin=c0ffee-cafe-babe-1337" in headers["Set-Cookie"]
        session = shop.session()
        assert session.current_stage == "admin"
        assert session.badges == ["Badge:admin-panel-breached",
                                  "InfoFile:admin_notes.txt"]

    def test_admin_panel_requires_the_cookie(self, rig):
        shop = rig("webshop", "http")
        status, _, _ = fetch(shop, "GET", "/admin")
        assert status == 403
        cookie = {"Cookie": "shop_admin=c0ffee-cafe-babe-1337"}
        status, _, body = fetch(shop, "GET", "/admin", headers=cookie)
        assert status == 200
        assert b"database.db" in body

    def test_database_download_is_sqlite_and_ends_the_chain(self, rig):
        shop = rig("webshop", "http")
        fetch(shop, "GET", "/robots.txt")
        fetch(shop, "POST", "/login",
              body="username=x&password=%27+OR+%271%27%3D%271")
        cookie = {"Cookie": "shop_admin=c0ffee-cafe-babe-1337"}
        status, headers, body = fetch(shop, "GET", "/admin/database.db",
                                      headers=cookie)
        assert status == 200
        assert body.startswith(b"SQLite format 3\x00")
        assert "attachment" in headers["Content-Disposition"]
        assert shop.session().current_stage == "loot"
        assert shop.records[-1]["action"] == "FileDownload"

    def test_database_download_without_cookie_is_denied(self, rig):
        shop = rig("webshop", "http")
        status, _, _ = fetch(shop, "GET", "/admin/database.db")
        assert status == 403
        assert shop.records[-1]["success"] is False

    def test_stored_xss_round_trip(self, rig):
        shop = rig("webshop", "http")
        status, headers, _ = fetch(
            shop, "POST", "/comments",
            body="author=mal&text=%3Cscript%3Ealert(1)%3C%2Fscript%3E")
        assert status == 303
        assert headers["Location"] == "/comments"
        status, _, body = fetch(shop, "GET", "/comments")
        # the planted board renders attacker text verbatim on purpose
        assert b"<script>alert(1)</script>" in body
        assert any(r["action"] == "XssAttempt" and r["success"]
                   for r in shop.records)
        assert shop.session().current_stage == "xss_posted"

    def test_comments_page_carries_the_seeded_bait(self, rig):
        shop = rig("webshop", "http")
        _, _, body = fetch(shop, "GET", "/comments")
        assert b"nullbyte" in body
        assert b"scored 1800 off this place" in body

    def test_upload_is_quarantined_to_disk(self, rig, tmp_path):
        shop = rig("webshop", "http")
        payload = "MZ\x90fake-binary-payload"
        status, _, _ = fetch(shop, "POST", "/upload", body=payload)
        assert status == 201
        stored = list((tmp_path / "uploads").iterdir())
        assert len(stored) == 1
        assert stored[0].name.startswith("upload-0001-")
        assert stored[0].read_bytes() == payload.encode("latin-1")

    def test_unknown_path_is_404_and_logged_as_failure(self, rig):
        shop = rig("webshop", "http")
        status, _, _ = fetch(shop, "GET", "/wp-admin.php")
        assert status == 404
        assert shop.records[-1]["success"] is False

    def test_head_request_sends_headers_only(self, rig):
        shop = rig("webshop", "http")
        status, headers, body = fetch(shop, "HEAD", "/")
        assert status == 200
        assert body == b""
        assert int(headers["Content-Length"]) > 0

    def test_operator_message_rides_the_next_response(self, rig):
        shop = rig("webshop", "http")
        fetch(shop, "GET", "/")
        session = shop.session()
        action = OperatorAction.from_mapping(
            {"kind": "CoerciveMessage", "operator_id": "op-7", "message": "we are watching you"})
        shop.store.apply_operator(session.id, action)
        _, headers, body = fetch(shop, "GET", "/")
        assert headers["X-Notice-0"] == "we are watching you"
        assert b'<div class="operator-notice">we are watching you</div>' in body
        # drained: the message must not repeat
        _, headers2, body2 = fetch(shop, "GET", "/")
        assert "X-Notice-0" not in headers2
        assert b"operator-notice" not in body2

    def test_clue_surfaces_after_an_idle_spell(self, rig):
        clock = StepClock()
        shop = rig("webshop", "http", clock=clock)
        fetch(shop, "GET", "/")
        clock.tick(600_000)  # two half-lives of silence
        _, _, body = fetch(shop, "GET", "/")
        assert b'data-user="drift_by"' in body
        assert b"password_check.js" in body  # js_hint.txt text

    def test_no_clue_while_engagement_is_healthy(self, rig):
        clock = StepClock()
        shop = rig("webshop", "http", clock=clock)
        fetch(shop, "GET", "/")
        clock.tick(1_000)
        _, _, body = fetch(shop, "GET", "/")
        assert b'data-user="drift_by"' not in body


# ---------------------------------------------------------------------------
# FTP depot
# ---------------------------------------------------------------------------

FTP_URL_CONTEXT = {"url_context": {"http": "127.0.0.1:8081"}}


def ftp_client(rig) -> ftplib.FTP:
    host, port = rig.address
    ftp = ftplib.FTP()
    ftp.connect(host, port, timeout=5)
    return ftp


class TestFtpDepot:
    def test_banner_and_anonymous_login_advance_the_session(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        assert "ProFTPD" in ftp.getwelcome()
        resp = ftp.login("anonymous", "probe@example.com")
        assert resp.startswith("230")
        session = depot.session()
        assert session.current_stage == "ftp_files"
        assert session.badges == ["FakeMonetary:4250.00", "Badge:depot-access"]
        ftp.quit()

    def test_wrong_password_is_rejected(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        with pytest.raises(ftplib.error_perm):
            ftp.login("admin", "letmein")
        assert depot.session().current_stage == "ftp_entry"
        assert depot.records[-1]["action"] == "FtpLogin"
        assert depot.records[-1]["success"] is False
        ftp.close()

    def test_commands_require_login_first(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        with pytest.raises(ftplib.error_perm):
            ftp.sendcmd("PWD")
        ftp.close()

    def test_listing_names_the_planted_files(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        ftp.login("anonymous", "x")
        lines = []
        ftp.retrlines("LIST", lines.append)
        joined = "\n".join(lines)
        for name in ("Database.DB", "confidential.csv", "nmap_scan.txt"):
            assert name in joined
        # advertised size of the filler blob matches its configured size
        db_row = next(l for l in lines if "Database.DB" in l)
        assert "262144" in db_row
        ftp.quit()

    def test_filler_download_carries_the_planted_urls(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        ftp.login("anonymous", "x")
        blob = bytearray()
        ftp.retrbinary("RETR Database.DB", blob.extend)
        assert len(blob) == 262144
        assert b"http://127.0.0.1:8081/" in blob
        assert b"http://127.0.0.1:8081/reviews" in blob
        assert depot.session().current_stage == "planted_site"
        ftp.quit()

    def test_cards_csv_is_synthetic_but_plausible(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        ftp.login("anonymous", "x")
        blob = bytearray()
        ftp.retrbinary("RETR confidential.csv", blob.extend)
        lines = blob.decode().strip().splitlines()
        assert lines[0] == "id,name,email,street,city,card_number,card_expiry,cvv,balance"
        assert len(lines) == 501
        for row in lines[1:6]:
            card = row.split(",")[5]
            assert luhn_valid(card)
            assert card[:6] in TEST_CARD_IINS
        ftp.quit()

    def test_missing_file_is_550(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        ftp.login("anonymous", "x")
        with pytest.raises(ftplib.error_perm):
            ftp.retrbinary("RETR shadow", lambda _: None)
        assert depot.records[-1]["action"] == "FileDownload"
        assert depot.records[-1]["success"] is False
        ftp.quit()

    def test_upload_lands_in_quarantine(self, rig, tmp_path):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        ftp.login("anonymous", "x")
        resp = ftp.storbinary("STOR dropper.exe", io.BytesIO(b"MZ\x90\x00payload"))
        assert resp.startswith("226")
        stored = list((tmp_path / "ftp-uploads").iterdir())
        assert len(stored) == 1
        assert stored[0].name == "0001-dropper.exe"
        assert stored[0].read_bytes() == b"MZ\x90\x00payload"
        assert any(r["action"] == "FileUpload" for r in depot.records)
        ftp.quit()

    def test_oversized_line_is_refused(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        sock = socket.create_connection(depot.address, timeout=5)
        read_until(sock, b"\r\n")
        sock.sendall(b"USER " + b"A" * 2000 + b"\r\n")
        reply = read_until(sock, b"\r\n")
        assert reply.startswith(b"500")
        assert depot.records[-1]["action"] == "ExploitAttempt"
        assert depot.records[-1]["success"] is False
        sock.close()

    def test_operator_message_rides_a_multiline_reply(self, rig):
        depot = rig("ftp-depot", "ftp", options_override=FTP_URL_CONTEXT)
        ftp = ftp_client(depot)
        ftp.login("anonymous", "x")
        session = depot.session()
        action = OperatorAction.from_mapping(
            {"kind": "CoerciveMessage", "operator_id": "op-7", "message": "transfers are audited"})
        depot.store.apply_operator(session.id, action)
        resp = ftp.sendcmd("SYST")
        assert "transfers are audited" in resp
        assert resp.splitlines()[-1].startswith("215 ")
        ftp.quit()


# ---------------------------------------------------------------------------
# SSH shell emulation
# ---------------------------------------------------------------------------

class TestSshEmu:
    def test_login_shows_motd_and_advances_to_device(self, rig):
        front = rig("iot-fleet", "ssh-front")
        sock = socket.create_connection(front.address, timeout=5)
        greeting = read_until(sock, b"login: ")
        assert b"SSH-2.0-dropbear_2019.78" in greeting
        sock.sendall(b"login user=root pass=root\n")
        shell = read_until(sock, b"$ ")
        assert b"access granted" in shell
        assert b"camera is broken" in shell  # motd text
        session = front.session()
        assert session.current_stage == "device"
        assert session.badges == ["InfoFile:broker_credentials.txt",
                                  "Badge:first-device"]
        sock.sendall(b"ls\n")
        listing = read_until(sock, b"$ ")
        assert b"broker_credentials.txt" in listing
        sock.sendall(b"cat broker_credentials.txt\n")
        content = read_until(sock, b"$ ")
        assert b"mesh2019" in content
        assert front.records[-1]["action"] == "FileDownload"
        sock.sendall(b"exit\n")
        sock.close()

    def test_wrong_password_keeps_the_login_prompt(self, rig):
        front = rig("iot-fleet", "ssh-front")
        sock = socket.create_connection(front.address, timeout=5)
        read_until(sock, b"login: ")
        sock.sendall(b"login user=root pass=toor\n")
        out = read_until(sock, b"login: ")
        assert b"access denied" in out
        assert front.session().current_stage == "iot_entry"
        assert front.records[-1]["success"] is False
        sock.close()

    def test_node_tag_in_the_logged_excerpt(self, rig):
        front = rig("iot-fleet", "ssh-front")
        sock = socket.create_connection(front.address, timeout=5)
        read_until(sock, b"login: ")
        sock.sendall(b"login user=root pass=root\n")
        read_until(sock, b"$ ")
        assert front.records[-1]["raw_excerpt"].endswith("node=front")
        sock.close()

    def test_hardened_host_rejects_the_overflow(self, rig):
        front = rig("iot-fleet", "ssh-front")
        sock = socket.create_connection(front.address, timeout=5)
        read_until(sock, b"login: ")
        sock.sendall(b"A" * 200 + b"\n")
        out = read_until(sock, b"login: ")
        assert b"input rejected" in out
        assert front.records[-1]["action"] == "ExploitAttempt"
        assert front.records[-1]["success"] is False
        sock.close()

    def test_legacy_vm_overflow_drops_to_root(self, rig):
        legacy = rig("ftp-depot", "legacy-vm")
        sock = socket.create_connection(legacy.address, timeout=5)
        read_until(sock, b"login: ")
        sock.sendall(b"A" * 200 + b"\n")
        out = read_until(sock, b"# ")
        assert b"segmentation fault" in out
        assert b"uid=0(root)" in out
        assert legacy.records[-1]["action"] == "ExploitAttempt"
        assert legacy.records[-1]["success"] is True
        assert "node=legacy-vm" in legacy.records[-1]["raw_excerpt"]
        sock.close()

    def test_unknown_command_is_a_logged_failure(self, rig):
        front = rig("iot-fleet", "ssh-front")
        sock = socket.create_connection(front.address, timeout=5)
        read_until(sock, b"login: ")
        sock.sendall(b"login user=root pass=root\n")
        read_until(sock, b"$ ")
        sock.sendall(b"rm -rf /\n")
        out = read_until(sock, b"$ ")
        assert b"command not found" in out
        assert front.records[-1]["success"] is False
        sock.close()

    def test_operator_notice_prefixes_shell_output(self, rig):
        front = rig("iot-fleet", "ssh-front")
        sock = socket.create_connection(front.address, timeout=5)
        read_until(sock, b"login: ")
        sock.sendall(b"login user=root pass=root\n")
        read_until(sock, b"$ ")
        session = front.session()
        action = OperatorAction.from_mapping(
            {"kind": "CoerciveMessage", "operator_id": "op-7", "message": "this host is instrumented"})
        front.store.apply_operator(session.id, action)
        sock.sendall(b"ls\n")
        out = read_until(sock, b"$ ")
        assert b"*** this host is instrumented" in out
        sock.close()


# ---------------------------------------------------------------------------
# MQTT broker
# ---------------------------------------------------------------------------

def _mstr(s: str) -> bytes:
    return struct.pack("!H", len(s)) + s.encode()


def _connect_packet(client_id: str = "probe", user: str | None = None,
                    password: str | None = None) -> bytes:
    flags = 0x02  # clean session
    payload = _mstr(client_id)
    if user is not None:
        flags |= 0x80
        payload += _mstr(user)
    if password is not None:
        flags |= 0x40
        payload += _mstr(password)
    var = _mstr("MQTT") + bytes([4, flags]) + struct.pack("!H", 60) + payload
    assert len(var) < 128
    return bytes([0x10, len(var)]) + var


def _subscribe_packet(packet_id: int, topic: str) -> bytes:
    var = struct.pack("!H", packet_id) + _mstr(topic) + b"\x00"
    return bytes([0x82, len(var)]) + var


def _read_packet(sock: socket.socket):
    head = sock.recv(1)
    if not head:
        return None
    length = 0
    shift = 0
    while True:
        b = sock.recv(1)
        length |= (b[0] & 0x7F) << shift
        if not b[0] & 0x80:
            break
        shift += 7
    payload = b""
    while len(payload) < length:
        payload += sock.recv(length - len(payload))
    return head[0] >> 4, payload


def _parse_publish(payload: bytes) -> tuple[str, str]:
    n = struct.unpack("!H", payload[:2])[0]
    return payload[2:2 + n].decode(), payload[2 + n:].decode()


class TestMqttBroker:
    def test_good_credentials_get_connack_zero(self, rig):
        broker = rig("iot-fleet", "mqtt")
        sock = socket.create_connection(broker.address, timeout=5)
        sock.sendall(_connect_packet("sensor-7", "fleet", "mesh2019"))
        ptype, payload = _read_packet(sock)
        assert ptype == 2  # CONNACK
        assert payload == b"\x00\x00"
        assert broker.records[-1]["action"] == "MqttConnect"
        assert broker.records[-1]["success"] is True
        assert "client=sensor-7" in broker.records[-1]["raw_excerpt"]
        sock.close()

    def test_bad_credentials_get_refused_and_dropped(self, rig):
        broker = rig("iot-fleet", "mqtt")
        sock = socket.create_connection(broker.address, timeout=5)
        sock.sendall(_connect_packet("probe", "fleet", "wrong"))
        ptype, payload = _read_packet(sock)
        assert (ptype, payload[1]) == (2, 5)  # not authorized
        sock.settimeout(5)
        assert sock.recv(1) == b""  # server hung up
        assert broker.records[-1]["success"] is False
        sock.close()

    def test_subscribe_replays_retained_telemetry(self, rig):
        broker = rig("iot-fleet", "mqtt")
        sock = socket.create_connection(broker.address, timeout=5)
        sock.sendall(_connect_packet("probe", "fleet", "mesh2019"))
        _read_packet(sock)  # CONNACK
        sock.sendall(_subscribe_packet(1, "factory/#"))
        ptype, payload = _read_packet(sock)
        assert ptype == 9  # SUBACK
        assert payload[:2] == b"\x00\x01"
        seen = {}
        for _ in range(3):
            ptype, payload = _read_packet(sock)
            assert ptype == 3
            topic, body = _parse_publish(payload)
            seen[topic] = body
        assert seen == {"factory/line1/temp": "21.4",
                        "factory/line1/rpm": "1180",
                        "factory/line1/door": "closed"}
        sock.close()

    def test_subscribe_filter_narrows_the_replay(self, rig):
        broker = rig("iot-fleet", "mqtt")
        sock = socket.create_connection(broker.address, timeout=5)
        sock.sendall(_connect_packet("probe", "fleet", "mesh2019"))
        _read_packet(sock)
        sock.sendall(_subscribe_packet(2, "factory/line1/door"))
        _read_packet(sock)  # SUBACK
        ptype, payload = _read_packet(sock)
        topic, body = _parse_publish(payload)
        assert (topic, body) == ("factory/line1/door", "closed")
        # nothing else should arrive
        sock.settimeout(0.3)
        with pytest.raises(socket.timeout):
            sock.recv(1)
        sock.close()

    def test_pingreq_gets_pingresp(self, rig):
        broker = rig("iot-fleet", "mqtt")
        sock = socket.create_connection(broker.address, timeout=5)
        sock.sendall(_connect_packet("probe", "fleet", "mesh2019"))
        _read_packet(sock)
        sock.sendall(bytes([0xC0, 0x00]))
        ptype, payload = _read_packet(sock)
        assert (ptype, payload) == (13, b"")  # PINGRESP
        sock.close()

    def test_client_publish_is_observed(self, rig):
        broker = rig("iot-fleet", "mqtt")
        sock = socket.create_connection(broker.address, timeout=5)
        sock.sendall(_connect_packet("probe", "fleet", "mesh2019"))
        _read_packet(sock)
        var = _mstr("factory/line1/temp") + b"999"
        sock.sendall(bytes([0x30, len(var)]) + var)
        sock.sendall(bytes([0xE0, 0x00]))  # DISCONNECT
        sock.close()
        # nothing is echoed back, but the publish must land in the store
        deadline = time.monotonic() + 2.0
        while time.monotonic() < deadline:
            if any(r["raw_excerpt"].startswith("PUBLISH") for r in broker.records):
                break
            time.sleep(0.02)
        pub = next(r for r in broker.records
                   if r["raw_excerpt"].startswith("PUBLISH"))
        assert "topic=factory/line1/temp" in pub["raw_excerpt"]
        assert pub["success"] is True
