"""Device-fleet decoys: a pseudo-SSH maintenance shell and a small MQTT broker.

The SSH side is a low-interaction emulation over plaintext: it speaks a
banner, a one-line login, and a tiny shell (ls / cat / id / uname), which
is all the narrative needs.  Every observed excerpt is tagged with
``node=<name>`` so transition globs can target individual devices.  The
MQTT side implements a real 3.1.1 subset (CONNECT, SUBSCRIBE, PUBLISH,
PINGREQ, DISCONNECT) over binary packets.
"""

from __future__ import annotations

import socket
import struct
from typing import Any

from decoyweaver.decoys.base import DecoyContext, TcpDecoy, recv_line
from decoyweaver.events import Protocol

EXPLOIT_LINE_LIMIT = 1024


class SshEmuDecoy(TcpDecoy):
    protocol = Protocol.SSH

    def __init__(self, ctx: DecoyContext, host: str = "127.0.0.1", port: int = 0):
        super().__init__(ctx, host, port)
        opts = ctx.options
        self.node: str = opts.get("node", ctx.role or "node")
        self.banner: str = opts.get("banner", "SSH-2.0-OpenSSH_7.4")
        self.credentials: list[list[str]] = [list(c) for c in opts.get("credentials", [])]
        self.files: dict[str, dict[str, Any]] = dict(opts.get("files", {}))
        self.motd: str = ""
        if opts.get("motd"):
            self.motd = ctx.asset_text(opts["motd"])
        self.exploitable: bool = bool(opts.get("exploitable", False))

    # -- session ---------------------------------------------------------

    def handle(self, conn: socket.socket, addr: tuple[str, int]) -> None:
        ip = addr[0]
        send = lambda text: conn.sendall(text.encode("utf-8", "replace"))
        send(self.banner + "\r\n")

        authed = False
        while True:
            send("$ " if authed else "login: ")
            line = recv_line(conn, limit=64 * 1024)
            if not line:
                break
            tagged = f"{line} node={self.node}"
            messages, clue = self.decorations(ip)
            notices = "".join(f"*** {m}\r\n" for m in
                              (m.replace("\r", " ").replace("\n", " ") for m in messages))
            if clue is not None:
                notices += f"*** note: see {clue.asset}\r\n"

            if len(line) > EXPLOIT_LINE_LIMIT or "\x90" * 8 in line or "A" * 64 in line:
                if self.exploitable:
                    self.observe(ip, tagged, True)
                    send(notices + "segmentation fault (core dumped)\r\n"
                         "uid=0(root) gid=0(root)\r\n# ")
                    authed = True
                else:
                    self.observe(ip, tagged, False)
                    send(notices + "input rejected: line too long\r\n")
                continue

            if not authed:
                user, password = _parse_login(line)
                if user is None:
                    send(notices + "usage: login user=<name> pass=<password>\r\n")
                    continue
                authed = any(user == u and password == p for u, p in self.credentials)
                self.observe(ip, tagged, authed)
                if authed:
                    send(notices + (self.motd + "\r\n" if self.motd else "")
                         + "access granted\r\n")
                else:
                    send(notices + "access denied\r\n")
                continue

            cmd, _, arg = line.partition(" ")
            if cmd in ("exit", "logout", "quit"):
                send(notices + "bye\r\n")
                break
            if cmd == "ls":
                self.observe(ip, tagged, True)
                send(notices + ("\r\n".join(sorted(self.files)) or "(empty)") + "\r\n")
            elif cmd == "cat":
                name = arg.strip()
                exists = name in self.files
                self.observe(ip, tagged, exists)
                if exists:
                    send(notices + self._file_text(name) + "\r\n")
                else:
                    send(notices + f"cat: {name}: no such file\r\n")
            elif cmd in ("id", "whoami"):
                self.observe(ip, tagged, True)
                send(notices + "uid=1000(svc) gid=1000(svc)\r\n")
            elif cmd in ("uname", "help", "pwd"):
                self.observe(ip, tagged, True)
                send(notices + ("Linux " + self.node + " 4.14.98 armv7l" if cmd == "uname"
                                else "/home/svc" if cmd == "pwd"
                                else "commands: ls cat id uname pwd exit") + "\r\n")
            else:
                self.observe(ip, tagged, False)
                send(notices + f"{cmd}: command not found\r\n")

    def _file_text(self, name: str) -> str:
        entry = self.files[name]
        try:
            return self.ctx.asset_text(entry.get("asset", name))
        except OSError:
            return "(unreadable)"


def _parse_login(line: str) -> tuple[str | None, str | None]:
    if "login" not in line and "auth" not in line:
        return None, None
    user = password = None
    for token in line.split():
        if token.startswith("user="):
            user = token[5:]
        elif token.startswith("pass="):
            password = token[5:]
    return user, password


# ---------------------------------------------------------------------------
# MQTT
# ---------------------------------------------------------------------------

class MqttBrokerDecoy(TcpDecoy):
    protocol = Protocol.MQTT

    def __init__(self, ctx: DecoyContext, host: str = "127.0.0.1", port: int = 0):
        super().__init__(ctx, host, port)
        opts = ctx.options
        self.credentials: list[list[str]] = [list(c) for c in opts.get("credentials", [])]
        self.retained: dict[str, str] = dict(opts.get("retained", {}))

    def handle(self, conn: socket.socket, addr: tuple[str, int]) -> None:
        ip = addr[0]
        authed = False
        while True:
            packet = _read_packet(conn)
            if packet is None:
                break
            ptype, flags, payload = packet

            if ptype == 1:  # CONNECT
                client_id, user, password = _parse_connect(payload)
                messages, clue = self.decorations(ip)
                authed = any(user == u and password == p for u, p in self.credentials)
                self.observe(ip, f"CONNECT client={client_id} user={user or ''}", authed)
                rc = 0 if authed else 5  # 5: not authorized
                conn.sendall(bytes([0x20, 0x02, 0x00, rc]))
                if not authed:
                    break
                for msg in messages:
                    conn.sendall(_publish_packet("system/notice", msg))
                if clue is not None:
                    conn.sendall(_publish_packet("system/note", f"see {clue.asset}"))
            elif not authed:
                break
            elif ptype == 8:  # SUBSCRIBE
                packet_id = struct.unpack("!H", payload[:2])[0]
                topics = _parse_topic_filters(payload[2:])
                conn.sendall(bytes([0x90, 2 + len(topics)])
                             + struct.pack("!H", packet_id) + bytes([0] * len(topics)))
                for topic, value in self.retained.items():
                    if any(_topic_matches(pattern, topic) for pattern in topics):
                        conn.sendall(_publish_packet(topic, value, retain=True))
            elif ptype == 3:  # PUBLISH from the client
                topic, body = _parse_publish(payload)
                self.observe(ip, f"PUBLISH topic={topic} {body[:100]}", True)
            elif ptype == 12:  # PINGREQ
                conn.sendall(bytes([0xD0, 0x00]))
            elif ptype == 14:  # DISCONNECT
                break


def _read_packet(conn: socket.socket) -> tuple[int, int, bytes] | None:
    head = _read_exact(conn, 1)
    if head is None:
        return None
    ptype, flags = head[0] >> 4, head[0] & 0x0F
    length = 0
    shift = 0
    for _ in range(4):
        b = _read_exact(conn, 1)
        if b is None:
            return None
        length |= (b[0] & 0x7F) << shift
        if not b[0] & 0x80:
            break
        shift += 7
    payload = _read_exact(conn, length) if length else b""
    if payload is None:
        return None
    return ptype, flags, payload


def _read_exact(conn: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        try:
            block = conn.recv(n - len(buf))
        except OSError:
            return None
        if not block:
            return None
        buf += block
    return buf


def _take_string(data: bytes, pos: int) -> tuple[str, int]:
    n = struct.unpack_from("!H", data, pos)[0]
    return data[pos + 2:pos + 2 + n].decode("utf-8", "replace"), pos + 2 + n


def _parse_connect(payload: bytes) -> tuple[str, str | None, str | None]:
    pos = 0
    _, pos = _take_string(payload, pos)        # protocol name
    pos += 1                                   # protocol level
    connect_flags = payload[pos]
    pos += 3                                   # flags + keepalive
    client_id, pos = _take_string(payload, pos)
    if connect_flags & 0x04:                   # will flag
        _, pos = _take_string(payload, pos)
        _, pos = _take_string(payload, pos)
    user = password = None
    if connect_flags & 0x80:
        user, pos = _take_string(payload, pos)
    if connect_flags & 0x40:
        password, pos = _take_string(payload, pos)
    return client_id, user, password


def _parse_topic_filters(data: bytes) -> list[str]:
    topics = []
    pos = 0
    while pos < len(data):
        topic, pos = _take_string(data, pos)
        pos += 1  # requested QoS
        topics.append(topic)
    return topics


def _parse_publish(payload: bytes) -> tuple[str, str]:
    topic, pos = _take_string(payload, 0)
    return topic, payload[pos:].decode("utf-8", "replace")


def _publish_packet(topic: str, body: str, retain: bool = False) -> bytes:
    t = topic.encode()
    b = body.encode()
    var = struct.pack("!H", len(t)) + t + b
    head = bytes([0x30 | (1 if retain else 0)])
    return head + _varint(len(var)) + var


def _varint(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _topic_matches(pattern: str, topic: str) -> bool:
    if pattern == "#":
        return True
    p_parts = pattern.split("/")
    t_parts = topic.split("/")
    for i, p in enumerate(p_parts):
        if p == "#":
            return True
        if i >= len(t_parts):
            return False
        if p != "+" and p != t_parts[i]:
            return False
    return len(p_parts) == len(t_parts)
