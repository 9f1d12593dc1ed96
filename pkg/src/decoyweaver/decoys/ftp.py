"""Fake FTP drop box.

Speaks enough RFC 959 to satisfy command-line clients: USER/PASS, CWD,
PWD, TYPE, PASV, LIST, RETR, STOR, QUIT.  The file table comes from the
bundle's runtime options; entries are fabricated on the fly (card dumps,
seeded filler with planted URLs) or read from bundle assets.  Uploads are
quarantined under the data directory and never served back.
"""

from __future__ import annotations

import socket
import threading
from typing import Any, Iterator

from decoyweaver.decoys import fabrication
from decoyweaver.decoys.base import DecoyContext, TcpDecoy, recv_line
from decoyweaver.events import Protocol

DATA_ACCEPT_TIMEOUT_S = 10.0


class FtpDepotDecoy(TcpDecoy):
    protocol = Protocol.FTP

    def __init__(self, ctx: DecoyContext, host: str = "127.0.0.1", port: int = 0):
        super().__init__(ctx, host, port)
        opts = ctx.options
        self.banner = opts.get("banner", "220 FTP server ready")
        self.credentials: list[list[str]] = [list(c) for c in opts.get("credentials", [])]
        self.files: dict[str, dict[str, Any]] = dict(opts.get("files", {}))
        self.upload_dir = ctx.data_dir / "ftp-uploads"
        self._upload_count = 0
        self._lock = threading.Lock()

    def reset(self) -> None:
        with self._lock:
            self._upload_count = 0
        if self.upload_dir.is_dir():
            for p in self.upload_dir.iterdir():
                p.unlink(missing_ok=True)

    # -- session -----------------------------------------------------------

    def handle(self, conn: socket.socket, addr: tuple[str, int]) -> None:
        ip = addr[0]
        send = lambda line: conn.sendall((line + "\r\n").encode("latin-1", "replace"))
        send(self.banner if self.banner.startswith("220") else f"220 {self.banner}")

        user = ""
        authed = False
        cwd = "/"
        data_listener: socket.socket | None = None

        while True:
            line = recv_line(conn)
            if not line:
                break
            verb, _, arg = line.partition(" ")
            verb = verb.upper()
            arg = arg.strip()

            # operator messages and clues are polled before the event is
            # ingested (so the idle gap is still visible) and ride along on
            # this command's reply as RFC 959 multi-line continuation rows
            messages, clue = self.decorations(ip)

            def reply(code: int, text: str) -> None:
                for msg in messages:
                    send(f"{code}-{msg}".replace("\r", " ").replace("\n", " "))
                if clue is not None:
                    send(f"{code}-NOTE see {clue.asset}")
                send(f"{code} {text}")

            if len(line) > 1024 or "\x90" * 8 in line:
                self.observe(ip, line, False)
                reply(500, "line too long")
            elif verb == "USER":
                user = arg
                reply(331, "password required")
            elif verb == "PASS":
                authed = self._check_login(user, arg)
                self.observe(ip, f"USER {user}\r\nPASS {arg}", authed)
                if authed:
                    reply(230, "login successful")
                else:
                    reply(530, "login incorrect")
            elif verb == "QUIT":
                reply(221, "goodbye")
                break
            elif not authed:
                reply(530, "please login with USER and PASS")
            elif verb == "SYST":
                reply(215, "UNIX Type: L8")
            elif verb == "TYPE":
                reply(200, "type set")
            elif verb == "PWD":
                self.observe(ip, line, True)
                reply(257, f'"{cwd}"')
            elif verb == "CWD":
                cwd = arg or "/"
                self.observe(ip, line, True)
                reply(250, "directory changed")
            elif verb == "PASV":
                data_listener = self._open_data_listener()
                h = self.host.replace(".", ",")
                p = data_listener.getsockname()[1]
                reply(227, f"entering passive mode ({h},{p >> 8},{p & 255})")
            elif verb in ("LIST", "NLST"):
                self.observe(ip, line if arg else verb, True)
                _, data_listener = self._send_data(
                    send, data_listener, self._listing().encode("latin-1"))
            elif verb == "RETR":
                exists = arg in self.files
                self.observe(ip, line, exists)
                if not exists:
                    reply(550, "file not found")
                    continue
                _, data_listener = self._send_data(
                    send, data_listener, self._file_content(arg), name=arg)
            elif verb in ("STOR", "APPE"):
                self.observe(ip, line, True)
                _, data_listener = self._recv_data(send, data_listener, arg)
            else:
                self.observe(ip, line, False)
                reply(502, "command not implemented")

        if data_listener is not None:
            data_listener.close()

    # -- internals -----------------------------------------------------------

    def _check_login(self, user: str, password: str) -> bool:
        for cred_user, cred_pass in self.credentials:
            if user == cred_user and (cred_pass == "*" or password == cred_pass):
                return True
        return False

    def _listing(self) -> str:
        rows = []
        for name, entry in sorted(self.files.items()):
            size = self._file_size(name, entry)
            rows.append(f"-rw-r--r--   1 ftp      ftp  {size:>12} Jan 12  2026 {name}")
        return "\r\n".join(rows) + "\r\n"

    def _file_size(self, name: str, entry: dict[str, Any]) -> int:
        kind = entry.get("type", "asset")
        if kind == "filler":
            return max(fabrication.FILLER_MIN_SIZE,
                       int(entry.get("size", fabrication.FILLER_DEFAULT_SIZE)))
        if kind == "cards":
            return len(self._cards_csv(entry))
        try:
            return (self.ctx.assets_dir / entry.get("asset", name)).stat().st_size
        except OSError:
            return 0

    def _cards_csv(self, entry: dict[str, Any]) -> bytes:
        records = fabrication.fake_customer_records(
            int(entry.get("count", 100)), int(entry.get("seed", 1)))
        return fabrication.records_csv(records).encode()

    def _file_content(self, name: str) -> Iterator[bytes]:
        entry = self.files[name]
        kind = entry.get("type", "asset")
        if kind == "filler":
            urls = [u.format(**self.ctx.options.get("url_context", {}))
                    for u in entry.get("planted_urls", [])]
            return fabrication.filler_stream(
                int(entry.get("size", fabrication.FILLER_DEFAULT_SIZE)),
                int(entry.get("seed", 1)), urls)
        if kind == "cards":
            return iter([self._cards_csv(entry)])
        return iter([self.ctx.asset_bytes(entry.get("asset", name))])

    def _open_data_listener(self) -> socket.socket:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.bind((self.host, 0))
        listener.listen(1)
        listener.settimeout(DATA_ACCEPT_TIMEOUT_S)
        return listener

    def _send_data(self, send, listener: socket.socket | None,
                   payload, name: str = "") -> tuple[bool, None]:
        if listener is None:
            send("425 use PASV first")
            return False, None
        chunks = iter([payload]) if isinstance(payload, bytes) else payload
        try:
            send(f"150 opening data connection{' for ' + name if name else ''}")
            data, _ = listener.accept()
            try:
                for chunk in chunks:
                    data.sendall(chunk)
            finally:
                data.close()
            send("226 transfer complete")
            return True, None
        except socket.timeout:
            send("425 data connection failed")
            return False, None
        finally:
            listener.close()

    def _recv_data(self, send, listener: socket.socket | None,
                   name: str) -> tuple[bool, None]:
        if listener is None:
            send("425 use PASV first")
            return False, None
        try:
            send("150 ok to send data")
            data, _ = listener.accept()
            received = bytearray()
            try:
                data.settimeout(DATA_ACCEPT_TIMEOUT_S)
                while len(received) < 8 * 2 ** 20:
                    block = data.recv(65536)
                    if not block:
                        break
                    received += block
            finally:
                data.close()
            self._quarantine(name, bytes(received))
            send("226 transfer complete (queued for review)")
            return True, None
        except socket.timeout:
            send("425 data connection failed")
            return False, None
        finally:
            listener.close()

    def _quarantine(self, name: str, payload: bytes) -> None:
        self.upload_dir.mkdir(parents=True, exist_ok=True)
        with self._lock:
            self._upload_count += 1
            n = self._upload_count
        safe = "".join(c if c.isalnum() or c in "._-" else "_" for c in name)[:60] or "file"
        (self.upload_dir / f"{n:04d}-{safe}").write_bytes(payload)
