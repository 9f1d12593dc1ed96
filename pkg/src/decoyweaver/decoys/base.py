"""Common plumbing for the TCP decoys.

A decoy owns one listening socket, serves each connection on its own
daemon thread and reports everything through the DecoyContext's session
store.  The peer address of the connection is the identity the engine
keys sessions on.
"""

from __future__ import annotations

import errno
import logging
import socket
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from decoyweaver.errors import PortInUse
from decoyweaver.events import Protocol
from decoyweaver.sessions import SessionStore

log = logging.getLogger(__name__)

CONNECTION_TIMEOUT_S = 30.0


@dataclass
class DecoyContext:
    """Everything a decoy needs besides its socket."""

    store: SessionStore
    assets_dir: Path
    data_dir: Path
    options: dict[str, Any] = field(default_factory=dict)
    role: str = ""

    def asset_text(self, name: str) -> str:
        return (self.assets_dir / name).read_text(encoding="utf-8")

    def asset_bytes(self, name: str) -> bytes:
        return (self.assets_dir / name).read_bytes()


class TcpDecoy:
    """Threaded accept loop; subclasses implement handle()."""

    protocol = Protocol.HTTP  # subclasses override

    def __init__(self, ctx: DecoyContext, host: str = "127.0.0.1", port: int = 0):
        self.ctx = ctx
        self.host = host
        self.port = port
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._running = threading.Event()

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        if self._listener is not None:
            return
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((self.host, self.port))
        except OSError as exc:
            listener.close()
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(f"{self.host}:{self.port} ({self.ctx.role})") from exc
            raise
        listener.listen(32)
        self.port = listener.getsockname()[1]
        self._listener = listener
        self._running.set()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name=f"decoy-{self.ctx.role or self.port}", daemon=True)
        self._accept_thread.start()

    def stop(self) -> None:
        self._running.clear()
        if self._listener is not None:
            # shutdown() wakes a thread parked in accept(); close() alone
            # leaves it blocked until the join below times out
            try:
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._listener.close()
            except OSError:
                pass
            self._listener = None
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)
            self._accept_thread = None

    @property
    def address(self) -> tuple[str, int]:
        return self.host, self.port

    def reset(self) -> None:
        """Drop per-deployment mutable state (posted content, uploads)."""

    # -- connection handling ------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._listener is not None
        listener = self._listener
        while self._running.is_set():
            try:
                conn, addr = listener.accept()
            except OSError:
                break  # listener closed during stop()
            conn.settimeout(CONNECTION_TIMEOUT_S)
            threading.Thread(target=self._handle_safely, args=(conn, addr),
                             daemon=True).start()

    def _handle_safely(self, conn: socket.socket, addr: tuple[str, int]) -> None:
        try:
            self.handle(conn, addr)
        except (socket.timeout, ConnectionError):
            pass
        except Exception:
            log.exception("%s handler crashed for %s", type(self).__name__, addr)
        finally:
            try:
                conn.close()
            except OSError:
                pass

    def handle(self, conn: socket.socket, addr: tuple[str, int]) -> None:
        raise NotImplementedError

    # -- shared helpers ------------------------------------------------------

    def observe(self, ip: str, raw: str, success: bool):
        return self.ctx.store.observe(ip, self.protocol, raw, success)

    def decorations(self, ip: str):
        return self.ctx.store.decorations(ip)


def recv_line(conn: socket.socket, limit: int = 8192) -> str:
    """Read one CRLF/LF-terminated line (without the terminator)."""
    buf = bytearray()
    while len(buf) < limit:
        ch = conn.recv(1)
        if not ch:
            break
        if ch == b"\n":
            break
        buf += ch
    return buf.decode("latin-1").rstrip("\r")
