"""Fake storefront over HTTP.

The shop has a deliberately breakable login (a tautology in the password
field walks straight in; there are no credentials that actually work), a
comments board that stores submissions unescaped, a robots.txt that
points at the admin area, and an admin panel holding the bait database.
Operator messages and clues are folded into every response.
"""

from __future__ import annotations

import errno
import hashlib
import html
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import unquote_plus

from decoyweaver.decoys import fabrication
from decoyweaver.decoys.base import DecoyContext
from decoyweaver.errors import PortInUse
from decoyweaver.events import Protocol, sqli_breaks_out, xss_would_fire
from decoyweaver.scenario import Clue

MAX_BODY = 64 * 1024


class HttpShopDecoy:
    protocol = Protocol.HTTP

    def __init__(self, ctx: DecoyContext, host: str = "127.0.0.1", port: int = 0):
        self.ctx = ctx
        self.host = host
        self.port = port
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self._lock = threading.Lock()

        opts = ctx.options
        self.skin = json.loads(ctx.asset_text(opts.get("skin", "skin.json")))
        self.admin_token: str = opts.get("admin_token", "0123456789abcdef")
        self.checker_js = ctx.asset_text(opts.get("checker", "password_check.js")) \
            .replace("{{ADMIN_TOKEN}}", self.admin_token)
        self._seed_comments = json.loads(ctx.asset_text(opts.get("comments", "planted_comments.json")))
        self.comments: list[dict] = [dict(c) for c in self._seed_comments]
        self.peers = json.loads(ctx.asset_text(opts.get("peers", "planted_peers.json")))
        notes_name = opts.get("notes")
        notes = ctx.asset_text(notes_name) if notes_name else ""
        self.notes = notes.replace("{{SECOND_SITE_URL}}", opts.get("second_site_url", ""))
        self.db_bytes = fabrication.sqlite_db_bytes(
            int(opts.get("db_records", 100)), int(opts.get("db_seed", 1)))
        self.upload_dir = ctx.data_dir / "uploads"
        self._upload_count = 0

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        if self._server is not None:
            return
        decoy = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.0"

            def log_message(self, fmt, *args):  # noqa: N802 - stdlib name
                pass

            def do_GET(self):  # noqa: N802
                decoy._get(self)

            def do_POST(self):  # noqa: N802
                decoy._post(self)

            def do_HEAD(self):  # noqa: N802
                decoy._get(self, head_only=True)

        try:
            self._server = ThreadingHTTPServer((self.host, self.port), Handler)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                raise PortInUse(f"{self.host}:{self.port} ({self.ctx.role})") from exc
            raise
        self._server.daemon_threads = True
        self.port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name=f"decoy-{self.ctx.role or self.port}",
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    @property
    def address(self) -> tuple[str, int]:
        return self.host, self.port

    def reset(self) -> None:
        with self._lock:
            self.comments = [dict(c) for c in self._seed_comments]
            self._upload_count = 0
        if self.upload_dir.is_dir():
            for p in self.upload_dir.iterdir():
                p.unlink(missing_ok=True)

    # -- request plumbing ------------------------------------------------------

    def _excerpt(self, req: BaseHTTPRequestHandler, body: str) -> str:
        ua = req.headers.get("User-Agent", "")
        cookie = req.headers.get("Cookie", "")
        head = (f"{req.command} {req.path} HTTP/1.1\r\nHost: {self.host}:{self.port}"
                f"\r\nUser-Agent: {ua}")
        if cookie:
            head += f"\r\nCookie: {cookie}"
        return head + "\r\n\r\n" + body

    def _read_body(self, req: BaseHTTPRequestHandler) -> str:
        length = min(int(req.headers.get("Content-Length", 0) or 0), MAX_BODY)
        if length <= 0:
            return ""
        return req.rfile.read(length).decode("latin-1", errors="replace")

    def _authed(self, req: BaseHTTPRequestHandler) -> bool:
        cookie = req.headers.get("Cookie", "")
        return f"shop_admin={self.admin_token}" in cookie

    def _send(self, req: BaseHTTPRequestHandler, status: int, content: bytes,
              content_type: str, deco: tuple[list[str], Clue | None],
              extra: dict[str, str] | None = None,
              head_only: bool = False) -> None:
        messages, clue = deco
        if content_type.startswith("text/html"):
            content = self._embellish_html(content, messages, clue)
        try:
            req.send_response(status)
            req.send_header("Content-Type", content_type)
            for name, value in (extra or {}).items():
                req.send_header(name, value)
            for i, msg in enumerate(messages):
                req.send_header(f"X-Notice-{i}", msg.replace("\r", " ").replace("\n", " "))
            if clue is not None and not content_type.startswith("text/html"):
                req.send_header("X-Hint", clue.asset)
            req.send_header("Content-Length", str(len(content)))
            req.end_headers()
            if not head_only:
                req.wfile.write(content)
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _embellish_html(self, content: bytes, messages: list[str],
                        clue: Clue | None) -> bytes:
        inserts = []
        for msg in messages:
            inserts.append(f'<div class="operator-notice">{msg}</div>'.encode())
        if clue is not None:
            text = self._clue_text(clue)
            if clue.kind.value == "PlantedComment":
                inserts.append(f'<div class="comment" data-user="drift_by">{text}</div>'.encode())
            else:
                one_line = " ".join(text.split())[:400]
                inserts.append(f"<!-- {clue.asset}: {one_line} -->".encode())
        if not inserts:
            return content
        blob = b"\n".join(inserts)
        if b"</body>" in content:
            return content.replace(b"</body>", blob + b"\n</body>", 1)
        return content + b"\n" + blob

    def _clue_text(self, clue: Clue) -> str:
        try:
            return self.ctx.asset_text(clue.asset)
        except OSError:
            return clue.asset

    # -- GET routes ------------------------------------------------------------

    def _get(self, req: BaseHTTPRequestHandler, head_only: bool = False) -> None:
        ip = req.client_address[0]
        path = req.path.split("?", 1)[0]
        raw = self._excerpt(req, "")
        deco = self.ctx.store.decorations(ip)

        if path in ("/robots.txt", "/robot.txt"):
            body = ("User-agent: *\n"
                    "Disallow: /admin\n"
                    "Disallow: /admin/database.db\n"
                    "Disallow: /static/password_check.js\n").encode()
            self.observe(ip, raw, True)
            self._send(req, 200, body, "text/plain", deco, head_only=head_only)
        elif path == "/static/password_check.js":
            self.observe(ip, raw, True)
            self._send(req, 200, self.checker_js.encode(), "application/javascript",
                       deco, head_only=head_only)
        elif path == "/":
            self.observe(ip, raw, True)
            self._send(req, 200, self._front_page(), "text/html", deco, head_only=head_only)
        elif path == "/board":
            self.observe(ip, raw, True)
            self._send(req, 200, self._board_page(), "text/html", deco, head_only=head_only)
        elif path == "/comments":
            self.observe(ip, raw, True)
            self._send(req, 200, self._comments_page(), "text/html", deco, head_only=head_only)
        elif path == "/admin/database.db":
            ok = self._authed(req)
            self.observe(ip, raw, ok)
            if ok:
                self._send(req, 200, self.db_bytes, "application/octet-stream", deco,
                           extra={"Content-Disposition": 'attachment; filename="database.db"'},
                           head_only=head_only)
            else:
                self._send(req, 403, b"<html><body>403 forbidden</body></html>",
                           "text/html", deco, head_only=head_only)
        elif path == "/admin/notes.txt":
            ok = self._authed(req)
            self.observe(ip, raw, ok)
            status, body = (200, self.notes.encode()) if ok else (403, b"forbidden")
            self._send(req, status, body, "text/plain", deco, head_only=head_only)
        elif path == "/admin" or path.startswith("/admin/"):
            ok = self._authed(req)
            self.observe(ip, raw, ok)
            if ok:
                self._send(req, 200, self._admin_page(), "text/html", deco, head_only=head_only)
            else:
                self._send(req, 403, b"<html><body>403 forbidden</body></html>",
                           "text/html", deco, head_only=head_only)
        else:
            self.observe(ip, raw, False)
            self._send(req, 404, b"<html><body>404 not found</body></html>",
                       "text/html", deco, head_only=head_only)

    # -- POST routes -------------------------------------------------------------

    def _post(self, req: BaseHTTPRequestHandler) -> None:
        ip = req.client_address[0]
        path = req.path.split("?", 1)[0]
        body = self._read_body(req)
        raw = self._excerpt(req, body)
        deco = self.ctx.store.decorations(ip)

        if path == "/login":
            ok = sqli_breaks_out(unquote_plus(body))
            self.observe(ip, raw, ok)
            if ok:
                self._send(req, 302, b"", "text/html", deco, extra={
                    "Location": "/admin",
                    "Set-Cookie": f"shop_admin={self.admin_token}; Path=/",
                })
            else:
                self._send(req, 401, self._login_failed_page(), "text/html", deco)
        elif path == "/comments":
            fields = _form(body)
            text = fields.get("text", "")
            ok = xss_would_fire(text)
            self.observe(ip, raw, ok)
            with self._lock:
                self.comments.append({"author": fields.get("author", "anon")[:40],
                                      "text": text[:2000]})
            self._send(req, 303, b"", "text/html", deco, extra={"Location": "/comments"})
        elif path == "/upload":
            self.observe(ip, raw, True)
            self._quarantine(body.encode("latin-1", errors="replace"))
            self._send(req, 201, b"<html><body>stored for review</body></html>",
                       "text/html", deco)
        else:
            self.observe(ip, raw, False)
            self._send(req, 404, b"<html><body>404 not found</body></html>",
                       "text/html", deco)

    def observe(self, ip: str, raw: str, success: bool):
        return self.ctx.store.observe(ip, Protocol.HTTP, raw, success)

    def _quarantine(self, payload: bytes) -> None:
        self.upload_dir.mkdir(parents=True, exist_ok=True)
        with self._lock:
            self._upload_count += 1
            n = self._upload_count
        digest = hashlib.sha256(payload).hexdigest()[:12]
        (self.upload_dir / f"upload-{n:04d}-{digest}.bin").write_bytes(payload)

    # -- page rendering ------------------------------------------------------------

    def _front_page(self) -> bytes:
        rows = "\n".join(
            f"<li>{html.escape(p['name'])} <b>{html.escape(str(p['price']))}</b></li>"
            for p in self.skin.get("products", []))
        comments = self._comment_divs()
        page = f"""<html><head><title>{html.escape(self.skin.get('store', 'shop'))}</title>
<script src="/static/password_check.js"></script></head>
<body>
<h1>{html.escape(self.skin.get('store', 'shop'))}</h1>
<p>{html.escape(self.skin.get('tagline', ''))}</p>
<ul>{rows}</ul>
<form method="POST" action="/login" onsubmit="return checkPassword(this)">
<input name="username" placeholder="user"><input name="password" type="password">
<button>staff sign in</button></form>
<h2>customer comments</h2>{comments}
<p><a href="/comments">all comments</a> | <a href="/board">community board</a></p>
<p class="fine">{html.escape(self.skin.get('footer', ''))}</p>
</body></html>"""
        return page.encode()

    def _comment_divs(self) -> str:
        with self._lock:
            entries = list(self.comments)
        # submissions are echoed back unescaped on purpose: this is the
        # stored-XSS surface the narrative sells
        return "\n".join(
            f'<div class="comment" data-user="{html.escape(c.get("author", "anon"))}">'
            f'{c.get("text", "")}</div>'
            for c in entries)

    def _comments_page(self) -> bytes:
        return (f"""<html><head><title>comments</title></head><body>
<h1>customer comments</h1>{self._comment_divs()}
<form method="POST" action="/comments">
<input name="author" placeholder="name"><textarea name="text"></textarea>
<button>post</button></form>
</body></html>""").encode()

    def _board_page(self) -> bytes:
        rows = "\n".join(
            f"<tr><td>{html.escape(e.get('handle', ''))}</td>"
            f"<td>{html.escape(str(e.get('score', '')))}</td>"
            f"<td>{html.escape(e.get('note', ''))}</td></tr>"
            for e in self.peers.get("entries", []))
        return (f"""<html><head><title>{html.escape(self.peers.get('board', 'board'))}</title></head>
<body><h1>{html.escape(self.peers.get('board', 'board'))}</h1>
<table>{rows}</table></body></html>""").encode()

    def _admin_page(self) -> bytes:
        return (f"""<html><head><title>admin</title></head><body>
<h1>shop administration</h1>
<ul><li><a href="/admin/database.db">database.db</a> (customer export)</li>
<li><a href="/admin/notes.txt">operations notes</a></li></ul>
<pre>{html.escape(self.notes)}</pre>
</body></html>""").encode()

    def _login_failed_page(self) -> bytes:
        return (b"<html><body><p>invalid credentials.</p>"
                b"<p class='fine'>lockout after 25 attempts (disabled)</p></body></html>")


def _form(body: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for pair in body.split("&"):
        if "=" in pair:
            k, v = pair.split("=", 1)
            out[unquote_plus(k)] = unquote_plus(v)
    return out
