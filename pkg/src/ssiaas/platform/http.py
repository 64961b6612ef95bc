"""JSON-over-HTTP front end for the gateway, and a matching client transport.

``POST /api/route`` takes a gateway request object and returns the response
envelope. ``GET /api/health`` reports liveness. Any gateway error is a normal
200 response with ``"ok": false``; HTTP errors mean the request never reached
the gateway.
"""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from ssiaas.errors import BadRequest, RegistryUnreachable
from ssiaas.platform.gateway import unwrap

MAX_BODY = 4 * 1024 * 1024


def _handler_for(platform):
    class Handler(BaseHTTPRequestHandler):
        server_version = "ssiaas/1"

        def _reply(self, status: int, body: Any) -> None:
            data = json.dumps(body, sort_keys=True).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self) -> None:  # noqa: N802
            if self.path == "/api/health":
                self._reply(200, {"ok": True, "services": len(platform.services), "tick": platform.clock.now})
            else:
                self._reply(404, {"ok": False, "error": BadRequest("no such path").to_wire()})

        def do_POST(self) -> None:  # noqa: N802
            if self.path != "/api/route":
                self._reply(404, {"ok": False, "error": BadRequest("no such path").to_wire()})
                return
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_BODY:
                self._reply(413, {"ok": False, "error": BadRequest("request too large").to_wire()})
                return
            try:
                request = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError as exc:
                self._reply(400, {"ok": False, "error": BadRequest(f"invalid JSON: {exc}").to_wire()})
                return
            if not isinstance(request, dict):
                self._reply(400, {"ok": False, "error": BadRequest("request must be an object").to_wire()})
                return
            self._reply(200, platform.gateway.route(request))

        def log_message(self, format: str, *args: Any) -> None:  # requests are already in the monitor
            pass

    return Handler


class PlatformServer:
    """Threaded HTTP server around a platform; usable as a context manager."""

    def __init__(self, platform, host: str = "127.0.0.1", port: int = 0) -> None:
        self.platform = platform
        self.httpd = ThreadingHTTPServer((host, port), _handler_for(platform))
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "PlatformServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> "PlatformServer":
        return self.start()

    def __exit__(self, *exc: Any) -> None:
        self.stop()


class HttpTransport:
    """Client transport with the same ``call`` signature as the in-process one."""

    def __init__(self, base_url: str, token: str | None = None, timeout: float = 10.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout

    def route(self, request: dict) -> dict:
        body = json.dumps(request).encode()
        req = urllib.request.Request(f"{self.base_url}/api/route", data=body,
                                     headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            return json.loads(exc.read() or b"{}") or {"ok": False, "error": BadRequest(str(exc)).to_wire()}
        except (urllib.error.URLError, OSError) as exc:
            raise RegistryUnreachable(f"platform at {self.base_url} is unreachable: {exc}") from exc

    def call(self, channel: str, target: str, operation: str, payload: dict | None = None,
             token: str | None = None) -> Any:
        request = {"channel": channel, "target": target, "operation": operation, "payload": payload or {},
                   "token": token or self.token}
        return unwrap(self.route(request))
