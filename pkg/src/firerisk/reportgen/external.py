"""HTTP completion backend and a local mock server for offline runs.

The backend POSTs ``{schema_version, findings, context}`` as JSON and expects
an operational-report JSON document back. The bearer token, if any, comes
from an environment variable.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

logger = logging.getLogger(__name__)


class BackendConfigError(RuntimeError):
    pass


class ExternalBackend:
    name = "external"

    def __init__(self, endpoint: str, token: str | None = None, timeout: float = 10.0,
                 retries: int = 1):
        if not endpoint:
            raise BackendConfigError("external backend needs an endpoint URL")
        self.endpoint, self.token, self.timeout, self.retries = endpoint, token, timeout, retries

    @classmethod
    def from_env(cls, endpoint_env: str = "FIRERISK_REPORT_ENDPOINT",
                 token_env: str = "FIRERISK_REPORT_TOKEN", timeout: float = 10.0) -> "ExternalBackend":
        endpoint = os.environ.get(endpoint_env, "").strip()
        if not endpoint:
            raise BackendConfigError(
                f"external backend selected but environment variable {endpoint_env} is not set")
        return cls(endpoint, os.environ.get(token_env) or None, timeout)

    def complete(self, request: dict) -> dict:
        body = json.dumps(request, sort_keys=True).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last: Exception | None = None
        for attempt in range(1 + self.retries):
            req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except (urllib.error.URLError, TimeoutError, OSError, json.JSONDecodeError) as exc:
                last = exc
                logger.warning("report backend attempt %d failed: %s", attempt + 1, exc)
        raise RuntimeError(f"report backend unavailable after {1 + self.retries} attempts: {last}")


class MockCompletionServer:
    """Serves a canned response (or the result of ``responder(request)``) on localhost.

    ``delay`` seconds of sleep before answering lets tests exercise timeouts;
    every received request body is kept in ``requests``.
    """

    def __init__(self, response: dict | None = None, responder=None, delay: float = 0.0,
                 status: int = 200):
        self.response, self.responder, self.delay, self.status = response, responder, delay, status
        self.requests: list[dict] = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802
                n = int(self.headers.get("Content-Length", 0))
                req = json.loads(self.rfile.read(n).decode("utf-8"))
                outer.requests.append({"body": req, "auth": self.headers.get("Authorization")})
                if outer.delay:
                    threading.Event().wait(outer.delay)
                doc = outer.responder(req) if outer.responder else outer.response
                data = json.dumps(doc).encode("utf-8")
                try:
                    self.send_response(outer.status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/complete"

    def __enter__(self) -> "MockCompletionServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()
