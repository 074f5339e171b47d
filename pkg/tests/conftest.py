"""Shared fixtures: document builders and a scriptable chat-completions stub."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from cogspan.corpus import Document, DocumentMeta, SessionKind

META = DocumentMeta(participant="P01", session_kind=SessionKind.ZOOM_TRAINING, session_index=1)


def make_doc(doc_id: str, text: str) -> Document:
    return Document(id=doc_id, text=text, meta=META)


class StubEndpoint:
    """In-process chat-completions server with scripted per-input behavior.

    A route maps the user-message content to a plan: a list whose entries are
    consumed one request at a time (the last entry repeats). Entries:
      str            -> HTTP 200 with that completion content
      int            -> that HTTP status with an empty body
      ("raw", bytes) -> HTTP 200 with a verbatim, non-completion body
      ("slow", sec)  -> sleep, then HTTP 200 with empty-array content
    Unrouted inputs get a 200 with "[]".
    """

    def __init__(self):
        self.routes: dict[str, list] = {}
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None

    def route(self, user_content: str, *plan) -> None:
        self.routes[user_content] = list(plan)

    def _next_step(self, user_content: str):
        with self._lock:
            plan = self.routes.get(user_content)
            if not plan:
                return "[]"
            return plan.pop(0) if len(plan) > 1 else plan[0]

    @property
    def base_url(self) -> str:
        assert self._server is not None
        return f"http://127.0.0.1:{self._server.server_address[1]}"

    def start(self) -> "StubEndpoint":
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                with stub._lock:
                    stub.requests.append(
                        {"path": self.path, "body": body, "auth": self.headers.get("Authorization")}
                    )
                user = body["messages"][1]["content"]
                step = stub._next_step(user)
                if isinstance(step, int):
                    self.send_response(step)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                if isinstance(step, tuple) and step[0] == "raw":
                    payload = step[1]
                    self.send_response(200)
                    self.send_header("Content-Length", str(len(payload)))
                    self.end_headers()
                    self.wfile.write(payload)
                    return
                if isinstance(step, tuple) and step[0] == "slow":
                    time.sleep(step[1])
                    step = "[]"
                payload = json.dumps(
                    {"choices": [{"message": {"content": step}}]}
                ).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.02}, daemon=True
        ).start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None


@pytest.fixture
def stub_endpoint():
    stub = StubEndpoint().start()
    yield stub
    stub.stop()
