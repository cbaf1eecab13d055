import http.server
import threading

import pytest

from policy2label.categories import DataPracticeCategory
from policy2label.documents import Segment, Sentence


def make_sentences(texts):
    return [Sentence(index=i, text=t) for i, t in enumerate(texts)]


def make_segment(segment_id, text, categories=(), embedding=None):
    """One single-sentence segment with the given categories already set."""
    return Segment(
        segment_id=segment_id,
        sentence_indices=(segment_id,),
        sentences=(text,),
        embedding=embedding,
        categories={
            c if isinstance(c, DataPracticeCategory) else DataPracticeCategory(c)
            for c in categories
        },
    )


def make_segments(rows):
    """rows: iterable of (text, categories) in document order."""
    return [make_segment(i, text, cats) for i, (text, cats) in enumerate(rows)]


class _Handler(http.server.BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _respond(self):
        route = self.server.routes.get(self.path)
        self.server.requests.append(
            {
                "path": self.path,
                "method": self.command,
                "headers": dict(self.headers),
                "body": self.rfile.read(int(self.headers.get("Content-Length", 0) or 0)),
            }
        )
        if route is None:
            self.send_error(404)
            return
        status, content_type, body = route
        if callable(body):
            status, content_type, body = body(self.server.requests[-1])
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    do_GET = _respond
    do_POST = _respond


class LocalServer:
    """Tiny configurable HTTP server for fetch and completion-client tests."""

    def __init__(self):
        self._server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self._server.routes = {}
        self._server.requests = []
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def requests(self):
        return self._server.requests

    def url(self, path="/"):
        host, port = self._server.server_address
        return f"http://{host}:{port}{path}"

    def route(self, path, body, status=200, content_type="text/html"):
        """body: bytes, or a callable(request) -> (status, content_type, bytes)."""
        self._server.routes[path] = (status, content_type, body)

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def http_server():
    server = LocalServer()
    yield server
    server.close()
