"""HTTP API over the pipeline: one endpoint per librarian action.

Plain stdlib threading server; every response body is JSON and every error
body carries {code, message, stage?}. CORS is wide open because the review
console runs in a browser against this service.
"""

from __future__ import annotations

import json
import re
import signal
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import (
    ConfigError,
    InputError,
    NotFoundError,
    RevisionConflictError,
    SrkitError,
    StageError,
    UnknownReferenceError,
)
from .pipeline import Pipeline, PipelineConfig
from .sessions import (
    FeedbackEvent,
    evaluate,
    refine_and_rerun,
    session_to_dict,
)

_ROUTES = [
    ("GET", re.compile(r"^/healthz$"), "healthz"),
    ("POST", re.compile(r"^/sessions$"), "create_session"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[\w-]+)$"), "get_session"),
    ("POST", re.compile(r"^/sessions/(?P<sid>[\w-]+)/refine$"), "refine"),
    ("POST", re.compile(r"^/sessions/(?P<sid>[\w-]+)/feedback$"), "feedback"),
    ("GET", re.compile(r"^/sessions/(?P<sid>[\w-]+)/metrics$"), "metrics"),
    ("GET", re.compile(r"^/articles/(?P<pmid>\d+)$"), "article"),
]


def _session_body(session) -> dict:
    body = session_to_dict(session)
    body["feedback"] = [
        {
            "pmid": e.pmid,
            "verdict": e.verdict,
            "comment": e.comment,
            "timestamp": e.timestamp.isoformat(),
            "actor": e.actor,
        }
        for e in session.feedback
    ]
    return body


class ReviewService:
    """Wires a Pipeline into the JSON API and owns the listening socket."""

    def __init__(self, config: PipelineConfig, host: str = "127.0.0.1", port: int = 8080):
        self.pipeline = Pipeline(config)
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> "ReviewService":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        """Blocking serve with graceful SIGINT/SIGTERM shutdown."""
        def _stop(signum, frame):
            threading.Thread(target=self.httpd.shutdown).start()

        signal.signal(signal.SIGINT, _stop)
        signal.signal(signal.SIGTERM, _stop)
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10)

    # --- handlers ----------------------------------------------------------

    def healthz(self, params, body):
        return 200, {"status": "ok"}

    def create_session(self, params, body):
        question = (body or {}).get("question", "")
        session = self.pipeline.run(question)
        return 201, _session_body(session)

    def get_session(self, params, body):
        session = self.pipeline.store.load_session(params["sid"])
        return 200, _session_body(session)

    def refine(self, params, body):
        body = body or {}
        session = refine_and_rerun(
            self.pipeline.store,
            params["sid"],
            body.get("edits", []),
            self.pipeline,
            expected_revision=body.get("revision"),
        )
        return 200, _session_body(session)

    def feedback(self, params, body):
        body = body or {}
        session_id = params["sid"]
        current = self.pipeline.store.load_session(session_id)
        expected = body.get("revision")
        if expected is not None and expected != current.revision:
            raise RevisionConflictError(session_id, expected, current.revision)
        event = FeedbackEvent(
            pmid=str(body.get("pmid", "")),
            verdict=body.get("verdict", ""),
            comment=body.get("comment", ""),
            actor=body.get("actor", "librarian"),
        )
        session = self.pipeline.store.record_feedback(
            session_id, event, force=bool(body.get("force"))
        )
        return 200, _session_body(session)

    def metrics(self, params, body):
        session = self.pipeline.store.load_session(params["sid"])
        k = int(params.get("k", "10"))
        m = evaluate(session.hits, session.sentinel_pmids, k)
        return 200, m.to_dict()

    def article(self, params, body):
        records, unknown = self.pipeline.pubmed.efetch([params["pmid"]])
        if unknown or not records:
            raise NotFoundError(f"unknown pmid {params['pmid']}")
        return 200, records[0].to_dict()


def _error_payload(exc: Exception) -> tuple[int, dict]:
    if isinstance(exc, RevisionConflictError):
        return 409, {"code": "revision_conflict", "message": str(exc)}
    if isinstance(exc, NotFoundError):
        return 404, {"code": "not_found", "message": str(exc)}
    if isinstance(exc, UnknownReferenceError):
        return 422, {"code": "unknown_reference", "message": str(exc)}
    if isinstance(exc, StageError):
        return 502, {"code": "stage_failure", "message": str(exc.cause), "stage": exc.stage}
    if isinstance(exc, (InputError, ConfigError)):
        return 400, {"code": "input_error", "message": str(exc)}
    if isinstance(exc, SrkitError):
        return 500, {"code": "internal_error", "message": str(exc)}
    return 500, {"code": "internal_error", "message": f"{type(exc).__name__}: {exc}"}


def _make_handler(service: ReviewService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send(self, status: int, payload: dict) -> None:
            data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(data)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header(
                "Access-Control-Allow-Headers", "Content-Type, Authorization"
            )
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.end_headers()
            self.wfile.write(data)

        def _dispatch(self, method: str) -> None:
            path, _, query = self.path.partition("?")
            params: dict[str, str] = {}
            for pair in query.split("&"):
                if "=" in pair:
                    key, _, value = pair.partition("=")
                    params[key] = value
            body = None
            length = int(self.headers.get("Content-Length") or 0)
            if length:
                try:
                    body = json.loads(self.rfile.read(length).decode("utf-8"))
                except ValueError:
                    self._send(400, {"code": "input_error", "message": "invalid JSON body"})
                    return
            for route_method, pattern, name in _ROUTES:
                match = pattern.match(path)
                if match and route_method == method:
                    params.update(match.groupdict())
                    try:
                        status, payload = getattr(service, name)(params, body)
                    except Exception as e:  # noqa: BLE001 - mapped to JSON error body
                        status, payload = _error_payload(e)
                    self._send(status, payload)
                    return
                if match:
                    self._send(405, {"code": "method_not_allowed", "message": method})
                    return
            self._send(404, {"code": "not_found", "message": f"no route for {path}"})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_OPTIONS(self):
            self._send(200, {})

    return Handler


def serve(config: PipelineConfig, bind: str = "127.0.0.1:8080") -> ReviewService:
    """Build a service bound to ``host:port`` (port 0 picks a free port)."""
    host, _, port_text = bind.partition(":")
    try:
        port = int(port_text or "8080")
    except ValueError as e:
        raise ConfigError(f"bad bind address {bind!r}") from e
    return ReviewService(config, host=host or "127.0.0.1", port=port)
