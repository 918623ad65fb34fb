"""HTTP/1.1 + JSON API tying the platform together.

Handlers are reentrant and share one store handle; per-key write
serialization is the store's contract, the server adds no locking of its
own.  Every mutating request is durably committed before the response is
sent.  Serving an assignment reads the suggestion cache and never invokes
the recommender, which is what keeps request latency flat.

Endpoints (Authorization: Bearer <token> except signup/login):

    POST /api/auth/signup                     {username,password} -> {annotator_id}
    POST /api/auth/login                      {username,password} -> {token,role,expires_at}
    GET  /api/tasks                           -> {tasks:[{id,tagset}]}
    GET  /api/tasks/{task}/next               -> assignment with cached suggestion
    POST /api/tasks/{task}/annotations        {sentence_id,tags|matrix_language,feedback?} -> {version}
    GET  /api/tasks/{task}/history            -> latest annotations, newest first
    PUT  /api/tasks/{task}/annotations/{id}   {tags|matrix_language,feedback?} -> {version}
    POST /api/admin/upload                    CSV body -> import report
    GET  /api/admin/metrics?task=             -> corpus analytics
    GET  /api/admin/export?task=&min_cmi=&max_cmi=&min_kappa=&annotators= -> CSV
    GET  /api/admin/progress?task=            -> completion counts

Error bodies are structured: {"code", "message", "violations"?}.
"""
from __future__ import annotations

import json
import logging
import mimetypes
import re
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from io import StringIO
from pathlib import Path

from commentator import analytics
from commentator.config import Config
from commentator.domain import TASK_MLI, ValidationError
from commentator.storage import (
    AuthenticationError,
    DuplicateUsernameError,
    MalformedCsvError,
    Store,
    UnknownAnnotatorError,
    UnknownSentenceError,
    WeakPasswordError,
)

log = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, extra: dict | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.extra = extra or {}

    def body(self) -> dict:
        return {"code": self.code, "message": str(self), **self.extra}


class App:
    """Shared state behind the handler threads: config, store, engine."""

    def __init__(self, config: Config, store: Store | None = None, engine=None):
        self.config = config
        self.engine = engine if engine is not None else config.load_engine()
        self.store = store if store is not None else Store(config, owner=True)
        self.rec_config = config.recommender_config()
        self.tagsets = config.tagsets()
        self.task_order = ("lid", "pos", "mli")

    def require_task(self, task: str):
        if task not in self.tagsets:
            raise ApiError(404, "unknown-task", f"no task named {task!r}")
        return self.tagsets[task]


def _suggestion_body(sentence, task):
    if task == TASK_MLI:
        return None
    tags = sentence.preannotations.get(task)
    if tags is None:
        return None
    return {"task": task, "tags": list(tags)}


def _payload_from_body(task, body):
    if task == TASK_MLI:
        if "matrix_language" not in body:
            raise ApiError(422, "validation-failure", "missing field matrix_language",
                           {"violations": ["missing field: matrix_language"]})
        return body["matrix_language"]
    if "tags" not in body:
        raise ApiError(422, "validation-failure", "missing field tags",
                       {"violations": ["missing field: tags"]})
    return body["tags"]


def _history_body(task, entries):
    key = "matrix_language" if task == TASK_MLI else "tags"
    return [{
        "sentence_id": entry.sentence_id,
        "text": entry.text,
        key: entry.payload,
        "timestamp": entry.timestamp,
        "version": entry.version,
    } for entry in entries]


class Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "commentator"

    # -- plumbing -----------------------------------------------------------

    @property
    def app(self) -> App:
        return self.server.app

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.address_string(), *args)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _read_json(self) -> dict:
        raw = self._read_body()
        try:
            body = json.loads(raw.decode("utf-8")) if raw else {}
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise ApiError(400, "bad-request", "request body is not valid JSON") from None
        if not isinstance(body, dict):
            raise ApiError(400, "bad-request", "request body must be a JSON object")
        return body

    def _send(self, status: int, payload: bytes, content_type: str):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, document):
        self._send(status, json.dumps(document).encode("utf-8"),
                   "application/json; charset=utf-8")

    def _session(self):
        header = self.headers.get("Authorization") or ""
        if not header.startswith("Bearer "):
            raise ApiError(401, "unauthorized", "missing bearer token")
        session = self.app.store.session(header[len("Bearer "):].strip())
        if session is None:
            raise ApiError(401, "unauthorized", "invalid or expired token")
        return session

    def _admin_session(self):
        session = self._session()
        if session.role != "admin":
            raise ApiError(403, "forbidden", "admin role required")
        return session

    def _query(self) -> dict:
        parsed = urllib.parse.urlparse(self.path)
        return {k: v[-1] for k, v in urllib.parse.parse_qs(parsed.query).items()}

    # -- dispatch -----------------------------------------------------------

    ROUTES = (
        ("POST", re.compile(r"/api/auth/signup$"), "handle_signup"),
        ("POST", re.compile(r"/api/auth/login$"), "handle_login"),
        ("GET", re.compile(r"/api/tasks$"), "handle_tasks"),
        ("GET", re.compile(r"/api/tasks/(?P<task>[^/]+)/next$"), "handle_next"),
        ("POST", re.compile(r"/api/tasks/(?P<task>[^/]+)/annotations$"), "handle_submit"),
        ("GET", re.compile(r"/api/tasks/(?P<task>[^/]+)/history$"), "handle_history"),
        ("PUT", re.compile(r"/api/tasks/(?P<task>[^/]+)/annotations/(?P<sentence_id>\d+)$"),
         "handle_edit"),
        ("POST", re.compile(r"/api/admin/upload$"), "handle_upload"),
        ("GET", re.compile(r"/api/admin/metrics$"), "handle_metrics"),
        ("GET", re.compile(r"/api/admin/export$"), "handle_export"),
        ("GET", re.compile(r"/api/admin/progress$"), "handle_progress"),
    )

    def _dispatch(self, method: str):
        path = urllib.parse.urlparse(self.path).path
        try:
            for route_method, pattern, name in self.ROUTES:
                if route_method != method:
                    continue
                match = pattern.fullmatch(path)
                if match:
                    getattr(self, name)(**match.groupdict())
                    return
            if method == "GET" and not path.startswith("/api/"):
                self._serve_static(path)
                return
            raise ApiError(404, "not-found", f"no route for {method} {path}")
        except ApiError as exc:
            self._send_json(exc.status, exc.body())
        except ValidationError as exc:
            self._send_json(422, {"code": "validation-failure", "message": str(exc),
                                  "violations": exc.violations})
        except UnknownSentenceError as exc:
            self._send_json(404, {"code": "unknown-sentence", "message": str(exc)})
        except UnknownAnnotatorError as exc:
            self._send_json(404, {"code": "unknown-annotator", "message": str(exc)})
        except AuthenticationError:
            self._send_json(401, {"code": "authentication-failure",
                                  "message": "invalid username or password"})
        except DuplicateUsernameError as exc:
            self._send_json(409, {"code": "duplicate-username", "message": str(exc)})
        except WeakPasswordError as exc:
            self._send_json(422, {"code": "weak-password", "message": str(exc)})
        except MalformedCsvError as exc:
            self._send_json(400, {"code": "malformed-csv", "message": str(exc),
                                  "report": exc.report.as_dict()})
        except analytics.InvalidFilterError as exc:
            self._send_json(400, {"code": "invalid-filter", "message": str(exc)})
        except BrokenPipeError:
            raise
        except Exception:
            log.exception("unhandled error serving %s %s", method, path)
            self._send_json(500, {"code": "internal-error", "message": "internal error"})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_PUT(self):
        self._dispatch("PUT")

    # -- auth ---------------------------------------------------------------

    def handle_signup(self):
        body = self._read_json()
        username = str(body.get("username") or "")
        password = str(body.get("password") or "")
        annotator_id = self.app.store.create_account(username, password, role="annotator")
        self._send_json(200, {"annotator_id": annotator_id})

    def handle_login(self):
        body = self._read_json()
        account = self.app.store.authenticate(str(body.get("username") or ""),
                                              str(body.get("password") or ""))
        session = self.app.store.create_session(account.annotator_id, account.role)
        self._send_json(200, {"token": session.token, "role": session.role,
                              "expires_at": session.expires_at})

    # -- annotator panel ----------------------------------------------------

    def handle_tasks(self):
        self._session()
        tasks = [{"id": task, "tagset": list(self.app.tagsets[task].tags)}
                 for task in self.app.task_order]
        self._send_json(200, {"tasks": tasks})

    def handle_next(self, task: str):
        session = self._session()
        self.app.require_task(task)
        sentence = self.app.store.next_unannotated(session.annotator_id, task)
        if sentence is None:
            self._send_json(200, {"done": True})
            return
        self._send_json(200, {
            "sentence": {"id": sentence.id, "text": sentence.text,
                         "tokens": sentence.surfaces},
            "suggestion": _suggestion_body(sentence, task),
            "done": False,
        })

    def handle_submit(self, task: str):
        session = self._session()
        self.app.require_task(task)
        body = self._read_json()
        if "sentence_id" not in body:
            raise ApiError(422, "validation-failure", "missing field sentence_id",
                           {"violations": ["missing field: sentence_id"]})
        version = self.app.store.save_annotation(
            session.annotator_id, task, int(body["sentence_id"]),
            _payload_from_body(task, body), feedback=body.get("feedback"))
        self._send_json(200, {"version": version})

    def handle_history(self, task: str):
        session = self._session()
        self.app.require_task(task)
        entries = self.app.store.history(session.annotator_id, task)
        self._send_json(200, _history_body(task, entries))

    def handle_edit(self, task: str, sentence_id: str):
        session = self._session()
        self.app.require_task(task)
        sid = int(sentence_id)
        if not self.app.store.has_annotation(session.annotator_id, task, sid):
            raise ApiError(404, "not-annotated",
                           f"sentence {sid} has no prior {task} annotation to edit")
        body = self._read_json()
        version = self.app.store.save_annotation(
            session.annotator_id, task, sid,
            _payload_from_body(task, body), feedback=body.get("feedback"))
        self._send_json(200, {"version": version})

    # -- admin panel ----------------------------------------------------------

    def handle_upload(self):
        self._admin_session()
        raw = self._read_body()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ApiError(400, "malformed-csv", "upload body is not valid UTF-8") from None
        report = self.app.store.import_sentences(StringIO(text), self.app.engine,
                                                 self.app.rec_config)
        self._send_json(200, report.as_dict())

    def _query_task(self, query) -> str:
        task = query.get("task")
        if not task:
            raise ApiError(400, "bad-request", "missing required query parameter: task")
        self.app.require_task(task)
        return task

    def handle_metrics(self):
        self._admin_session()
        query = self._query()
        task = self._query_task(query)
        store = self.app.store
        counts, corpus_size = store.progress(task)
        document = analytics.build_corpus_analytics(
            task,
            store.latest_annotations(task),
            store.latest_annotations("lid"),
            counts,
            corpus_size,
        )
        self._send_json(200, document.as_dict())

    def handle_export(self):
        self._admin_session()
        query = self._query()
        task = self._query_task(query)
        filters = build_filters(self.app.store, task, query)
        body = self.app.store.export_csv(filters).encode("utf-8")
        self._send(200, body, "text/csv; charset=utf-8")

    def handle_progress(self):
        self._admin_session()
        task = self._query_task(self._query())
        counts, corpus_size = self.app.store.progress(task)
        self._send_json(200, {"counts": {str(k): v for k, v in counts.items()},
                              "corpus_size": corpus_size})

    # -- static web UI --------------------------------------------------------

    def _serve_static(self, path: str):
        static_dir = self.app.config.static_dir
        if not static_dir:
            raise ApiError(404, "not-found", "no web UI bundle configured")
        root = Path(static_dir).resolve()
        relative = urllib.parse.unquote(path).lstrip("/") or "index.html"
        target = (root / relative).resolve()
        if root not in target.parents and target != root:
            raise ApiError(404, "not-found", "no such file")
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            # Unknown non-API paths fall back to the SPA entry point.
            target = root / "index.html"
            if not target.is_file():
                raise ApiError(404, "not-found", "no such file")
        content_type = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), content_type)


def build_filters(store: Store, task: str, query: dict) -> analytics.ExportFilters:
    """Export filter predicates from query parameters / CLI flags."""
    def parse_float(name):
        value = query.get(name)
        if value in (None, ""):
            return None
        try:
            return float(value)
        except ValueError:
            raise analytics.InvalidFilterError(f"{name} must be a number") from None

    annotator_ids = None
    raw = query.get("annotators")
    if raw:
        annotator_ids = set()
        for item in raw.split(","):
            item = item.strip()
            if not item:
                continue
            resolved = store.find_annotator_id(item)
            if resolved is None:
                raise analytics.InvalidFilterError(f"unknown annotator: {item!r}")
            annotator_ids.add(resolved)
        annotator_ids = frozenset(annotator_ids)

    return analytics.ExportFilters(
        task=task,
        min_cmi=parse_float("min_cmi"),
        max_cmi=parse_float("max_cmi"),
        min_kappa=parse_float("min_kappa"),
        annotator_ids=annotator_ids,
    )


class CommentatorServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, app: App):
        super().__init__(address, Handler)
        self.app = app


def make_server(app: App, host: str = "", port: int | None = None) -> CommentatorServer:
    if port is None:
        port = app.config.port
    return CommentatorServer((host, port), app)


def serve_forever(app: App, host: str = "", port: int | None = None):
    server = make_server(app, host, port)
    log.info("serving on port %d (db: %s)", server.server_address[1], app.config.db_path)
    try:
        server.serve_forever()
    finally:
        server.server_close()
