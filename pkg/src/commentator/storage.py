"""Durable persistence: sentences, versioned annotations, accounts,
sessions, and CSV import/export.

The store is an embedded SQLite database in write-ahead-log mode with
full synchronous commits, so an acknowledged save survives a process
kill.  Edits never overwrite: every save appends a new version and
exports read the latest one.  A ``lock`` file makes `serve` and `import`
mutually exclusive (single writing owner); read-mostly invocations such
as export and report open the same files without the lock and see
consistent snapshots.
"""
from __future__ import annotations

import csv
import fcntl
import hashlib
import hmac
import io
import json
import logging
import secrets
import sqlite3
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from commentator import analytics
from commentator.config import Config
from commentator.domain import (
    TASK_LID,
    TASK_MLI,
    TASKS,
    TOKEN_TASKS,
    AnnotatorAccount,
    Feedback,
    MatrixAnnotation,
    Sentence,
    TokenAnnotation,
    ValidationError,
    utc_now_rfc3339,
    validate_annotation,
)
from commentator.preannotation import PreannotationEngine, RecommenderConfig, recommend

log = logging.getLogger(__name__)

IMPORT_COMMIT_CHUNK = 200
PBKDF2_ITERATIONS = 60_000
MIN_PASSWORD_LENGTH = 8
ROLES = ("annotator", "admin")

TOKEN_EXPORT_COLUMNS = ("sentence_id", "token_index", "token", "tag",
                        "annotator_id", "version", "timestamp", "feedback")
MLI_EXPORT_COLUMNS = ("sentence_id", "text", "matrix_language",
                      "annotator_id", "version", "timestamp", "feedback")

_SCHEMA = """
CREATE TABLE IF NOT EXISTS sentences (
    id INTEGER PRIMARY KEY,
    text TEXT NOT NULL,
    tokens TEXT NOT NULL,
    preannotations TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS annotations (
    annotator_id INTEGER NOT NULL,
    task TEXT NOT NULL,
    sentence_id INTEGER NOT NULL,
    version INTEGER NOT NULL,
    payload TEXT NOT NULL,
    feedback TEXT,
    timestamp TEXT NOT NULL,
    PRIMARY KEY (annotator_id, task, sentence_id, version)
);
CREATE INDEX IF NOT EXISTS idx_annotations_task
    ON annotations (task, sentence_id, annotator_id);
CREATE TABLE IF NOT EXISTS accounts (
    annotator_id INTEGER PRIMARY KEY AUTOINCREMENT,
    username TEXT NOT NULL UNIQUE,
    credential TEXT NOT NULL,
    role TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    annotator_id INTEGER NOT NULL,
    role TEXT NOT NULL,
    expires_at TEXT NOT NULL
);
"""


class StoreError(Exception):
    """Base class for persistence faults."""


class StoreLockedError(StoreError):
    """Another process owns the store's write lock."""


class UnknownSentenceError(StoreError):
    pass


class UnknownAnnotatorError(StoreError):
    pass


class DuplicateUsernameError(StoreError):
    pass


class WeakPasswordError(StoreError):
    pass


class AuthenticationError(StoreError):
    """Login failure; deliberately identical for bad user and bad password."""


class MalformedCsvError(StoreError):
    """CSV import aborted; rows committed before the fault are reported."""

    def __init__(self, message: str, report: "ImportReport"):
        super().__init__(message)
        self.report = report


@dataclass
class ImportReport:
    inserted: int = 0
    skipped_duplicates: int = 0
    rejected: list = None

    def __post_init__(self):
        if self.rejected is None:
            self.rejected = []

    def as_dict(self) -> dict:
        return {
            "inserted": self.inserted,
            "skipped_duplicates": self.skipped_duplicates,
            "rejected": [[row, reason] for row, reason in self.rejected],
        }


@dataclass(frozen=True)
class Session:
    """A login session; expired tokens authorize nothing."""

    token: str
    annotator_id: int
    role: str
    expires_at: str

    @property
    def expired(self) -> bool:
        return self.expires_at <= utc_now_rfc3339()


@dataclass(frozen=True)
class HistoryEntry:
    sentence_id: int
    text: str
    payload: object  # tag list for token tasks, matrix language for mli
    timestamp: str
    version: int


def _quotes_balanced(text: str) -> bool:
    """RFC 4180 quote balance: the stream must end outside any quoted
    field.  The csv module silently swallows everything after an
    unterminated quote instead of failing, so this is checked up front."""
    in_quotes = False
    i = 0
    while i < len(text):
        if text[i] == '"':
            if in_quotes and text[i + 1:i + 2] == '"':
                i += 2
                continue
            in_quotes = not in_quotes
        i += 1
    return not in_quotes


def _ms_to_rfc3339(ms: int) -> str:
    secs, msec = divmod(ms, 1000)
    dt = datetime.fromtimestamp(secs, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{msec:03d}Z"


def _rfc3339_to_ms(value: str) -> int:
    dt = datetime.strptime(value, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


def hash_password(password: str) -> str:
    salt = secrets.token_bytes(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt,
                                 PBKDF2_ITERATIONS)
    return f"pbkdf2_sha256${PBKDF2_ITERATIONS}${salt.hex()}${digest.hex()}"


def verify_password(password: str, credential: str) -> bool:
    try:
        _, iterations, salt_hex, digest_hex = credential.split("$")
        digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"),
                                     bytes.fromhex(salt_hex), int(iterations))
        return hmac.compare_digest(digest.hex(), digest_hex)
    except (ValueError, TypeError):
        return False


# A fixed credential compared against when the username is unknown, so
# authentication failures take the same time either way.
_DUMMY_CREDENTIAL = hash_password("*")


class Store:
    """One data directory: SQLite database plus lock and config files.

    A single connection guarded by a re-entrant lock serializes access
    from any number of threads; writes to the same annotation key resolve
    into distinct consecutive versions.  Timestamps are server-assigned
    UTC (RFC 3339, millisecond precision) and strictly increase per
    store, so history order is total and never trusts client clocks.
    """

    def __init__(self, config: Config, *, owner: bool = False):
        self.config = config
        self.tagsets = config.tagsets()
        self._lock = threading.RLock()
        self._lock_file = None
        if owner:
            config.db_dir.mkdir(parents=True, exist_ok=True)
            self._acquire_dir_lock()
        elif not config.db_path.exists():
            raise StoreError(f"no store at {config.db_path} (run import or serve first)")
        self._conn = sqlite3.connect(str(config.db_path), check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=FULL")
        self._conn.execute("PRAGMA busy_timeout=10000")
        self._conn.executescript(_SCHEMA)
        self._conn.commit()
        self._last_ts_ms = self._load_last_timestamp()

    def _acquire_dir_lock(self):
        lock_path = self.config.db_dir / "lock"
        handle = open(lock_path, "a+")
        try:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            handle.close()
            raise StoreLockedError(
                f"store {self.config.db_dir} is locked by another process "
                "(is the server running?)") from None
        self._lock_file = handle

    def _load_last_timestamp(self) -> int:
        row = self._conn.execute("SELECT MAX(timestamp) AS ts FROM annotations").fetchone()
        return _rfc3339_to_ms(row["ts"]) if row["ts"] else 0

    def _next_timestamp(self) -> str:
        now_ms = int(time.time() * 1000)
        self._last_ts_ms = max(now_ms, self._last_ts_ms + 1)
        return _ms_to_rfc3339(self._last_ts_ms)

    def close(self):
        with self._lock:
            self._conn.close()
            if self._lock_file is not None:
                fcntl.flock(self._lock_file.fileno(), fcntl.LOCK_UN)
                self._lock_file.close()
                self._lock_file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- sentences ---------------------------------------------------------

    def import_sentences(self, stream, engine: PreannotationEngine,
                         rec_config: RecommenderConfig | None = None) -> ImportReport:
        """Import a UTF-8 CSV with a mandatory ``text`` column and optional
        ``id`` column.

        Each valid row becomes a sentence with tokens and suggestion
        caches computed up front.  Duplicate ids are skipped (idempotent
        re-import), empty texts are rejected with row numbers, and a
        malformed stream aborts with the rows committed so far reported
        in the raised error.
        """
        rec_config = rec_config or self.config.recommender_config()
        report = ImportReport()
        text_stream = stream.read()
        if not _quotes_balanced(text_stream):
            raise MalformedCsvError("unbalanced quotes in CSV stream", report)
        reader = csv.DictReader(io.StringIO(text_stream))
        with self._lock:
            try:
                fieldnames = reader.fieldnames
            except csv.Error as exc:
                raise MalformedCsvError(f"unreadable CSV header: {exc}", report) from exc
            if fieldnames is None or "text" not in fieldnames:
                raise MalformedCsvError("CSV header must contain a 'text' column", report)

            existing = {row["id"] for row in self._conn.execute("SELECT id FROM sentences")}
            next_id = max(existing, default=0) + 1
            pending = 0
            row_number = 0
            try:
                while True:
                    try:
                        row = next(reader)
                    except StopIteration:
                        break
                    row_number += 1
                    raw_id = (row.get("id") or "").strip()
                    text = (row.get("text") or "").strip()
                    if raw_id:
                        try:
                            sentence_id = int(raw_id)
                        except ValueError:
                            report.rejected.append((row_number, "invalid-id"))
                            continue
                        if sentence_id <= 0:
                            report.rejected.append((row_number, "invalid-id"))
                            continue
                    else:
                        sentence_id = next_id
                    if sentence_id in existing:
                        report.skipped_duplicates += 1
                        continue
                    if not text:
                        report.rejected.append((row_number, "empty-text"))
                        continue

                    sentence = Sentence.create(sentence_id, text,
                                               created_at=utc_now_rfc3339())
                    caches = {
                        task: list(recommend(sentence, task, rec_config, engine).tags)
                        for task in TOKEN_TASKS
                    }
                    self._conn.execute(
                        "INSERT INTO sentences (id, text, tokens, preannotations, created_at) "
                        "VALUES (?, ?, ?, ?, ?)",
                        (sentence.id, sentence.text, json.dumps(sentence.surfaces),
                         json.dumps(caches), sentence.created_at))
                    existing.add(sentence_id)
                    next_id = max(next_id, sentence_id) + 1
                    report.inserted += 1
                    pending += 1
                    if pending >= IMPORT_COMMIT_CHUNK:
                        self._conn.commit()
                        pending = 0
            except csv.Error as exc:
                self._conn.commit()
                raise MalformedCsvError(f"malformed CSV row: {exc}", report) from exc
            self._conn.commit()
        log.info("imported %d sentences (%d duplicates skipped, %d rejected)",
                 report.inserted, report.skipped_duplicates, len(report.rejected))
        return report

    def _sentence_from_row(self, row) -> Sentence:
        return Sentence.create(
            row["id"], row["text"],
            preannotations=json.loads(row["preannotations"]),
            created_at=row["created_at"])

    def sentence(self, sentence_id: int) -> Sentence:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM sentences WHERE id = ?", (sentence_id,)).fetchone()
        if row is None:
            raise UnknownSentenceError(f"no sentence with id {sentence_id}")
        return self._sentence_from_row(row)

    def sentences(self) -> list[Sentence]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM sentences ORDER BY id").fetchall()
        return [self._sentence_from_row(row) for row in rows]

    def sentence_count(self) -> int:
        with self._lock:
            row = self._conn.execute("SELECT COUNT(*) AS n FROM sentences").fetchone()
        return row["n"]

    def next_unannotated(self, annotator_id: int, task: str) -> Sentence | None:
        """Lowest-id sentence without any version by this annotator for
        this task; every annotator traverses the whole corpus."""
        with self._lock:
            row = self._conn.execute(
                "SELECT s.* FROM sentences s WHERE NOT EXISTS ("
                "  SELECT 1 FROM annotations a WHERE a.annotator_id = ? AND a.task = ?"
                "  AND a.sentence_id = s.id) ORDER BY s.id LIMIT 1",
                (annotator_id, task)).fetchone()
        return self._sentence_from_row(row) if row is not None else None

    def refresh_preannotations(self, engine: PreannotationEngine,
                               rec_config: RecommenderConfig | None = None) -> int:
        """Recompute and cache suggestions for every sentence; idempotent
        in local mode.  Returns the number of sentences cached."""
        rec_config = rec_config or self.config.recommender_config()
        count = 0
        with self._lock:
            for sentence in self.sentences():
                caches = {
                    task: list(recommend(sentence, task, rec_config, engine).tags)
                    for task in TOKEN_TASKS
                }
                self._conn.execute(
                    "UPDATE sentences SET preannotations = ? WHERE id = ?",
                    (json.dumps(caches), sentence.id))
                count += 1
            self._conn.commit()
        return count

    # -- annotations -------------------------------------------------------

    def _require_annotator(self, annotator_id: int):
        row = self._conn.execute(
            "SELECT annotator_id FROM accounts WHERE annotator_id = ?",
            (annotator_id,)).fetchone()
        if row is None:
            raise UnknownAnnotatorError(f"no annotator with id {annotator_id}")

    def save_annotation(self, annotator_id: int, task: str, sentence_id: int,
                        payload, feedback: str | None = None) -> int:
        """Append a new version for (annotator, task, sentence); returns the
        new version number (1 for the first save).

        The payload is validated against the sentence and tagset before
        any state changes; the commit is durable before this returns.
        """
        if task not in TASKS:
            raise ValidationError([f"unknown task: {task!r}"])
        with self._lock:
            self._require_annotator(annotator_id)
            sentence = self.sentence(sentence_id)
            tagset = self.tagsets[task]
            if task == TASK_MLI:
                if not isinstance(payload, str):
                    raise ValidationError(["matrix_language must be a single tag string"])
                annotation = MatrixAnnotation(sentence_id=sentence_id,
                                              annotator_id=annotator_id,
                                              matrix_language=payload)
            else:
                if not isinstance(payload, (list, tuple)) or not all(
                        isinstance(t, str) for t in payload):
                    raise ValidationError(["tags must be a list of tag strings"])
                annotation = TokenAnnotation(sentence_id=sentence_id,
                                             annotator_id=annotator_id,
                                             task=task, tags=tuple(payload))
            violations = validate_annotation(annotation, sentence, tagset)
            if violations:
                raise ValidationError(violations)
            if feedback is not None:
                feedback = feedback.strip()
                if not feedback:
                    feedback = None

            row = self._conn.execute(
                "SELECT COALESCE(MAX(version), 0) AS v FROM annotations "
                "WHERE annotator_id = ? AND task = ? AND sentence_id = ?",
                (annotator_id, task, sentence_id)).fetchone()
            version = row["v"] + 1
            self._conn.execute(
                "INSERT INTO annotations (annotator_id, task, sentence_id, version, "
                "payload, feedback, timestamp) VALUES (?, ?, ?, ?, ?, ?, ?)",
                (annotator_id, task, sentence_id, version,
                 json.dumps(payload if task == TASK_MLI else list(payload)),
                 feedback, self._next_timestamp()))
            self._conn.commit()
        return version

    def has_annotation(self, annotator_id: int, task: str, sentence_id: int) -> bool:
        with self._lock:
            row = self._conn.execute(
                "SELECT 1 FROM annotations WHERE annotator_id = ? AND task = ? "
                "AND sentence_id = ? LIMIT 1",
                (annotator_id, task, sentence_id)).fetchone()
        return row is not None

    _LATEST_SQL = (
        "SELECT a.annotator_id, a.sentence_id, a.payload, a.feedback, a.timestamp, "
        "a.version FROM annotations a WHERE a.task = :task AND a.version = ("
        "  SELECT MAX(version) FROM annotations b WHERE b.annotator_id = a.annotator_id"
        "  AND b.task = a.task AND b.sentence_id = a.sentence_id)")

    def _record_from_row(self, task: str, row):
        payload = json.loads(row["payload"])
        common = dict(sentence_id=row["sentence_id"], annotator_id=row["annotator_id"],
                      feedback=row["feedback"], version=row["version"],
                      timestamp=row["timestamp"])
        if task == TASK_MLI:
            return MatrixAnnotation(matrix_language=payload, **common)
        return TokenAnnotation(task=task, tags=tuple(payload), **common)

    def latest_annotations(self, task: str) -> list:
        """Latest version of every (annotator, sentence) record for a task."""
        with self._lock:
            rows = self._conn.execute(
                self._LATEST_SQL + " ORDER BY a.sentence_id, a.annotator_id",
                {"task": task}).fetchall()
        return [self._record_from_row(task, row) for row in rows]

    def history(self, annotator_id: int, task: str) -> list[HistoryEntry]:
        """One entry per annotated sentence (latest version), most recent
        first; ties broken by sentence id descending."""
        with self._lock:
            self._require_annotator(annotator_id)
            rows = self._conn.execute(
                self._LATEST_SQL + " AND a.annotator_id = :annotator"
                " ORDER BY a.timestamp DESC, a.sentence_id DESC",
                {"task": task, "annotator": annotator_id}).fetchall()
            texts = {row["sentence_id"]: self._conn.execute(
                "SELECT text FROM sentences WHERE id = ?",
                (row["sentence_id"],)).fetchone()["text"] for row in rows}
        return [HistoryEntry(sentence_id=row["sentence_id"],
                             text=texts[row["sentence_id"]],
                             payload=json.loads(row["payload"]),
                             timestamp=row["timestamp"],
                             version=row["version"]) for row in rows]

    def progress(self, task: str) -> tuple[dict, int]:
        """Distinct annotated sentence count per annotator, plus corpus size."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT annotator_id, COUNT(DISTINCT sentence_id) AS n FROM annotations "
                "WHERE task = ? GROUP BY annotator_id", (task,)).fetchall()
            corpus = self.sentence_count()
        return {row["annotator_id"]: row["n"] for row in rows}, corpus

    def list_feedback(self, task: str | None = None) -> list[Feedback]:
        query = ("SELECT annotator_id, task, sentence_id, feedback, timestamp "
                 "FROM annotations WHERE feedback IS NOT NULL")
        params: tuple = ()
        if task is not None:
            query += " AND task = ?"
            params = (task,)
        with self._lock:
            rows = self._conn.execute(query + " ORDER BY timestamp", params).fetchall()
        return [Feedback(sentence_id=row["sentence_id"], annotator_id=row["annotator_id"],
                         task=row["task"], text=row["feedback"],
                         timestamp=row["timestamp"]) for row in rows]

    # -- export ------------------------------------------------------------

    def export_csv(self, filters: analytics.ExportFilters, out=None) -> str:
        """Write the filtered latest annotations as RFC 4180 CSV (UTF-8,
        LF line endings, header row).

        Token tasks emit one row per token; MLI emits one row per
        sentence.  Row order is (sentence_id, annotator_id, token_index),
        so identical store states export byte-identically.
        """
        task = filters.task
        records = self.latest_annotations(task)
        lid_tags = None
        if filters.has_cmi_predicate and task != TASK_LID:
            lid_tags = {(r.annotator_id, r.sentence_id): r.tags
                        for r in self.latest_annotations(TASK_LID)}
        kept = analytics.filter_records(records, filters, lid_tags=lid_tags)
        kept.sort(key=lambda r: (r.sentence_id, r.annotator_id))

        buffer = out if out is not None else io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        if task == TASK_MLI:
            writer.writerow(MLI_EXPORT_COLUMNS)
            texts = {s.id: s.text for s in self.sentences()}
            for record in kept:
                writer.writerow([record.sentence_id, texts[record.sentence_id],
                                 record.matrix_language, record.annotator_id,
                                 record.version, record.timestamp,
                                 record.feedback or ""])
        else:
            writer.writerow(TOKEN_EXPORT_COLUMNS)
            surfaces = {s.id: s.surfaces for s in self.sentences()}
            for record in kept:
                for index, (token, tag) in enumerate(
                        zip(surfaces[record.sentence_id], record.tags)):
                    writer.writerow([record.sentence_id, index, token, tag,
                                     record.annotator_id, record.version,
                                     record.timestamp, record.feedback or ""])
        return buffer.getvalue() if out is None else ""

    # -- accounts and sessions ----------------------------------------------

    def create_account(self, username: str, password: str,
                       role: str = "annotator") -> int:
        if not username.strip():
            raise StoreError("username must be non-empty")
        if role not in ROLES:
            raise StoreError(f"role must be one of {ROLES}")
        if len(password) < MIN_PASSWORD_LENGTH:
            raise WeakPasswordError(
                f"password must be at least {MIN_PASSWORD_LENGTH} characters")
        with self._lock:
            try:
                cursor = self._conn.execute(
                    "INSERT INTO accounts (username, credential, role, created_at) "
                    "VALUES (?, ?, ?, ?)",
                    (username, hash_password(password), role, utc_now_rfc3339()))
                self._conn.commit()
            except sqlite3.IntegrityError:
                raise DuplicateUsernameError(f"username {username!r} already exists") from None
        return cursor.lastrowid

    def authenticate(self, username: str, password: str) -> AnnotatorAccount:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM accounts WHERE username = ?", (username,)).fetchone()
        credential = row["credential"] if row is not None else _DUMMY_CREDENTIAL
        if not verify_password(password, credential) or row is None:
            raise AuthenticationError("invalid username or password")
        return AnnotatorAccount(annotator_id=row["annotator_id"], username=row["username"],
                                credential=row["credential"], role=row["role"],
                                created_at=row["created_at"])

    def account(self, annotator_id: int) -> AnnotatorAccount:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM accounts WHERE annotator_id = ?", (annotator_id,)).fetchone()
        if row is None:
            raise UnknownAnnotatorError(f"no annotator with id {annotator_id}")
        return AnnotatorAccount(annotator_id=row["annotator_id"], username=row["username"],
                                credential=row["credential"], role=row["role"],
                                created_at=row["created_at"])

    def find_annotator_id(self, name_or_id: str) -> int | None:
        """Resolve an export filter token: numeric id or username."""
        try:
            return int(name_or_id)
        except ValueError:
            pass
        with self._lock:
            row = self._conn.execute(
                "SELECT annotator_id FROM accounts WHERE username = ?",
                (name_or_id,)).fetchone()
        return row["annotator_id"] if row is not None else None

    def create_session(self, annotator_id: int, role: str,
                       ttl_hours: int | None = None) -> Session:
        ttl = ttl_hours if ttl_hours is not None else self.config.session_ttl_hours
        expires = datetime.now(timezone.utc) + timedelta(hours=ttl)
        session = Session(token=secrets.token_urlsafe(16), annotator_id=annotator_id,
                          role=role, expires_at=expires.strftime(
                              "%Y-%m-%dT%H:%M:%S.") + f"{expires.microsecond // 1000:03d}Z")
        with self._lock:
            self._conn.execute(
                "INSERT INTO sessions (token, annotator_id, role, expires_at) "
                "VALUES (?, ?, ?, ?)",
                (session.token, session.annotator_id, session.role, session.expires_at))
            self._conn.commit()
        return session

    def session(self, token: str) -> Session | None:
        """The live session for a token, or None when missing or expired."""
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM sessions WHERE token = ?", (token,)).fetchone()
        if row is None:
            return None
        session = Session(token=row["token"], annotator_id=row["annotator_id"],
                          role=row["role"], expires_at=row["expires_at"])
        return None if session.expired else session
