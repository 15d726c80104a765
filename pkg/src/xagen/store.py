"""Durable, append-only session persistence: the substrate for replay.

Layout (everything human-inspectable, crash-recoverable by line truncation)::

    <data_dir>/projects/<project_id>/sessions/<session_id>/
        session.json        session record (atomic rewrite)
        events.jsonl        one LogEvent per line, seq-contiguous from 0
        raw.log             exact captured bytes (pre-ANSI-strip), capped
        evaluations.jsonl   judge EvaluationResults
        feedback.jsonl      expert FeedbackEntries
        config/             byte copies of agents.yaml / tasks.yaml at start

All .jsonl records carry `"v": 1`.  After an abrupt termination a session
reopens with a contiguous seq prefix: a torn trailing record is discarded
and logged.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime
from pathlib import Path
from typing import IO, Mapping

from .clock import format_iso_ms, parse_iso_ms, utc_now_ms
from .config import AGENTS_FILE, CONFIG_FILES, TASKS_FILE, parse_config_texts
from .events import LogEvent
from .graph import NodeKind, WorkflowGraph, build_graph
from .judge import EvaluationResult

logger = logging.getLogger(__name__)

RAW_LOG_CAP = 256 * 1024 * 1024

EVENTS_FILE = "events.jsonl"
RAW_FILE = "raw.log"
EVALUATIONS_FILE = "evaluations.jsonl"
FEEDBACK_FILE = "feedback.jsonl"
SESSION_FILE = "session.json"
SNAPSHOT_DIR = "config"


class StoreError(Exception):
    """Base class for session-store errors."""


class UnknownSessionError(StoreError):
    def __init__(self, session_id: str):
        self.session_id = session_id
        super().__init__(f"unknown session: {session_id}")


class UnknownProjectError(StoreError):
    def __init__(self, project_id: str):
        self.project_id = project_id
        super().__init__(f"unknown project: {project_id}")


class UnknownTaskError(StoreError):
    def __init__(self, task_id: str):
        self.task_id = task_id
        super().__init__(f"unknown task: {task_id}")


class SeqConflictError(StoreError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"append expected seq {expected}, got {got}")


class StorageFailureError(StoreError):
    pass


# --------------------------------------------------------------------------
# Records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionRecord:
    session_id: str
    project_id: str
    started_at: datetime
    ended_at: datetime | None = None
    exit_code: int | None = None
    exit_payload: str | None = None
    config_snapshot: Mapping[str, str] | None = None  # file -> sha256 of snapshot bytes
    event_count: int = 0
    raw_truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "session_id": self.session_id,
            "project_id": self.project_id,
            "started_at": format_iso_ms(self.started_at),
            "ended_at": format_iso_ms(self.ended_at) if self.ended_at else None,
            "exit_code": self.exit_code,
            "exit_payload": self.exit_payload,
            "config_snapshot": dict(self.config_snapshot or {}),
            "event_count": self.event_count,
            "raw_truncated": self.raw_truncated,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionRecord":
        return cls(
            session_id=doc["session_id"],
            project_id=doc["project_id"],
            started_at=parse_iso_ms(doc["started_at"]),
            ended_at=parse_iso_ms(doc["ended_at"]) if doc.get("ended_at") else None,
            exit_code=doc.get("exit_code"),
            exit_payload=doc.get("exit_payload"),
            config_snapshot=doc.get("config_snapshot") or {},
            event_count=doc.get("event_count", 0),
            raw_truncated=doc.get("raw_truncated", False),
        )


@dataclass(frozen=True)
class FeedbackEntry:
    session_id: str
    task_id: str
    comment: str
    metric_name: str | None = None
    feedback_id: str | None = None   # assigned by the store when absent
    created_at: datetime | None = None  # server-assigned when absent

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "feedback_id": self.feedback_id,
            "session_id": self.session_id,
            "task_id": self.task_id,
            "comment": self.comment,
            "metric_name": self.metric_name,
            "created_at": format_iso_ms(self.created_at) if self.created_at else None,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeedbackEntry":
        return cls(
            feedback_id=doc["feedback_id"],
            session_id=doc["session_id"],
            task_id=doc["task_id"],
            comment=doc["comment"],
            metric_name=doc.get("metric_name"),
            created_at=parse_iso_ms(doc["created_at"]) if doc.get("created_at") else None,
        )


# --------------------------------------------------------------------------
# Store
# --------------------------------------------------------------------------


class _OpenSession:
    """Book-keeping for one opened (recovered) session directory."""

    def __init__(self, directory: Path, record: SessionRecord, event_count: int, raw_size: int):
        self.directory = directory
        self.record = record
        self.event_count = event_count
        self.raw_size = raw_size
        self.lock = threading.Lock()
        self.events_handle: IO[bytes] | None = None
        self.raw_handle: IO[bytes] | None = None
        self.graph: WorkflowGraph | None = None


class SessionStore:
    """File-backed store; one writer per session, concurrent readers always."""

    def __init__(self, data_dir: str | Path, raw_log_cap: int = RAW_LOG_CAP):
        self.data_dir = Path(data_dir)
        self.raw_log_cap = raw_log_cap
        self._guard = threading.Lock()
        self._open_sessions: dict[str, _OpenSession] = {}

    # -- paths ---------------------------------------------------------------

    def _projects_dir(self) -> Path:
        return self.data_dir / "projects"

    def _sessions_dir(self, project_id: str) -> Path:
        return self._projects_dir() / project_id / "sessions"

    def _find_session_dir(self, session_id: str) -> Path | None:
        projects_dir = self._projects_dir()
        if not projects_dir.is_dir():
            return None
        for project_dir in projects_dir.iterdir():
            candidate = project_dir / "sessions" / session_id
            if (candidate / SESSION_FILE).is_file():
                return candidate
        return None

    # -- session lifecycle ----------------------------------------------------

    def create_session(self, project_id: str, config_snapshot: Mapping[str, bytes],
                       session_id: str | None = None) -> SessionRecord:
        """Create the session directory, snapshot configs, write session.json."""
        session_id = session_id or str(uuid.uuid4())
        directory = self._sessions_dir(project_id) / session_id
        try:
            (directory / SNAPSHOT_DIR).mkdir(parents=True)
            for file, content in config_snapshot.items():
                (directory / SNAPSHOT_DIR / file).write_bytes(content)
        except OSError as exc:
            raise StorageFailureError(f"cannot create session directory: {exc}") from exc
        record = SessionRecord(
            session_id=session_id,
            project_id=project_id,
            started_at=utc_now_ms(),
            config_snapshot={f: hashlib.sha256(b).hexdigest() for f, b in config_snapshot.items()},
        )
        self._write_session_record(directory, record)
        opened = _OpenSession(directory, record, event_count=0, raw_size=0)
        with self._guard:
            self._open_sessions[session_id] = opened
        return record

    def _write_session_record(self, directory: Path, record: SessionRecord) -> None:
        path = directory / SESSION_FILE
        tmp = directory / (SESSION_FILE + ".tmp")
        try:
            tmp.write_text(json.dumps(record.to_dict(), indent=2) + "\n", encoding="utf-8")
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageFailureError(f"cannot write session record: {exc}") from exc

    def _open(self, session_id: str) -> _OpenSession:
        with self._guard:
            opened = self._open_sessions.get(session_id)
        if opened is not None:
            return opened
        directory = self._find_session_dir(session_id)
        if directory is None:
            raise UnknownSessionError(session_id)
        record = SessionRecord.from_dict(json.loads((directory / SESSION_FILE).read_text(encoding="utf-8")))
        event_count = self._recover_events(directory / EVENTS_FILE)
        raw_path = directory / RAW_FILE
        raw_size = raw_path.stat().st_size if raw_path.exists() else 0
        record = replace(record, event_count=event_count)
        opened = _OpenSession(directory, record, event_count, raw_size)
        with self._guard:
            return self._open_sessions.setdefault(session_id, opened)

    @staticmethod
    def _recover_events(path: Path) -> int:
        """Validate the event log, truncating any torn/garbled suffix."""
        if not path.exists():
            return 0
        data = path.read_bytes()
        offset = 0
        count = 0
        while offset < len(data):
            newline = data.find(b"\n", offset)
            if newline < 0:
                break  # torn final record: no newline
            line = data[offset:newline]
            try:
                doc = json.loads(line)
                if doc.get("seq") != count:
                    break
                LogEvent.from_dict(doc)
            except (ValueError, KeyError, TypeError):
                break
            offset = newline + 1
            count += 1
        if offset < len(data):
            logger.warning("session store: discarding %d torn byte(s) at end of %s",
                           len(data) - offset, path)
            os.truncate(path, offset)
        return count

    def get_session(self, session_id: str) -> SessionRecord:
        opened = self._open(session_id)
        with opened.lock:
            return replace(opened.record, event_count=opened.event_count)

    def list_sessions(self, project_id: str) -> list[SessionRecord]:
        sessions_dir = self._sessions_dir(project_id)
        if not sessions_dir.is_dir():
            return []
        records = []
        for entry in sessions_dir.iterdir():
            if (entry / SESSION_FILE).is_file():
                records.append(self.get_session(entry.name))
        records.sort(key=lambda r: (r.started_at, r.session_id))
        return records

    def close_session(self, session_id: str) -> None:
        """Flush and drop open handles (reads remain possible)."""
        with self._guard:
            opened = self._open_sessions.get(session_id)
        if opened is None:
            return
        with opened.lock:
            for handle in (opened.events_handle, opened.raw_handle):
                if handle is not None:
                    handle.close()
            opened.events_handle = None
            opened.raw_handle = None
            opened.record = replace(opened.record, event_count=opened.event_count)
            self._write_session_record(opened.directory, opened.record)

    # -- events ----------------------------------------------------------------

    def append_event(self, session_id: str, event: LogEvent) -> None:
        """Durably append one event; its seq must equal the current count."""
        opened = self._open(session_id)
        with opened.lock:
            if event.seq != opened.event_count:
                raise SeqConflictError(expected=opened.event_count, got=event.seq)
            if opened.events_handle is None:
                opened.events_handle = open(opened.directory / EVENTS_FILE, "ab")
            line = json.dumps(event.to_dict(), separators=(",", ":")) + "\n"
            try:
                opened.events_handle.write(line.encode("utf-8"))
                opened.events_handle.flush()
                os.fsync(opened.events_handle.fileno())
            except OSError as exc:
                raise StorageFailureError(f"event append failed: {exc}") from exc
            opened.event_count += 1
            if event.kind.value == "workflow_completed":
                try:
                    exit_code = int(event.payload)
                except ValueError:
                    exit_code = None
                opened.record = replace(
                    opened.record,
                    ended_at=utc_now_ms(),
                    exit_code=exit_code,
                    exit_payload=event.payload,
                    event_count=opened.event_count,
                )
                self._write_session_record(opened.directory, opened.record)

    def event_count(self, session_id: str) -> int:
        opened = self._open(session_id)
        with opened.lock:
            return opened.event_count

    def read_events(self, session_id: str, from_seq: int = 0, to_seq: int | None = None) -> list[LogEvent]:
        """Exactly the committed events with from_seq <= seq <= to_seq, in order."""
        opened = self._open(session_id)
        path = opened.directory / EVENTS_FILE
        if not path.exists():
            return []
        events = []
        with open(path, "rb") as handle:
            for line in handle:
                if not line.endswith(b"\n"):
                    break  # uncommitted suffix
                doc = json.loads(line)
                seq = doc["seq"]
                if seq < from_seq:
                    continue
                if to_seq is not None and seq > to_seq:
                    break
                events.append(LogEvent.from_dict(doc))
        return events

    # -- raw log ----------------------------------------------------------------

    def append_raw(self, session_id: str, chunk: bytes) -> None:
        """Append captured bytes verbatim, up to the per-session cap."""
        opened = self._open(session_id)
        with opened.lock:
            if opened.record.raw_truncated:
                return
            budget = self.raw_log_cap - opened.raw_size
            to_write = chunk[:budget] if len(chunk) > budget else chunk
            if to_write:
                if opened.raw_handle is None:
                    opened.raw_handle = open(opened.directory / RAW_FILE, "ab")
                try:
                    opened.raw_handle.write(to_write)
                    opened.raw_handle.flush()
                except OSError as exc:
                    raise StorageFailureError(f"raw append failed: {exc}") from exc
                opened.raw_size += len(to_write)
            if len(chunk) > len(to_write):
                # Cap reached: stop raw persistence, record the truncation.
                opened.record = replace(opened.record, raw_truncated=True)
                self._write_session_record(opened.directory, opened.record)

    def read_raw(self, session_id: str) -> bytes:
        opened = self._open(session_id)
        path = opened.directory / RAW_FILE
        return path.read_bytes() if path.exists() else b""

    # -- config snapshot ----------------------------------------------------------

    def config_snapshot_texts(self, session_id: str) -> dict[str, str]:
        opened = self._open(session_id)
        texts = {}
        for file in CONFIG_FILES:
            path = opened.directory / SNAPSHOT_DIR / file
            if path.is_file():
                texts[file] = path.read_text(encoding="utf-8")
        return texts

    def session_graph(self, session_id: str) -> WorkflowGraph:
        """The workflow graph as configured when the session started."""
        opened = self._open(session_id)
        with opened.lock:
            if opened.graph is None:
                texts = self.config_snapshot_texts(session_id)
                agents, tasks = parse_config_texts(texts.get(AGENTS_FILE, ""), texts.get(TASKS_FILE, ""))
                opened.graph = build_graph(agents, tasks)
            return opened.graph

    # -- feedback -------------------------------------------------------------------

    def record_feedback(self, entry: FeedbackEntry) -> FeedbackEntry:
        """Durable insert; feedback_id/created_at are assigned when absent."""
        if not entry.comment:
            raise ValueError("feedback comment must be non-empty")
        opened = self._open(entry.session_id)
        graph = self.session_graph(entry.session_id)
        if not graph.has_node(entry.task_id, NodeKind.TASK):
            raise UnknownTaskError(entry.task_id)
        stored = replace(
            entry,
            feedback_id=entry.feedback_id or str(uuid.uuid4()),
            created_at=entry.created_at or utc_now_ms(),
        )
        self._append_jsonl(opened, FEEDBACK_FILE, stored.to_dict())
        return stored

    def list_feedback(self, project_id: str, task_id: str) -> list[FeedbackEntry]:
        """All feedback for a task across the project's sessions, by created_at."""
        entries = []
        for record in self.list_sessions(project_id):
            directory = self._sessions_dir(project_id) / record.session_id
            for doc in self._read_jsonl(directory / FEEDBACK_FILE):
                if doc.get("task_id") == task_id:
                    entries.append(FeedbackEntry.from_dict(doc))
        entries.sort(key=lambda e: e.created_at)
        return entries

    # -- evaluations -------------------------------------------------------------------

    def record_evaluation(self, result: EvaluationResult) -> None:
        opened = self._open(result.session_id)
        self._append_jsonl(opened, EVALUATIONS_FILE, result.to_dict())

    def evaluation_history(self, project_id: str, task_id: str) -> list[EvaluationResult]:
        """Ordered by created_at; feeds judge.summarize directly."""
        results = []
        for record in self.list_sessions(project_id):
            directory = self._sessions_dir(project_id) / record.session_id
            for doc in self._read_jsonl(directory / EVALUATIONS_FILE):
                if doc.get("task_id") == task_id:
                    results.append(EvaluationResult.from_dict(doc))
        results.sort(key=lambda r: r.created_at)
        return results

    # -- jsonl helpers -------------------------------------------------------------------

    @staticmethod
    def _append_jsonl(opened: _OpenSession, file: str, doc: dict) -> None:
        line = json.dumps(doc, separators=(",", ":")) + "\n"
        with opened.lock:
            try:
                with open(opened.directory / file, "ab") as handle:
                    handle.write(line.encode("utf-8"))
                    handle.flush()
                    os.fsync(handle.fileno())
            except OSError as exc:
                raise StorageFailureError(f"append to {file} failed: {exc}") from exc

    @staticmethod
    def _read_jsonl(path: Path) -> list[dict]:
        if not path.exists():
            return []
        docs = []
        with open(path, "rb") as handle:
            for line in handle:
                if not line.endswith(b"\n"):
                    logger.warning("session store: ignoring torn record at end of %s", path)
                    break
                try:
                    docs.append(json.loads(line))
                except ValueError:
                    logger.warning("session store: ignoring malformed record in %s", path)
                    break
        return docs
