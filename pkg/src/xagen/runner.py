"""Child-process run management and the live ingest pipeline.

A RunManager owns the project registry, the session store, the judge
scheduler, and at most one live run per project.  The capture reader pulls
raw chunks (stdout and stderr merged, interleaved by arrival), persists them,
feeds the parser, folds events into live state, and broadcasts frames — all
under one per-session lock so stored order and broadcast order never diverge.
Judge scheduling is fire-and-forget: a hanging judge never delays ingestion.
"""

from __future__ import annotations

import json
import logging
import os
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import config as config_mod
from .config import CONFIG_FILES, parse_config_texts
from .events import EventKind, LogEvent
from .graph import WorkflowGraph, build_graph
from .hub import ChannelClosedError, SessionChannel, Subscriber, make_frame
from .judge import (
    DEFAULT_WINDOW,
    EvaluationError,
    EvaluationResult,
    JudgeClient,
    JudgeRequest,
    JudgeScheduler,
    TaskScoreSummary,
    judge_client_from_env,
    render_feedback_digest,
    summarize,
)
from .parser import StreamParser
from .state import WorkflowState, apply_inplace, initial_state
from .store import SessionStore, UnknownProjectError, UnknownSessionError

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "XAGEN_DATA_DIR"
PROJECTS_FILE = "projects.json"
STOP_GRACE_SECONDS = 5.0
STOPPED_PAYLOAD = "stopped"


class SpawnFailureError(Exception):
    """The child process could not be started; no session was persisted."""


class AlreadyRunningError(Exception):
    def __init__(self, project_id: str, session_id: str):
        self.project_id = project_id
        self.session_id = session_id
        super().__init__(f"project {project_id!r} already has live session {session_id}")


@dataclass
class ProjectConfig:
    """One registered project: where it lives and how to run it."""

    project_id: str
    root: str
    run_command: list[str]
    env_overrides: dict[str, str] = field(default_factory=dict)
    dialect: str = "v1"
    judge_window: int = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        if not self.run_command:
            raise ValueError("run_command must be non-empty")

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "project_id": self.project_id,
            "root": self.root,
            "run_command": list(self.run_command),
            "env_overrides": dict(self.env_overrides),
            "dialect": self.dialect,
            "judge_window": self.judge_window,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProjectConfig":
        return cls(
            project_id=doc["project_id"],
            root=doc["root"],
            run_command=list(doc["run_command"]),
            env_overrides=dict(doc.get("env_overrides") or {}),
            dialect=doc.get("dialect", "v1"),
            judge_window=doc.get("judge_window", DEFAULT_WINDOW),
        )


class LiveRun:
    """Book-keeping for one in-flight child process."""

    def __init__(self, session_id: str, project: ProjectConfig, process: subprocess.Popen,
                 graph: WorkflowGraph, parser: StreamParser, tasks: dict):
        self.session_id = session_id
        self.project = project
        self.process = process
        self.graph = graph
        self.parser = parser
        self.tasks = tasks  # task_id -> TaskSpec
        self.state: WorkflowState = initial_state(graph, session_id)
        self.channel = SessionChannel(session_id)
        self.stop_requested = threading.Event()
        self.done = threading.Event()


class RunManager:
    """Composition root wiring runner, store, judge and broadcast together."""

    def __init__(self, data_dir: str | Path | None = None,
                 judge_client: JudgeClient | None = None,
                 raw_log_cap: int | None = None):
        if data_dir is None:
            data_dir = os.environ.get(DATA_DIR_ENV) or Path.home() / ".xagen"
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        store_kwargs = {} if raw_log_cap is None else {"raw_log_cap": raw_log_cap}
        self.store = SessionStore(self.data_dir, **store_kwargs)
        self._guard = threading.Lock()
        self._projects: dict[str, ProjectConfig] = {}
        self._live: dict[str, LiveRun] = {}
        self._live_by_project: dict[str, str] = {}
        self._load_registry()
        client = judge_client if judge_client is not None else judge_client_from_env()
        self.judge: JudgeScheduler | None = None
        if client is not None:
            self.judge = JudgeScheduler(
                client,
                store=self.store,
                on_result=self._broadcast_evaluation,
                on_error=self._broadcast_evaluation_error,
            )

    # -- project registry -----------------------------------------------------

    def _registry_path(self) -> Path:
        return self.data_dir / PROJECTS_FILE

    def _load_registry(self) -> None:
        path = self._registry_path()
        if not path.is_file():
            return
        for doc in json.loads(path.read_text(encoding="utf-8")):
            project = ProjectConfig.from_dict(doc)
            self._projects[project.project_id] = project

    def _save_registry(self) -> None:
        path = self._registry_path()
        tmp = path.with_suffix(".json.tmp")
        docs = [self._projects[pid].to_dict() for pid in sorted(self._projects)]
        tmp.write_text(json.dumps(docs, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def register_project(self, project: ProjectConfig) -> ProjectConfig:
        """Validate the project's config files and persist the registration."""
        config_mod.load_project(project.root)  # raises ConfigError when invalid
        with self._guard:
            self._projects[project.project_id] = project
            self._save_registry()
        return project

    def get_project(self, project_id: str) -> ProjectConfig:
        try:
            return self._projects[project_id]
        except KeyError:
            raise UnknownProjectError(project_id) from None

    def list_projects(self) -> list[ProjectConfig]:
        return [self._projects[pid] for pid in sorted(self._projects)]

    def project_graph(self, project_id: str) -> WorkflowGraph:
        project = self.get_project(project_id)
        agents, tasks = config_mod.load_project(project.root)
        return build_graph(agents, tasks)

    # -- run lifecycle -----------------------------------------------------------

    def start_run(self, project_id: str) -> str:
        """Spawn the workflow and return its session id without waiting."""
        project = self.get_project(project_id)
        with self._guard:
            live_session = self._live_by_project.get(project_id)
            if live_session is not None:
                raise AlreadyRunningError(project_id, live_session)
            self._live_by_project[project_id] = ""  # reserve while spawning

        try:
            root = Path(project.root)
            snapshot = {}
            for file in CONFIG_FILES:
                snapshot[file] = (root / file).read_bytes()
            agents, tasks = parse_config_texts(
                snapshot[CONFIG_FILES[0]].decode("utf-8"),
                snapshot[CONFIG_FILES[1]].decode("utf-8"),
            )
            graph = build_graph(agents, tasks)
            env = dict(os.environ)
            env.update(project.env_overrides)
            try:
                process = subprocess.Popen(
                    project.run_command,
                    cwd=project.root,
                    env=env,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.STDOUT,
                    stdin=subprocess.DEVNULL,
                )
            except OSError as exc:
                raise SpawnFailureError(str(exc)) from exc
        except BaseException:
            with self._guard:
                self._live_by_project.pop(project_id, None)
            raise

        record = self.store.create_session(project_id, snapshot)
        live = LiveRun(
            session_id=record.session_id,
            project=project,
            process=process,
            graph=graph,
            parser=StreamParser(project.dialect),
            tasks={task.id: task for task in tasks},
        )
        with self._guard:
            self._live[record.session_id] = live
            self._live_by_project[project_id] = record.session_id
        threading.Thread(target=self._pump, args=(live,), daemon=True,
                         name=f"capture-{record.session_id[:8]}").start()
        return record.session_id

    def _pump(self, live: LiveRun) -> None:
        """Capture reader: chunks → raw log → parser → state/store/broadcast."""
        fd = live.process.stdout.fileno()
        session_id = live.session_id
        while True:
            try:
                chunk = os.read(fd, 65536)
            except OSError:
                break
            if not chunk:
                break
            with live.channel.lock:
                self.store.append_raw(session_id, chunk)
                self._ingest(live, live.parser.feed(chunk))
        exit_code = live.process.wait()
        payload = STOPPED_PAYLOAD if live.stop_requested.is_set() else None
        with live.channel.lock:
            self._ingest(live, live.parser.finish(exit_code, payload=payload))
            status_frame = make_frame(
                "run_status",
                live.state.last_applied_seq,
                {
                    "session_id": session_id,
                    "status": "finished",
                    "exit_code": exit_code if payload is None else None,
                    "exit_payload": payload if payload is not None else str(exit_code),
                },
            )
            live.channel.publish([status_frame])
            live.channel.close()
        self.store.close_session(session_id)
        with self._guard:
            self._live.pop(session_id, None)
            if self._live_by_project.get(live.project.project_id) == session_id:
                del self._live_by_project[live.project.project_id]
        live.done.set()

    def _ingest(self, live: LiveRun, events: list[LogEvent]) -> None:
        """Store, fold and broadcast events in identical order (lock held)."""
        for event in events:
            self.store.append_event(live.session_id, event)
            deltas = apply_inplace(live.state, event, live.graph)
            frames = [make_frame("event", event.seq, event.to_dict())]
            frames.extend(make_frame("delta", delta.seq, delta.to_dict()) for delta in deltas)
            live.channel.publish(frames)
            if (event.kind is EventKind.FINAL_ANSWER_COMPLETED
                    and self.judge is not None
                    and event.subject_id in live.tasks):
                task = live.tasks[event.subject_id]
                digest = render_feedback_digest(
                    self.store.list_feedback(live.project.project_id, task.id))
                self.judge.submit(JudgeRequest(
                    session_id=live.session_id,
                    task_id=task.id,
                    task_description=task.description,
                    expected_output=task.expected_output,
                    expert_feedback=digest,
                    final_answer=event.payload,
                ))

    def stop_run(self, session_id: str) -> None:
        """Terminate gracefully, force-kill after the grace period, flush."""
        with self._guard:
            live = self._live.get(session_id)
        if live is None:
            raise UnknownSessionError(session_id)
        live.stop_requested.set()
        live.process.terminate()
        try:
            live.process.wait(timeout=STOP_GRACE_SECONDS)
        except subprocess.TimeoutExpired:
            live.process.kill()
            live.process.wait()
        live.done.wait(timeout=STOP_GRACE_SECONDS + 10.0)

    def wait_run(self, session_id: str, timeout: float | None = None) -> bool:
        """Block until the session's pipeline has fully finished (test helper)."""
        with self._guard:
            live = self._live.get(session_id)
        if live is None:
            return True
        return live.done.wait(timeout=timeout)

    def get_live(self, session_id: str) -> LiveRun | None:
        with self._guard:
            return self._live.get(session_id)

    # -- subscriptions -------------------------------------------------------------

    def subscribe_live(self, session_id: str) -> tuple[str, Subscriber]:
        """Atomically snapshot live state and attach a subscriber.

        Returns (snapshot frame, subscriber); raises ChannelClosedError if the
        run finished first (callers fall back to the stored-session path).
        """
        live = self.get_live(session_id)
        if live is None:
            raise ChannelClosedError(session_id)
        with live.channel.lock:
            if live.channel.closed:
                raise ChannelClosedError(session_id)
            snapshot = self.snapshot_payload(
                session_id, live.project.project_id, live.state, live.graph, "live")
            subscriber = live.channel.subscribe()
            return make_frame("snapshot", live.state.last_applied_seq, snapshot), subscriber

    def snapshot_payload(self, session_id: str, project_id: str,
                         state: WorkflowState, graph: WorkflowGraph, run_status: str) -> dict:
        return {
            "session_id": session_id,
            "project_id": project_id,
            "run_status": run_status,
            "state": state.to_dict(),
            "graph": graph.to_dict(),
            "summaries": {
                task_id: summary.to_dict()
                for task_id, summary in self.task_summaries(project_id, graph).items()
            },
        }

    def task_summaries(self, project_id: str, graph: WorkflowGraph) -> dict[str, TaskScoreSummary]:
        """Moving-average summaries for every task node, at the project window."""
        try:
            window = self.get_project(project_id).judge_window
        except UnknownProjectError:
            window = DEFAULT_WINDOW
        return {
            task_id: summarize(task_id, self.store.evaluation_history(project_id, task_id), window)
            for task_id in graph.task_ids
        }

    # -- judge fan-out -------------------------------------------------------------

    def _broadcast_evaluation(self, result: EvaluationResult) -> None:
        live = self.get_live(result.session_id)
        if live is not None:
            payload = dict(result.to_dict(), status="ok")
            live.channel.publish([make_frame("evaluation", None, payload)])

    def _broadcast_evaluation_error(self, error: EvaluationError) -> None:
        live = self.get_live(error.session_id)
        if live is not None:
            payload = dict(error.to_dict(), status="error")
            live.channel.publish([make_frame("evaluation", None, payload)])

    def broadcast_feedback(self, session_id: str, payload: dict) -> None:
        """Push an accepted feedback entry to live subscribers, if any."""
        live = self.get_live(session_id)
        if live is not None:
            live.channel.publish([make_frame("feedback", None, payload)])

    def shutdown(self) -> None:
        """Stop all live runs and release background resources."""
        with self._guard:
            session_ids = list(self._live)
        for session_id in session_ids:
            try:
                self.stop_run(session_id)
            except UnknownSessionError:
                pass
        if self.judge is not None:
            self.judge.shutdown()
