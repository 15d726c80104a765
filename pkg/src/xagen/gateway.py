"""HTTP + WebSocket gateway exposing the engine to the console and scripts.

Routes are thin, stateless mappings onto module operations; every error maps
to a 4xx/5xx JSON body of the shape {"error": <code>, "detail": <text>}.
The stream socket sends a snapshot first, then ordered StreamMessage frames;
finished sessions stream nothing further unless the client requests a paced
replay with {"cmd": "replay", "from_seq": n, "rate": events_per_second}.
No authentication: this is a single-user local tool, bound to loopback.
"""

from __future__ import annotations

import asyncio
import contextlib
from pathlib import Path
from typing import Any

from fastapi import Body, FastAPI, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import config as config_mod
from .config import (
    CONFIG_FILES,
    ConfigError,
    CycleDetectedError,
    DanglingReferenceError,
    MalformedDocumentError,
    MissingFileError,
    ValidationFailedError,
)
from .config import StorageFailureError as ConfigStorageFailureError
from .hub import ChannelClosedError, SubscriberClosed, SubscriberOverflow, make_frame
from .judge import summarize
from .runner import AlreadyRunningError, ProjectConfig, RunManager, SpawnFailureError
from .state import apply_inplace, replay
from .store import (
    FeedbackEntry,
    SeqConflictError,
    StorageFailureError,
    UnknownProjectError,
    UnknownSessionError,
    UnknownTaskError,
)

DEFAULT_REPLAY_RATE = 10.0
WS_CLOSE_UNKNOWN_SESSION = 4404
WS_CLOSE_SLOW_SUBSCRIBER = 1013


class FeedbackIn(BaseModel):
    comment: str
    metric_name: str | None = None


def _error_response(status: int, error: str, detail: Any) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": error, "detail": detail})


_ERROR_MAP: list[tuple[type[Exception], int, str]] = [
    (UnknownProjectError, 404, "unknown_project"),
    (UnknownSessionError, 404, "unknown_session"),
    (UnknownTaskError, 404, "unknown_task"),
    (MissingFileError, 404, "missing_file"),
    (AlreadyRunningError, 409, "already_running"),
    (SeqConflictError, 409, "seq_conflict"),
    (ValidationFailedError, 422, "validation_failed"),
    (MalformedDocumentError, 422, "malformed_document"),
    (DanglingReferenceError, 422, "dangling_reference"),
    (CycleDetectedError, 422, "cycle_detected"),
    (ConfigError, 422, "invalid_config"),
    (ValueError, 422, "invalid_request"),
    (SpawnFailureError, 500, "spawn_failure"),
    (ConfigStorageFailureError, 500, "storage_failure"),
    (StorageFailureError, 500, "storage_failure"),
]


def create_app(manager: RunManager | None = None) -> FastAPI:
    """Build the gateway application around a RunManager."""
    if manager is None:
        manager = RunManager()

    app = FastAPI(title="xagen gateway")
    app.state.manager = manager

    for exc_type, status, code in _ERROR_MAP:
        def handler(request: Request, exc: Exception, status=status, code=code) -> JSONResponse:
            return _error_response(status, code, str(exc))
        app.add_exception_handler(exc_type, handler)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError) -> JSONResponse:
        return _error_response(422, "invalid_request", str(exc))

    @app.exception_handler(StarletteHTTPException)
    async def http_handler(request: Request, exc: StarletteHTTPException) -> JSONResponse:
        return _error_response(exc.status_code, "http_error", exc.detail)

    # -- projects ---------------------------------------------------------

    @app.post("/projects", status_code=201)
    def register_project(doc: dict = Body(...)) -> dict:
        try:
            project = ProjectConfig.from_dict(doc)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid project document: {exc}") from exc
        return manager.register_project(project).to_dict()

    @app.get("/projects")
    def list_projects() -> list[dict]:
        return [project.to_dict() for project in manager.list_projects()]

    @app.get("/projects/{project_id}/graph")
    def project_graph(project_id: str) -> dict:
        return manager.project_graph(project_id).to_dict()

    @app.post("/projects/{project_id}/runs", status_code=201)
    def start_run(project_id: str) -> dict:
        return {"session_id": manager.start_run(project_id)}

    # -- sessions ---------------------------------------------------------

    @app.post("/sessions/{session_id}/stop")
    def stop_run(session_id: str) -> dict:
        manager.stop_run(session_id)
        return {"session_id": session_id, "status": "stopped"}

    @app.get("/sessions")
    def list_sessions(project: str = Query(...)) -> list[dict]:
        manager.get_project(project)
        return [record.to_dict() for record in manager.store.list_sessions(project)]

    @app.get("/sessions/{session_id}/events")
    def session_events(session_id: str,
                       from_seq: int = Query(0, alias="from", ge=0),
                       to_seq: int | None = Query(None, alias="to", ge=0)) -> list[dict]:
        events = manager.store.read_events(session_id, from_seq=from_seq, to_seq=to_seq)
        return [event.to_dict() for event in events]

    @app.get("/sessions/{session_id}/state")
    def session_state(session_id: str, at_seq: int | None = Query(None, ge=-1)) -> dict:
        graph = manager.store.session_graph(session_id)
        events = manager.store.read_events(session_id)
        upto = at_seq if at_seq is not None else (events[-1].seq if events else -1)
        return replay(graph, events, upto, session_id=session_id).to_dict()

    @app.post("/sessions/{session_id}/tasks/{task_id}/feedback", status_code=201)
    def submit_feedback(session_id: str, task_id: str, body: FeedbackIn) -> dict:
        stored = manager.store.record_feedback(FeedbackEntry(
            session_id=session_id,
            task_id=task_id,
            comment=body.comment,
            metric_name=body.metric_name,
        ))
        doc = stored.to_dict()
        manager.broadcast_feedback(session_id, doc)
        return doc

    @app.get("/projects/{project_id}/tasks/{task_id}/feedback")
    def task_feedback(project_id: str, task_id: str) -> list[dict]:
        manager.get_project(project_id)
        entries = manager.store.list_feedback(project_id, task_id)
        return [entry.to_dict() for entry in entries]

    # -- evaluations --------------------------------------------------------

    @app.get("/projects/{project_id}/tasks/{task_id}/evaluations")
    def task_evaluations(project_id: str, task_id: str) -> dict:
        project = manager.get_project(project_id)
        history = manager.store.evaluation_history(project_id, task_id)
        summary = summarize(task_id, history, project.judge_window)
        return {
            "history": [result.to_dict() for result in history],
            "summary": summary.to_dict(),
        }

    # -- config ------------------------------------------------------------

    @app.get("/projects/{project_id}/config/{file}")
    def get_config(project_id: str, file: str) -> Response:
        project = manager.get_project(project_id)
        if file not in CONFIG_FILES:
            raise MissingFileError(file)
        path = Path(project.root) / file
        if not path.is_file():
            raise MissingFileError(file)
        return Response(content=path.read_bytes(), media_type="application/yaml")

    @app.put("/projects/{project_id}/config/{file}")
    async def put_config(project_id: str, file: str, request: Request) -> dict:
        project = manager.get_project(project_id)
        if file not in CONFIG_FILES:
            raise MissingFileError(file)
        content = await request.body()
        version = config_mod.save_config(project.root, file, content)
        return version.to_dict()

    # -- stream ---------------------------------------------------------------

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str) -> None:
        await ws.accept()
        try:
            snapshot_frame, subscriber = manager.subscribe_live(session_id)
        except ChannelClosedError:
            subscriber = None

        if subscriber is not None:
            await _stream_live(ws, snapshot_frame, subscriber)
            return
        await _stream_finished(ws, manager, session_id)

    async def _stream_live(ws: WebSocket, snapshot_frame: str, subscriber) -> None:
        try:
            await ws.send_text(snapshot_frame)
            while True:
                frame = await asyncio.to_thread(subscriber.get, 0.25)
                if frame is not None:
                    await ws.send_text(frame)
        except SubscriberClosed:
            with contextlib.suppress(RuntimeError):
                await ws.close()
        except SubscriberOverflow:
            with contextlib.suppress(RuntimeError):
                await ws.close(code=WS_CLOSE_SLOW_SUBSCRIBER, reason="subscriber too slow")
        except (WebSocketDisconnect, RuntimeError):
            pass

    async def _stream_finished(ws: WebSocket, manager: RunManager, session_id: str) -> None:
        try:
            record = manager.store.get_session(session_id)
        except UnknownSessionError:
            await ws.close(code=WS_CLOSE_UNKNOWN_SESSION, reason="unknown session")
            return
        graph = manager.store.session_graph(session_id)
        events = manager.store.read_events(session_id)
        last_seq = events[-1].seq if events else -1
        state = replay(graph, events, last_seq, session_id=session_id)
        payload = manager.snapshot_payload(session_id, record.project_id, state, graph, "finished")
        try:
            await ws.send_text(make_frame("snapshot", state.last_applied_seq, payload))
            while True:
                message = await ws.receive_json()
                if isinstance(message, dict) and message.get("cmd") == "replay":
                    from_seq = max(int(message.get("from_seq", 0)), 0)
                    rate = float(message.get("rate") or DEFAULT_REPLAY_RATE)
                    if rate <= 0:
                        rate = DEFAULT_REPLAY_RATE
                    await _paced_replay(ws, manager, session_id, graph, events, from_seq, rate)
        except (WebSocketDisconnect, RuntimeError, ValueError):
            pass

    async def _paced_replay(ws: WebSocket, manager: RunManager, session_id: str,
                            graph, events, from_seq: int, rate: float) -> None:
        state = replay(graph, events, from_seq - 1, session_id=session_id)
        delay = 1.0 / rate
        for event in events:
            if event.seq < from_seq:
                continue
            deltas = apply_inplace(state, event, graph)
            await ws.send_text(make_frame("event", event.seq, event.to_dict()))
            for delta in deltas:
                await ws.send_text(make_frame("delta", delta.seq, delta.to_dict()))
            await asyncio.sleep(delay)
        await ws.send_text(make_frame("run_status", state.last_applied_seq,
                                      {"session_id": session_id, "status": "replay_complete"}))

    return app


def serve(manager: RunManager | None = None, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the gateway under uvicorn, bound to loopback by default."""
    import uvicorn

    uvicorn.run(create_app(manager), host=host, port=port, log_level="info")
