"""xagen: observability and explainability engine for multi-agent workflows.

Pipeline: a child workflow process is spawned and its terminal output parsed
live into structured events (parser), folded into per-node activation state
over the project's workflow graph (config/graph/state), persisted append-only
(store), judged asynchronously by an LLM evaluator (judge), and streamed to
consoles over HTTP/WebSocket (gateway).  Finished sessions replay
deterministically from the store.
"""

from .clock import format_iso_ms, parse_iso_ms, utc_now_ms
from .config import (
    AGENTS_FILE,
    CONFIG_FILES,
    TASKS_FILE,
    AgentSpec,
    ConfigError,
    ConfigVersion,
    CycleDetectedError,
    DanglingReferenceError,
    MalformedDocumentError,
    MissingFileError,
    TaskSpec,
    ValidationFailedError,
    list_backups,
    load_project,
    parse_config_texts,
    restore_config,
    save_config,
)
from .events import EventKind, LogEvent, RawChunk
from .gateway import create_app, serve
from .graph import EdgeKind, GraphEdge, GraphNode, NodeKind, WorkflowGraph, build_graph
from .hub import SessionChannel, Subscriber, make_frame
from .judge import (
    LABEL_SCORES,
    PROMPT_TEMPLATE,
    EvaluationError,
    EvaluationResult,
    HttpJudgeClient,
    JudgeClient,
    JudgeRequest,
    JudgeScheduler,
    MockJudgeClient,
    TaskScoreSummary,
    VerdictParseError,
    assemble_prompt,
    evaluate,
    parse_verdict,
    render_feedback_digest,
    ring_level,
    summarize,
)
from .parser import DIALECT_V1, Dialect, MarkerRule, ParserState, StreamParser, parse_bytes, strip_ansi
from .runner import AlreadyRunningError, LiveRun, ProjectConfig, RunManager, SpawnFailureError
from .state import (
    NodeState,
    NodeStatus,
    SeqGapError,
    StateDelta,
    WorkflowState,
    apply,
    apply_inplace,
    initial_state,
    replay,
)
from .store import (
    FeedbackEntry,
    SeqConflictError,
    SessionRecord,
    SessionStore,
    UnknownProjectError,
    UnknownSessionError,
    UnknownTaskError,
)

__version__ = "0.1.0"
