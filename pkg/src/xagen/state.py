"""Live activation state of workflow graph nodes, folded from LogEvents.

The same fold drives live ingestion and historical replay, so a replayed
session always reconstructs exactly the states observed live.  Statuses move
only forward along pending → active → (completed | failed); events naming
unknown ids never fail the fold — they surface as orphan deltas.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

from .events import EventKind, LogEvent
from .graph import NodeKind, WorkflowGraph


class NodeStatus(str, Enum):
    PENDING = "pending"
    ACTIVE = "active"
    COMPLETED = "completed"
    FAILED = "failed"


_TERMINAL = (NodeStatus.COMPLETED, NodeStatus.FAILED)


class SeqGapError(Exception):
    """Event applied out of order; the caller must re-sync from the store."""

    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected seq {expected}, got {got}")


@dataclass
class NodeState:
    node_id: str
    status: NodeStatus = NodeStatus.PENDING
    activated_at_seq: int | None = None
    completed_at_seq: int | None = None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "activated_at_seq": self.activated_at_seq,
            "completed_at_seq": self.completed_at_seq,
        }


@dataclass(frozen=True)
class StateDelta:
    """One node status change (or an orphan note when `orphan` is true)."""

    node_id: str
    old_status: NodeStatus | None
    new_status: NodeStatus | None
    seq: int
    orphan: bool = False

    def to_dict(self) -> dict:
        doc = {
            "node_id": self.node_id,
            "old_status": self.old_status.value if self.old_status else None,
            "new_status": self.new_status.value if self.new_status else None,
            "seq": self.seq,
        }
        if self.orphan:
            doc["orphan"] = True
        return doc


@dataclass
class WorkflowState:
    session_id: str
    nodes: dict[str, NodeState] = field(default_factory=dict)
    last_applied_seq: int = -1
    finished: bool = False

    def copy(self) -> "WorkflowState":
        return WorkflowState(
            session_id=self.session_id,
            nodes={node_id: replace(node) for node_id, node in self.nodes.items()},
            last_applied_seq=self.last_applied_seq,
            finished=self.finished,
        )

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "session_id": self.session_id,
            "last_applied_seq": self.last_applied_seq,
            "finished": self.finished,
            "nodes": {node_id: node.to_dict() for node_id, node in self.nodes.items()},
        }

    def apply_delta(self, delta: StateDelta) -> None:
        """Fold one non-orphan delta into the node table (console-side fold)."""
        if delta.orphan or delta.new_status is None:
            return
        node = self.nodes.get(delta.node_id)
        if node is None:
            return
        node.status = delta.new_status
        if delta.new_status is NodeStatus.ACTIVE:
            node.activated_at_seq = delta.seq
        elif delta.new_status in _TERMINAL:
            node.completed_at_seq = delta.seq


def initial_state(graph: WorkflowGraph, session_id: str) -> WorkflowState:
    """Every node pending, nothing applied, not finished."""
    return WorkflowState(
        session_id=session_id,
        nodes={node.id: NodeState(node_id=node.id) for node in graph.nodes},
    )


# --------------------------------------------------------------------------
# The fold
# --------------------------------------------------------------------------


def _transition(state: WorkflowState, graph: WorkflowGraph, kind: NodeKind,
                subject: str | None, new_status: NodeStatus, seq: int) -> list[StateDelta]:
    """Move one node forward, or record an orphan note for unknown subjects."""
    if subject is None or not graph.has_node(subject, kind):
        return [StateDelta(node_id=subject or "", old_status=None, new_status=None, seq=seq, orphan=True)]
    node = state.nodes[subject]
    if node.status in _TERMINAL or node.status is new_status:
        return []
    delta = StateDelta(node_id=subject, old_status=node.status, new_status=new_status, seq=seq)
    node.status = new_status
    if new_status is NodeStatus.ACTIVE:
        node.activated_at_seq = seq
    else:
        node.completed_at_seq = seq
    return [delta]


def apply_inplace(state: WorkflowState, event: LogEvent, graph: WorkflowGraph) -> list[StateDelta]:
    """Fold one event into `state`, mutating it; returns the minimal deltas."""
    if event.seq != state.last_applied_seq + 1:
        raise SeqGapError(expected=state.last_applied_seq + 1, got=event.seq)
    deltas: list[StateDelta] = []
    kind = event.kind
    if kind is EventKind.AGENT_ACTIVATED:
        deltas = _transition(state, graph, NodeKind.AGENT, event.subject_id, NodeStatus.ACTIVE, event.seq)
    elif kind is EventKind.TASK_STARTED:
        if event.subject_id is not None and graph.has_node(event.subject_id, NodeKind.TASK):
            # A new task closes the previous active task, tolerating logs
            # that omit final-answer markers.
            for task_id in graph.task_ids:
                if task_id != event.subject_id and state.nodes[task_id].status is NodeStatus.ACTIVE:
                    deltas.extend(_transition(state, graph, NodeKind.TASK, task_id, NodeStatus.COMPLETED, event.seq))
            deltas.extend(_transition(state, graph, NodeKind.TASK, event.subject_id, NodeStatus.ACTIVE, event.seq))
        else:
            deltas = [StateDelta(node_id=event.subject_id or "", old_status=None, new_status=None,
                                 seq=event.seq, orphan=True)]
    elif kind is EventKind.TOOL_CALL_STARTED:
        deltas = _transition(state, graph, NodeKind.TOOL, event.subject_id, NodeStatus.ACTIVE, event.seq)
    elif kind is EventKind.TOOL_OUTPUT:
        deltas = _transition(state, graph, NodeKind.TOOL, event.subject_id, NodeStatus.COMPLETED, event.seq)
    elif kind is EventKind.FINAL_ANSWER_COMPLETED:
        deltas = _transition(state, graph, NodeKind.TASK, event.subject_id, NodeStatus.COMPLETED, event.seq)
    elif kind is EventKind.WORKFLOW_COMPLETED:
        final = NodeStatus.COMPLETED if event.payload == "0" else NodeStatus.FAILED
        for node in graph.nodes:
            if state.nodes[node.id].status is NodeStatus.ACTIVE:
                deltas.extend(_transition(state, graph, node.kind, node.id, final, event.seq))
        state.finished = True
    state.last_applied_seq = event.seq
    return deltas


def apply(state: WorkflowState, event: LogEvent, graph: WorkflowGraph) -> tuple[WorkflowState, list[StateDelta]]:
    """Pure variant of the fold: returns a new state, leaving `state` intact."""
    new_state = state.copy()
    deltas = apply_inplace(new_state, event, graph)
    return new_state, deltas


def replay(graph: WorkflowGraph, events: Sequence[LogEvent] | Iterable[LogEvent],
           upto_seq: int, session_id: str = "") -> WorkflowState:
    """Reconstruct the state after folding all events with seq <= upto_seq.

    `events` must be a contiguous, seq-ordered, prefix-closed list;
    `upto_seq = -1` yields the initial state.
    """
    state = initial_state(graph, session_id)
    for event in events:
        if event.seq > upto_seq:
            break
        apply_inplace(state, event, graph)
    return state
