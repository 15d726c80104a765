"""Event model shared by the parser, state engine, store and gateway."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

SCHEMA_VERSION = 1


class EventKind(str, Enum):
    """Kinds of structured events recovered from a workflow's output."""

    AGENT_ACTIVATED = "agent_activated"
    TASK_STARTED = "task_started"
    TOOL_CALL_STARTED = "tool_call_started"
    TOOL_INPUT = "tool_input"
    TOOL_OUTPUT = "tool_output"
    FINAL_ANSWER_STARTED = "final_answer_started"
    FINAL_ANSWER_COMPLETED = "final_answer_completed"
    WORKFLOW_COMPLETED = "workflow_completed"
    RAW_LINE = "raw_line"


@dataclass(frozen=True)
class LogEvent:
    """One structured event, positioned by `seq` within its session.

    `raw_span` is a half-open `(start_line, end_line)` range of the
    ANSI-stripped source lines this event accounts for; spans of the events
    of one session are non-overlapping and ordered, and together cover every
    line exactly once.
    """

    seq: int
    kind: EventKind
    subject_id: str | None
    payload: str
    raw_span: tuple[int, int]

    def to_dict(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "seq": self.seq,
            "kind": self.kind.value,
            "subject_id": self.subject_id,
            "payload": self.payload,
            "raw_span": [self.raw_span[0], self.raw_span[1]],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LogEvent":
        return cls(
            seq=doc["seq"],
            kind=EventKind(doc["kind"]),
            subject_id=doc["subject_id"],
            payload=doc["payload"],
            raw_span=(doc["raw_span"][0], doc["raw_span"][1]),
        )


@dataclass(frozen=True)
class RawChunk:
    """A raw piece of child-process output, in arrival order."""

    data: bytes
    arrival_index: int
