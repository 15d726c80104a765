"""Streaming line-grammar parser for multi-agent workflow terminal output.

A :class:`StreamParser` turns the raw byte stream of a running workflow into
ordered :class:`~xagen.events.LogEvent` records, incrementally and
independently of how the stream was chunked.  Grammars are table-driven and
versioned as dialects; ``"v1"`` is the canonical dialect, modeled on the
verbose output markers of popular crew-style agent frameworks::

    # Agent: <name>          agent activation
    ## Task: <task_id>       task start
    ## Using tool: <tool>    tool call
    ## Tool Input:           block: tool input body
    ## Tool Output:          block: tool output body
    ## Final Answer:         block: final answer body
    <anything else>          raw line

Markers match at column 0 after ANSI stripping; one leading space after the
':' is trimmed from captured text; block bodies keep interior newlines
verbatim.  A new marker closes any open block first, so duplicate markers
never halt parsing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .events import EventKind, LogEvent, RawChunk

# --------------------------------------------------------------------------
# ANSI stripping
# --------------------------------------------------------------------------


def strip_ansi(line: str) -> str:
    """Remove ANSI ``ESC [ parameters final-byte`` sequences from one line.

    A malformed sequence is removed up to the first final byte (0x40-0x7E);
    if no final byte follows within the line, the sequence is passed through
    unchanged.
    """
    if "\x1b" not in line:
        return line
    out: list[str] = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch == "\x1b" and i + 1 < n and line[i + 1] == "[":
            j = i + 2
            while j < n and not 0x40 <= ord(line[j]) <= 0x7E:
                j += 1
            if j < n:
                i = j + 1
                continue
        out.append(ch)
        i += 1
    return "".join(out)


# --------------------------------------------------------------------------
# Dialect tables
# --------------------------------------------------------------------------


class ParserMode(str, Enum):
    SCANNING = "scanning"
    IN_TOOL_INPUT = "in_tool_input"
    IN_TOOL_OUTPUT = "in_tool_output"
    IN_FINAL_ANSWER = "in_final_answer"


@dataclass(frozen=True)
class MarkerRule:
    """One line-grammar rule: a column-0 marker and the event it opens."""

    marker: str
    kind: EventKind
    block_mode: ParserMode | None = None  # set for rules that open a block


@dataclass(frozen=True)
class Dialect:
    name: str
    rules: tuple[MarkerRule, ...]


DIALECT_V1 = Dialect(
    name="v1",
    rules=(
        MarkerRule("# Agent:", EventKind.AGENT_ACTIVATED),
        MarkerRule("## Task:", EventKind.TASK_STARTED),
        MarkerRule("## Using tool:", EventKind.TOOL_CALL_STARTED),
        MarkerRule("## Tool Input:", EventKind.TOOL_INPUT, ParserMode.IN_TOOL_INPUT),
        MarkerRule("## Tool Output:", EventKind.TOOL_OUTPUT, ParserMode.IN_TOOL_OUTPUT),
        MarkerRule("## Final Answer:", EventKind.FINAL_ANSWER_COMPLETED, ParserMode.IN_FINAL_ANSWER),
    ),
)

_DIALECTS: dict[str, Dialect] = {DIALECT_V1.name: DIALECT_V1}


def register_dialect(dialect: Dialect) -> None:
    """Register an additional rule set under its dialect name."""
    _DIALECTS[dialect.name] = dialect


def get_dialect(name: str) -> Dialect:
    try:
        return _DIALECTS[name]
    except KeyError:
        raise KeyError(f"unknown log dialect {name!r}") from None


# --------------------------------------------------------------------------
# Parser state
# --------------------------------------------------------------------------


@dataclass
class ParserState:
    """Mutable cursor of one parsing session.

    `buffer` accumulates block body lines and is empty whenever
    `mode` is SCANNING.
    """

    mode: ParserMode = ParserMode.SCANNING
    current_agent: str | None = None
    current_task: str | None = None
    current_tool: str | None = None
    buffer: list[str] = field(default_factory=list)
    line_count: int = 0
    next_seq: int = 0
    pending: bytes = b""
    block_body_start: int = 0  # first line of the open block's body span
    last_arrival_index: int = -1


class StreamParser:
    """Incremental parser; one instance per session, fed by one reader.

    Emitted events are immutable values, safe to hand to any number of
    concurrent consumers.
    """

    def __init__(self, dialect: str = "v1"):
        self.dialect = get_dialect(dialect)
        self.state = ParserState()

    # -- public API ---------------------------------------------------------

    def feed(self, chunk: bytes | RawChunk) -> list[LogEvent]:
        """Consume one chunk of raw output and return the events it completes.

        Chunks that end mid-line are buffered; the emitted event sequence is
        a pure function of the concatenated byte stream, regardless of chunk
        boundaries.
        """
        st = self.state
        if isinstance(chunk, RawChunk):
            if chunk.arrival_index <= st.last_arrival_index:
                raise ValueError("chunks must arrive in arrival_index order")
            st.last_arrival_index = chunk.arrival_index
            data = chunk.data
        else:
            data = chunk
        st.pending += data
        *complete, st.pending = st.pending.split(b"\n")
        events: list[LogEvent] = []
        for raw in complete:
            events.extend(self._handle_line(self._decode(raw)))
        return events

    def finish(self, exit_code: int, payload: str | None = None) -> list[LogEvent]:
        """Flush any partial line and open block, then emit WorkflowCompleted.

        `payload` overrides the rendered exit code (used for runs that were
        stopped rather than exited).
        """
        st = self.state
        events: list[LogEvent] = []
        if st.pending:
            line = self._decode(st.pending)
            st.pending = b""
            events.extend(self._handle_line(line))
        events.extend(self._close_block(st.line_count))
        events.append(
            self._emit(
                EventKind.WORKFLOW_COMPLETED,
                subject=None,
                payload=payload if payload is not None else str(exit_code),
                span=(st.line_count, st.line_count),
            )
        )
        return events

    # -- internals ----------------------------------------------------------

    @staticmethod
    def _decode(raw: bytes) -> str:
        line = raw.decode("utf-8", errors="replace")
        return line[:-1] if line.endswith("\r") else line

    def _emit(self, kind: EventKind, subject: str | None, payload: str, span: tuple[int, int]) -> LogEvent:
        event = LogEvent(seq=self.state.next_seq, kind=kind, subject_id=subject, payload=payload, raw_span=span)
        self.state.next_seq += 1
        return event

    def _match(self, line: str) -> tuple[MarkerRule, str] | None:
        for rule in self.dialect.rules:
            if line.startswith(rule.marker):
                rest = line[len(rule.marker):]
                if rest.startswith(" "):
                    rest = rest[1:]
                return rule, rest
        return None

    def _close_block(self, end_line: int) -> list[LogEvent]:
        """Emit the completion event of the open block, if any."""
        st = self.state
        if st.mode is ParserMode.SCANNING:
            return []
        body = "\n".join(st.buffer)
        span = (st.block_body_start, end_line)
        if st.mode is ParserMode.IN_TOOL_INPUT:
            event = self._emit(EventKind.TOOL_INPUT, st.current_tool, body, span)
        elif st.mode is ParserMode.IN_TOOL_OUTPUT:
            event = self._emit(EventKind.TOOL_OUTPUT, st.current_tool, body, span)
        else:
            event = self._emit(EventKind.FINAL_ANSWER_COMPLETED, st.current_task, body, span)
        st.mode = ParserMode.SCANNING
        st.buffer = []
        return [event]

    def _handle_line(self, line: str) -> list[LogEvent]:
        st = self.state
        stripped = strip_ansi(line)
        lineno = st.line_count
        st.line_count += 1
        matched = self._match(stripped)
        if matched is None:
            if st.mode is ParserMode.SCANNING:
                return [self._emit(EventKind.RAW_LINE, None, stripped, (lineno, lineno + 1))]
            st.buffer.append(stripped)
            return []

        rule, rest = matched
        events = self._close_block(end_line=lineno)
        if rule.block_mode is None:
            if rule.kind is EventKind.AGENT_ACTIVATED:
                st.current_agent = rest
            elif rule.kind is EventKind.TASK_STARTED:
                st.current_task = rest
            elif rule.kind is EventKind.TOOL_CALL_STARTED:
                st.current_tool = rest
            events.append(self._emit(rule.kind, rest, "", (lineno, lineno + 1)))
            return events

        st.mode = rule.block_mode
        st.buffer = [rest] if rest else []
        if rule.block_mode is ParserMode.IN_FINAL_ANSWER:
            # The started event accounts for the marker line; the completed
            # event will cover the body lines that follow.
            events.append(self._emit(EventKind.FINAL_ANSWER_STARTED, st.current_task, "", (lineno, lineno + 1)))
            st.block_body_start = lineno + 1
        else:
            st.block_body_start = lineno
        return events


def parse_bytes(data: bytes, exit_code: int = 0, dialect: str = "v1") -> list[LogEvent]:
    """Parse a complete captured stream in one call (convenience wrapper)."""
    parser = StreamParser(dialect)
    events = parser.feed(data)
    events.extend(parser.finish(exit_code))
    return events
