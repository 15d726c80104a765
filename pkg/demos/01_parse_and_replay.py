"""Parse a captured workflow log and scrub through its state history.

Demonstrates the offline half of the engine: the streaming parser turns raw
terminal bytes into structured events, the graph is built from the project's
YAML specs, and `replay` reconstructs the workflow state at any point in
time — the same mechanism the console's playback scrubber uses.

Run: python3 demos/01_parse_and_replay.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from common import AGENTS_YAML, TASKS_YAML, banner

from xagen import StreamParser, build_graph, parse_config_texts, replay

# A captured run: what the child process wrote to its terminal, ANSI codes
# and all.  In production this comes from the runner's raw.log.
CAPTURED_LOG = (
    b"\x1b[1m# Agent: researcher\x1b[0m\n"
    b"## Task: research_task\n"
    b"scanning recent publications...\n"
    b"## Using tool: web_search\n"
    b"## Tool Input:\n"
    b'{"query": "three key facts"}\n'
    b"## Tool Output:\n"
    b"fact one; fact two; fact three\n"
    b"## Final Answer:\n"
    b"- fact one\n"
    b"- fact two\n"
    b"- fact three\n"
    b"\x1b[1m# Agent: writer\x1b[0m\n"
    b"## Task: write_task\n"
    b"## Final Answer:\n"
    b"Fact one leads to fact two. Fact three wraps it up.\n"
)


def main() -> None:
    banner("1. Build the workflow graph from the project specs")
    agents, tasks = parse_config_texts(AGENTS_YAML, TASKS_YAML)
    graph = build_graph(agents, tasks)
    for node in graph.nodes:
        print(f"  node {node.id:<15} kind={node.kind.value}")
    for edge in graph.edges:
        print(f"  edge {edge.src} -> {edge.dst}  ({edge.kind.value})")

    banner("2. Parse the captured log into structured events")
    parser = StreamParser("v1")
    events = parser.feed(CAPTURED_LOG)
    events += parser.finish(exit_code=0)
    for event in events:
        subject = event.subject_id or "-"
        payload = event.payload.replace("\n", "\\n")
        if len(payload) > 44:
            payload = payload[:41] + "..."
        print(f"  seq={event.seq:>2}  {event.kind.value:<22} {subject:<15} {payload}")

    banner("3. Scrub through time: replay the state at selected sequence points")
    for upto in (-1, 1, 4, 7, 9, events[-1].seq):
        state = replay(graph, events, upto, session_id="demo")
        statuses = ", ".join(
            f"{task_id}={state.nodes[task_id].status.value}"
            for task_id in graph.task_ids
        )
        marker = "finished" if state.finished else "running"
        print(f"  upto seq {upto:>2}: {statuses}  [{marker}]")

    print()
    print("Replay is pure: the same events always fold to the same state,")
    print("so a finished session can be scrubbed forward and backward freely.")


if __name__ == "__main__":
    main()
