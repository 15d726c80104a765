"""Shared fixtures-in-code: sample projects, fake workflows, random generators."""

from __future__ import annotations

import random
from pathlib import Path

from xagen.config import AgentSpec, TaskSpec
from xagen.events import EventKind, LogEvent
from xagen.graph import WorkflowGraph, build_graph

SAMPLE_AGENTS_YAML = """\
researcher:
  role: Senior Research Analyst
  goal: Find accurate background facts for any writing assignment
  backstory: A meticulous analyst who cross-checks every claim.
  tools:
    - web_search
writer:
  role: Technical Writer
  goal: Turn research notes into a polished two-sentence summary
  backstory: Writes crisp prose under deadline pressure.
  tools:
    - web_search
    - spell_check
"""

SAMPLE_TASKS_YAML = """\
research_task:
  description: Collect three key facts about the assigned topic.
  expected_output: A bullet list of three sourced facts.
  agent: researcher
write_task:
  description: Write a two-sentence summary from the research notes.
  expected_output: A two-sentence summary that mentions every fact.
  agent: writer
  context:
    - research_task
"""

# A scripted two-task workflow whose output exercises the v1 grammar.  The
# flushes and pauses force the capture layer to see multiple chunks.
FAKE_WORKFLOW_SCRIPT = """\
import sys, time

def emit(text, pause=0.0):
    sys.stdout.write(text)
    sys.stdout.flush()
    if pause:
        time.sleep(pause)

emit("\\x1b[1m# Agent: researcher\\x1b[0m\\n", 0.05)
emit("## Task: research_task\\n")
emit("## Using tool: web_search\\n", 0.03)
emit('## Tool Input: {"query": "fun facts"}\\n')
emit("## Tool Output:\\n")
emit("three facts found\\n", 0.03)
emit("## Final Answer:\\n")
emit("- fact one\\n- fact two\\n- fact three\\n", 0.05)
emit("# Agent: writer\\n")
emit("## Task: write_task\\n")
emit("## Final Answer:\\n")
emit("Fact one leads to fact two. Fact three wraps it up.\\n", 0.02)
"""

# Prints a partial final answer, then blocks until terminated.
HANGING_WORKFLOW_SCRIPT = """\
import sys, time
sys.stdout.write("# Agent: researcher\\n## Task: research_task\\n## Final Answer:\\npartial work\\n")
sys.stdout.flush()
time.sleep(120)
"""

# Same, but shrugs off SIGTERM so only SIGKILL stops it.
STUBBORN_WORKFLOW_SCRIPT = """\
import signal, sys, time
signal.signal(signal.SIGTERM, signal.SIG_IGN)
sys.stdout.write("# Agent: researcher\\n## Task: research_task\\n")
sys.stdout.flush()
time.sleep(120)
"""


def write_sample_project(root: Path, script: str = FAKE_WORKFLOW_SCRIPT) -> Path:
    """Materialize the sample project (configs + runnable workflow script)."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "agents.yaml").write_text(SAMPLE_AGENTS_YAML, encoding="utf-8")
    (root / "tasks.yaml").write_text(SAMPLE_TASKS_YAML, encoding="utf-8")
    (root / "crew.py").write_text(script, encoding="utf-8")
    return root


# --------------------------------------------------------------------------
# Random generators for replay determinism checks
# --------------------------------------------------------------------------


def random_graph(rng: random.Random, max_nodes: int = 20) -> WorkflowGraph:
    """A random valid workflow graph with at most `max_nodes` nodes."""
    n_tasks = rng.randint(1, 8)
    n_agents = rng.randint(1, 6)
    n_tools = rng.randint(0, max(0, max_nodes - n_tasks - n_agents))
    tool_ids = [f"tool{i}" for i in range(n_tools)]
    agents = []
    for i in range(n_agents):
        tools = tuple(t for t in tool_ids if rng.random() < 0.4)
        agents.append(AgentSpec(id=f"agent{i}", role="role", goal="goal",
                                backstory="story", tools=tools))
    tasks = []
    for i in range(n_tasks):
        context = tuple(f"task{j}" for j in range(i) if rng.random() < 0.25)
        tasks.append(TaskSpec(id=f"task{i}", description=f"do part {i}",
                              expected_output="something useful",
                              agent=f"agent{rng.randrange(n_agents)}", context=context))
    return build_graph(agents, tasks)


_EVENT_KINDS = [
    EventKind.AGENT_ACTIVATED,
    EventKind.TASK_STARTED,
    EventKind.TOOL_CALL_STARTED,
    EventKind.TOOL_INPUT,
    EventKind.TOOL_OUTPUT,
    EventKind.FINAL_ANSWER_STARTED,
    EventKind.FINAL_ANSWER_COMPLETED,
    EventKind.RAW_LINE,
]


def random_events(rng: random.Random, graph: WorkflowGraph, max_events: int = 2000) -> list[LogEvent]:
    """A random contiguous event sequence over the graph's node ids.

    Subjects are drawn from the right node-kind pool most of the time, from
    the wrong pool or unknown ids sometimes (exercising orphan handling).
    """
    from xagen.graph import NodeKind

    tasks = list(graph.ids_of_kind(NodeKind.TASK))
    agents = list(graph.ids_of_kind(NodeKind.AGENT))
    tools = list(graph.ids_of_kind(NodeKind.TOOL))
    ghosts = ["ghost_a", "ghost_b"]
    pools = {
        EventKind.AGENT_ACTIVATED: agents,
        EventKind.TASK_STARTED: tasks,
        EventKind.TOOL_CALL_STARTED: tools,
        EventKind.TOOL_INPUT: tools,
        EventKind.TOOL_OUTPUT: tools,
        EventKind.FINAL_ANSWER_STARTED: tasks,
        EventKind.FINAL_ANSWER_COMPLETED: tasks,
    }

    count = rng.randint(0, max_events - 1)
    events = []
    for seq in range(count):
        kind = rng.choice(_EVENT_KINDS)
        subject: str | None = None
        if kind is not EventKind.RAW_LINE:
            roll = rng.random()
            pool = pools[kind]
            if roll < 0.75 and pool:
                subject = rng.choice(pool)
            elif roll < 0.85:
                subject = rng.choice(ghosts)
            elif roll < 0.95 and (tasks + agents + tools):
                subject = rng.choice(tasks + agents + tools)  # maybe wrong kind
            else:
                subject = None
        events.append(LogEvent(seq=seq, kind=kind, subject_id=subject,
                               payload=f"payload {seq}", raw_span=(seq, seq + 1)))
    if rng.random() < 0.7:
        payload = rng.choice(["0", "0", "1", "2", "stopped"])
        events.append(LogEvent(seq=count, kind=EventKind.WORKFLOW_COMPLETED,
                               subject_id=None, payload=payload, raw_span=(count, count)))
    return events
