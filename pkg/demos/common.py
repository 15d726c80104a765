"""Shared scaffolding for the demo scripts: a tiny two-task project.

Each demo materializes this project into a temp directory and drives the
engine against it.  The "workflow" is a plain Python script that prints the
same marker lines a real agent framework would, so every demo runs offline
and finishes in a couple of seconds.
"""

from __future__ import annotations

from pathlib import Path

AGENTS_YAML = """\
researcher:
  role: Senior Research Analyst
  goal: Find accurate, current facts
  backstory: A methodical analyst who always cites sources.
  tools:
    - web_search

writer:
  role: Technical Writer
  goal: Turn research into clear prose
  backstory: A concise writer with an eye for structure.
  tools:
    - web_search
    - spell_check
"""

TASKS_YAML = """\
research_task:
  description: Collect three key facts about the topic
  expected_output: A bullet list of three facts
  agent: researcher

write_task:
  description: Write a two-sentence summary from the research
  expected_output: Two sentences covering all three facts
  agent: writer
  context:
    - research_task
"""

# A scripted stand-in for a real agent run: prints the marker grammar the
# parser understands, with small pauses so live demos visibly stream.
WORKFLOW_SCRIPT = '''\
import sys, time

def say(line, pause=0.05):
    sys.stdout.write(line + "\\n")
    sys.stdout.flush()
    time.sleep(pause)

say("\\x1b[1m# Agent: researcher\\x1b[0m")
say("## Task: research_task")
say("thinking about where to look...")
say("## Using tool: web_search")
say("## Tool Input:")
say('{"query": "three key facts"}')
say("## Tool Output:")
say("fact one; fact two; fact three")
say("## Final Answer:")
say("- fact one")
say("- fact two")
say("- fact three")
say("\\x1b[1m# Agent: writer\\x1b[0m")
say("## Task: write_task")
say("## Final Answer:")
say("Fact one leads to fact two. Fact three wraps it up.")
'''


def write_demo_project(root: Path) -> Path:
    """Create agents.yaml, tasks.yaml, and the scripted workflow under root."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "agents.yaml").write_text(AGENTS_YAML, encoding="utf-8")
    (root / "tasks.yaml").write_text(TASKS_YAML, encoding="utf-8")
    (root / "crew.py").write_text(WORKFLOW_SCRIPT, encoding="utf-8")
    return root


def banner(title: str) -> None:
    print()
    print("=" * 72)
    print(title)
    print("=" * 72)
