"""Serve the HTTP/WebSocket gateway against a demo project.

Boots the full stack on loopback with the deterministic mock judge, starts
one run so there is a finished session to explore, then serves until
interrupted.  Point a browser, curl, or the web console at it:

    curl http://127.0.0.1:8000/projects
    curl http://127.0.0.1:8000/projects/demo/graph
    curl "http://127.0.0.1:8000/projects/demo/sessions"
    curl http://127.0.0.1:8000/projects/demo/tasks/write_task/evaluations

and stream a session (replays finished sessions at a paced rate):

    websocat ws://127.0.0.1:8000/sessions/<session_id>/stream

Run: python3 demos/04_gateway.py
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from common import banner, write_demo_project

from xagen import MockJudgeClient, ProjectConfig, RunManager, serve

JUDGE_RULES = (
    ("Collect three key facts", '{"label": "yes", "rationale": "all facts are present"}'),
    ("two-sentence summary", '{"label": "unsure", "rationale": "close, but terse"}'),
)


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="xagen-demo-"))
    root = write_demo_project(workdir / "project")
    manager = RunManager(data_dir=workdir / "data",
                         judge_client=MockJudgeClient(rules=JUDGE_RULES))
    try:
        manager.register_project(ProjectConfig(
            project_id="demo", root=str(root),
            run_command=[sys.executable, "crew.py"]))

        banner("Priming one finished session")
        session_id = manager.start_run("demo")
        manager.wait_run(session_id, timeout=30)
        manager.judge.wait_idle(session_id, timeout=30)
        print(f"  finished session: {session_id}")
        print(f"  stream it:  websocat ws://127.0.0.1:8000/sessions/{session_id}/stream")
        print("  start another run:  curl -X POST http://127.0.0.1:8000/projects/demo/runs")

        banner("Serving on http://127.0.0.1:8000  (Ctrl+C to stop)")
        serve(manager)
    except KeyboardInterrupt:
        pass
    finally:
        manager.shutdown()


if __name__ == "__main__":
    main()
