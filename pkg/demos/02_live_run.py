"""Run a scripted workflow live through the full pipeline.

The runner spawns the child process, captures its output, parses it into
events, folds state, persists everything, and feeds finished tasks to the
judge.  A subscriber attached mid-run receives a state snapshot followed by
every subsequent frame — exactly what the web console consumes.

The judge here is the deterministic mock client, so the demo runs offline:
the research task is scored "yes" and the write task "no", which is enough
to see the scoring rings move.

Run: python3 demos/02_live_run.py
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from common import banner, write_demo_project

from xagen import FeedbackEntry, MockJudgeClient, ProjectConfig, RunManager
from xagen.hub import SubscriberClosed

JUDGE_RULES = (
    ("Collect three key facts", '{"label": "yes", "rationale": "all facts are present"}'),
    ("two-sentence summary", '{"label": "no", "rationale": "misses fact two"}'),
)


def drain(subscriber) -> list[dict]:
    frames = []
    while True:
        try:
            frames.append(json.loads(subscriber.get(timeout=10.0)))
        except SubscriberClosed:
            return frames


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="xagen-demo-"))
    root = write_demo_project(workdir / "project")
    manager = RunManager(data_dir=workdir / "data",
                         judge_client=MockJudgeClient(rules=JUDGE_RULES))
    try:
        manager.register_project(ProjectConfig(
            project_id="demo", root=str(root),
            run_command=[sys.executable, "crew.py"]))

        banner("1. Start the run and subscribe to the live channel")
        session_id = manager.start_run("demo")
        print(f"  session: {session_id}")
        snapshot_frame, subscriber = manager.subscribe_live(session_id)
        snapshot = json.loads(snapshot_frame)
        print(f"  snapshot at seq {snapshot['seq']}: "
              f"run_status={snapshot['payload']['run_status']}")

        banner("2. Stream frames as the workflow executes")
        for frame in drain(subscriber):
            if frame["type"] == "event":
                event = frame["payload"]
                print(f"  event  seq={event['seq']:>2}  {event['kind']}")
            elif frame["type"] == "delta":
                delta = frame["payload"]
                print(f"  delta  {delta['node_id']}: "
                      f"{delta['old_status']} -> {delta['new_status']}")
            elif frame["type"] == "evaluation":
                payload = frame["payload"]
                print(f"  judge  {payload['task_id']}: label={payload.get('label')}")
            elif frame["type"] == "run_status":
                print(f"  run finished, exit_code={frame['payload']['exit_code']}")

        manager.wait_run(session_id, timeout=30)
        manager.judge.wait_idle(session_id, timeout=30)

        banner("3. Scores and rings after the run")
        graph = manager.store.session_graph(session_id)
        for task_id, summary in manager.task_summaries("demo", graph).items():
            doc = summary.to_dict()
            print(f"  {task_id:<15} mean={doc['mean_score']}  "
                  f"ring={doc['ring']}  samples={doc['sample_count']}")

        banner("4. Expert feedback feeds the next evaluation")
        manager.store.record_feedback(FeedbackEntry(
            session_id=session_id, task_id="write_task",
            comment="mention all three facts explicitly"))
        second = manager.start_run("demo")
        manager.wait_run(second, timeout=30)
        manager.judge.wait_idle(second, timeout=30)
        last_prompt = manager.judge._client.calls[-1][0]
        feedback_line = next(line for line in last_prompt.splitlines()
                             if line.startswith("EXPERT FEEDBACK:"))
        print(f"  prompt now carries: {feedback_line}")
    finally:
        manager.shutdown()


if __name__ == "__main__":
    main()
