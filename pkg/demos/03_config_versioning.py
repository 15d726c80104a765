"""Hot-edit the project configuration with versioned, restorable backups.

Every successful save snapshots the previous file content into a timestamped
backup; any backup can be restored later (which itself creates a backup, so
nothing is ever lost).  Invalid candidates — bad YAML, dangling references,
context cycles — are rejected atomically: the file on disk is untouched.

Run: python3 demos/03_config_versioning.py
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from common import banner, write_demo_project

from xagen import (
    AGENTS_FILE,
    ValidationFailedError,
    list_backups,
    load_project,
    restore_config,
    save_config,
)


def role_of(root: Path, agent_id: str) -> str:
    agents, _ = load_project(root)
    return next(a.role for a in agents if a.id == agent_id)


def main() -> None:
    root = write_demo_project(Path(tempfile.mkdtemp(prefix="xagen-demo-")) / "project")
    original = (root / AGENTS_FILE).read_text(encoding="utf-8")

    banner("1. Three successive edits, each one backed up")
    for revision in ("Staff Research Analyst", "Principal Research Analyst",
                     "Distinguished Research Analyst"):
        candidate = original.replace("Senior Research Analyst", revision)
        version = save_config(root, AGENTS_FILE, candidate.encode("utf-8"))
        print(f"  saved; backup {version.backup_name} holds the previous content")
    print(f"  researcher role is now: {role_of(root, 'researcher')!r}")

    banner("2. The backup chain, oldest first")
    backups = list_backups(root, AGENTS_FILE)
    for version in backups:
        print(f"  {version.backup_name}  digest={version.content_digest[:12]}...")

    banner("3. Invalid saves are rejected without touching the file")
    before = (root / AGENTS_FILE).read_bytes()
    for label, candidate in (
        ("bad YAML", b"researcher: [unclosed"),
        ("missing agent for write_task", b"researcher:\n  role: R\n  goal: G\n  backstory: B\n"),
    ):
        try:
            save_config(root, AGENTS_FILE, candidate)
        except ValidationFailedError as exc:
            print(f"  {label}: rejected ({exc})")
    assert (root / AGENTS_FILE).read_bytes() == before
    print("  file bytes are unchanged after both rejections")

    banner("4. Restore the very first version")
    restore_config(root, AGENTS_FILE, backups[0].backup_name)
    print(f"  researcher role is back to: {role_of(root, 'researcher')!r}")
    print(f"  backups now: {len(list_backups(root, AGENTS_FILE))} "
          "(restoring backed up the replaced content too)")


if __name__ == "__main__":
    main()
