import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import write_sample_project  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def sample_project(tmp_path: Path) -> Path:
    """A ready-to-run sample project directory."""
    return write_sample_project(tmp_path / "project")


@pytest.fixture
def fixture_log_bytes() -> bytes:
    return (FIXTURES / "fixture.log").read_bytes()


@pytest.fixture
def golden_events() -> list:
    import json

    return json.loads((FIXTURES / "golden_events.json").read_text(encoding="utf-8"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines: dict[str, str] = {}
    for outcome, label in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::" not in nodeid:
                continue
            name = nodeid.split("::", 1)[1].split("[", 1)[0]
            if label == "FAIL" or name not in lines:
                lines[name] = label
    if lines:
        terminalreporter.section("acceptance criteria")
        for name in sorted(lines):
            terminalreporter.write_line(f"[{lines[name]}] {name}")
