"""Config parsing, validation, and versioned saves with timestamped backups."""

from __future__ import annotations

import hashlib
import threading
from datetime import timedelta

import pytest

from xagen.clock import format_compact_ms, utc_now_ms
from xagen.config import (
    AGENTS_FILE,
    BACKUPS_DIR,
    TASKS_FILE,
    AgentSpec,
    CycleDetectedError,
    DanglingReferenceError,
    MalformedDocumentError,
    MissingFileError,
    TaskSpec,
    ValidationFailedError,
    list_backups,
    load_project,
    parse_config_texts,
    restore_config,
    save_config,
)

from helpers import SAMPLE_AGENTS_YAML, SAMPLE_TASKS_YAML, write_sample_project

MINIMAL_AGENTS = """\
a1:
  role: Role
  goal: Goal
  backstory: Story
"""

MINIMAL_TASKS = """\
t1:
  description: Do it
  expected_output: Done
  agent: a1
"""


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


def test_sample_project_parses_in_file_order():
    agents, tasks = parse_config_texts(SAMPLE_AGENTS_YAML, SAMPLE_TASKS_YAML)
    assert [a.id for a in agents] == ["researcher", "writer"]
    assert [t.id for t in tasks] == ["research_task", "write_task"]
    assert agents[0] == AgentSpec(
        id="researcher",
        role="Senior Research Analyst",
        goal="Find accurate background facts for any writing assignment",
        backstory="A meticulous analyst who cross-checks every claim.",
        tools=("web_search",),
    )
    assert tasks[1].context == ("research_task",)
    assert tasks[1].agent == "writer"


def test_task_context_list_is_preserved():
    tasks_text = MINIMAL_TASKS + """\
t2:
  description: Later
  expected_output: More
  agent: a1
  context:
    - t1
"""
    _, tasks = parse_config_texts(MINIMAL_AGENTS, tasks_text)
    assert tasks[1] == TaskSpec(id="t2", description="Later", expected_output="More",
                                agent="a1", context=("t1",))


def test_agent_without_tools_key_defaults_to_empty():
    agents, _ = parse_config_texts(MINIMAL_AGENTS, MINIMAL_TASKS)
    assert agents[0].tools == ()


def test_unknown_keys_are_ignored():
    agents_text = MINIMAL_AGENTS + "  llm: some-model\n  verbose: yes\n"
    agents, _ = parse_config_texts(agents_text, MINIMAL_TASKS)
    assert agents[0].role == "Role"


def test_empty_documents_yield_empty_project():
    agents, tasks = parse_config_texts("", "")
    assert agents == [] and tasks == []


# --------------------------------------------------------------------------
# Rejections: document shape
# --------------------------------------------------------------------------


def test_invalid_yaml_syntax_reports_line():
    bad = "a1:\n  role: [unclosed\n"
    with pytest.raises(MalformedDocumentError) as err:
        parse_config_texts(bad, MINIMAL_TASKS)
    assert err.value.file == AGENTS_FILE
    assert err.value.line is not None


def test_anchors_are_rejected():
    bad = "a1:\n  role: &r Role\n  goal: Goal\n  backstory: Story\n"
    with pytest.raises(MalformedDocumentError, match="anchors"):
        parse_config_texts(bad, MINIMAL_TASKS)


def test_aliases_are_rejected():
    bad = "a1:\n  role: *r\n  goal: Goal\n  backstory: Story\n"
    with pytest.raises(MalformedDocumentError, match="alias"):
        parse_config_texts(bad, MINIMAL_TASKS)


def test_tags_are_rejected():
    bad = "a1:\n  role: !!str Role\n  goal: Goal\n  backstory: Story\n"
    with pytest.raises(MalformedDocumentError, match="tags"):
        parse_config_texts(bad, MINIMAL_TASKS)


def test_multi_document_streams_are_rejected():
    bad = MINIMAL_AGENTS + "---\nother: doc\n"
    with pytest.raises(MalformedDocumentError, match="multi-document") as err:
        parse_config_texts(bad, MINIMAL_TASKS)
    assert err.value.line == 5


def test_duplicate_top_level_ids_are_rejected():
    bad = MINIMAL_AGENTS + MINIMAL_AGENTS
    with pytest.raises(MalformedDocumentError, match="duplicate key 'a1'") as err:
        parse_config_texts(bad, MINIMAL_TASKS)
    assert err.value.line == 5


def test_duplicate_nested_keys_are_rejected():
    bad = "a1:\n  role: One\n  role: Two\n  goal: Goal\n  backstory: Story\n"
    with pytest.raises(MalformedDocumentError, match="duplicate key 'role'"):
        parse_config_texts(bad, MINIMAL_TASKS)


def test_top_level_must_be_a_mapping():
    with pytest.raises(MalformedDocumentError, match="top level"):
        parse_config_texts("- a\n- b\n", MINIMAL_TASKS)


def test_entry_must_be_a_mapping():
    with pytest.raises(MalformedDocumentError, match="must be a mapping"):
        parse_config_texts("a1: just a string\n", MINIMAL_TASKS)


# --------------------------------------------------------------------------
# Rejections: field rules
# --------------------------------------------------------------------------


@pytest.mark.parametrize("missing", ["role", "goal", "backstory"])
def test_agent_missing_required_key(missing):
    lines = {"role": "  role: R\n", "goal": "  goal: G\n", "backstory": "  backstory: B\n"}
    text = "a1:\n" + "".join(v for k, v in lines.items() if k != missing)
    with pytest.raises(MalformedDocumentError, match=f"missing key '{missing}'"):
        parse_config_texts(text, MINIMAL_TASKS)


@pytest.mark.parametrize("missing", ["description", "expected_output", "agent"])
def test_task_missing_required_key(missing):
    lines = {
        "description": "  description: D\n",
        "expected_output": "  expected_output: E\n",
        "agent": "  agent: a1\n",
    }
    text = "t1:\n" + "".join(v for k, v in lines.items() if k != missing)
    with pytest.raises(MalformedDocumentError, match=f"missing key '{missing}'"):
        parse_config_texts(MINIMAL_AGENTS, text)


def test_empty_role_is_rejected():
    bad = "a1:\n  role: ''\n  goal: Goal\n  backstory: Story\n"
    with pytest.raises(MalformedDocumentError, match="non-empty"):
        parse_config_texts(bad, MINIMAL_TASKS)


def test_non_text_field_is_rejected():
    bad = "a1:\n  role: Role\n  goal: 42\n  backstory: Story\n"
    with pytest.raises(MalformedDocumentError, match="goal must be text"):
        parse_config_texts(bad, MINIMAL_TASKS)


def test_quoted_numeric_string_is_text():
    ok = "a1:\n  role: Role\n  goal: '42'\n  backstory: Story\n"
    agents, _ = parse_config_texts(ok, MINIMAL_TASKS)
    assert agents[0].goal == "42"


def test_tools_must_be_a_list():
    bad = MINIMAL_AGENTS.rstrip() + "\n  tools: web_search\n"
    with pytest.raises(MalformedDocumentError, match="tools must be a list"):
        parse_config_texts(bad, MINIMAL_TASKS)


def test_tool_entries_must_be_text():
    bad = MINIMAL_AGENTS.rstrip() + "\n  tools:\n    - 3\n"
    with pytest.raises(MalformedDocumentError, match="tools entry must be text"):
        parse_config_texts(bad, MINIMAL_TASKS)


# --------------------------------------------------------------------------
# Rejections: cross-reference rules
# --------------------------------------------------------------------------


def test_task_referencing_ghost_agent_is_dangling():
    bad_tasks = MINIMAL_TASKS.replace("agent: a1", "agent: ghost")
    with pytest.raises(DanglingReferenceError) as err:
        parse_config_texts(MINIMAL_AGENTS, bad_tasks)
    assert err.value.task_id == "t1"
    assert err.value.missing == "ghost"


def test_context_referencing_ghost_task_is_dangling():
    bad_tasks = MINIMAL_TASKS + "  context:\n    - nowhere\n"
    with pytest.raises(DanglingReferenceError) as err:
        parse_config_texts(MINIMAL_AGENTS, bad_tasks)
    assert err.value.missing == "nowhere"


def test_context_cycle_is_detected():
    tasks_text = """\
t1:
  description: D
  expected_output: E
  agent: a1
  context:
    - t2
t2:
  description: D
  expected_output: E
  agent: a1
  context:
    - t1
"""
    with pytest.raises(CycleDetectedError) as err:
        parse_config_texts(MINIMAL_AGENTS, tasks_text)
    assert set(err.value.task_ids) == {"t1", "t2"}
    assert err.value.task_ids[0] == err.value.task_ids[-1]


def test_self_cycle_is_detected():
    tasks_text = MINIMAL_TASKS + "  context:\n    - t1\n"
    with pytest.raises(CycleDetectedError) as err:
        parse_config_texts(MINIMAL_AGENTS, tasks_text)
    assert err.value.task_ids == ["t1", "t1"]


def test_agent_and_task_sharing_an_id_is_rejected():
    tasks_text = MINIMAL_TASKS.replace("t1:", "a1:")
    with pytest.raises(MalformedDocumentError, match="both an agent and a task"):
        parse_config_texts(MINIMAL_AGENTS, tasks_text)


def test_tool_colliding_with_agent_id_is_rejected():
    agents_text = MINIMAL_AGENTS.rstrip() + "\n  tools:\n    - a1\n"
    with pytest.raises(MalformedDocumentError, match="collides"):
        parse_config_texts(agents_text, MINIMAL_TASKS)


# --------------------------------------------------------------------------
# Loading from disk
# --------------------------------------------------------------------------


def test_load_project_round_trip(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    agents, tasks = load_project(root)
    assert [a.id for a in agents] == ["researcher", "writer"]
    assert [t.id for t in tasks] == ["research_task", "write_task"]


@pytest.mark.parametrize("victim", [AGENTS_FILE, TASKS_FILE])
def test_load_project_missing_file(tmp_path, victim):
    root = write_sample_project(tmp_path / "proj")
    (root / victim).unlink()
    with pytest.raises(MissingFileError) as err:
        load_project(root)
    assert err.value.file == victim


def test_load_project_rejects_non_utf8(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    (root / AGENTS_FILE).write_bytes(b"\xff\xfe broken")
    with pytest.raises(MalformedDocumentError, match="UTF-8"):
        load_project(root)


# --------------------------------------------------------------------------
# Versioned saves
# --------------------------------------------------------------------------


NEW_AGENTS = SAMPLE_AGENTS_YAML.replace("Senior Research Analyst", "Principal Analyst")


def test_save_config_backs_up_previous_content(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    original = (root / AGENTS_FILE).read_bytes()

    version = save_config(root, AGENTS_FILE, NEW_AGENTS.encode())

    assert (root / AGENTS_FILE).read_bytes() == NEW_AGENTS.encode()
    backup = root / BACKUPS_DIR / version.backup_name
    assert backup.read_bytes() == original
    assert version.content_digest == hashlib.sha256(original).hexdigest()
    assert version.backup_name.startswith(AGENTS_FILE + ".")
    assert list_backups(root, AGENTS_FILE) == [version]


def test_successive_saves_have_strictly_increasing_timestamps(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    versions = []
    for i in range(5):
        content = SAMPLE_AGENTS_YAML.replace("meticulous", f"meticulous v{i}")
        versions.append(save_config(root, AGENTS_FILE, content.encode()))
    stamps = [v.timestamp for v in versions]
    assert all(a < b for a, b in zip(stamps, stamps[1:]))
    assert [v.backup_name for v in list_backups(root, AGENTS_FILE)] == \
        [v.backup_name for v in versions]


def test_saving_identical_content_still_creates_a_backup(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    current = (root / AGENTS_FILE).read_bytes()
    version = save_config(root, AGENTS_FILE, current)
    assert (root / BACKUPS_DIR / version.backup_name).read_bytes() == current


def test_malformed_save_leaves_file_byte_identical(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    before = (root / TASKS_FILE).read_bytes()
    with pytest.raises(ValidationFailedError):
        save_config(root, TASKS_FILE, b"tasks: [unclosed")
    assert (root / TASKS_FILE).read_bytes() == before
    assert list_backups(root, TASKS_FILE) == []


def test_cross_file_validation_on_save(tmp_path):
    # Removing the writer agent would orphan write_task in tasks.yaml.
    root = write_sample_project(tmp_path / "proj")
    researcher_only = SAMPLE_AGENTS_YAML.split("writer:")[0]
    before = (root / AGENTS_FILE).read_bytes()
    with pytest.raises(ValidationFailedError, match="write_task"):
        save_config(root, AGENTS_FILE, researcher_only.encode())
    assert (root / AGENTS_FILE).read_bytes() == before


def test_save_rejects_non_utf8_content(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    with pytest.raises(ValidationFailedError, match="UTF-8"):
        save_config(root, AGENTS_FILE, b"\xff\xfe nope")


def test_save_rejects_unrecognized_file(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    with pytest.raises(ValueError, match="unrecognized"):
        save_config(root, "crew.py", b"print('hi')")


def test_save_requires_existing_project(tmp_path):
    root = tmp_path / "empty"
    root.mkdir()
    with pytest.raises(MissingFileError):
        save_config(root, AGENTS_FILE, MINIMAL_AGENTS.encode())


def test_timestamps_bump_past_existing_backups(tmp_path):
    # A backup stamped in the future must not break strict monotonicity.
    root = write_sample_project(tmp_path / "proj")
    future = utc_now_ms() + timedelta(seconds=30)
    backups = root / BACKUPS_DIR
    backups.mkdir()
    (backups / f"{AGENTS_FILE}.{format_compact_ms(future)}").write_bytes(b"planted: {}\n")
    version = save_config(root, AGENTS_FILE, NEW_AGENTS.encode())
    assert version.timestamp == future + timedelta(milliseconds=1)


def test_list_backups_ignores_other_files_and_strays(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    save_config(root, AGENTS_FILE, NEW_AGENTS.encode())
    save_config(root, TASKS_FILE, SAMPLE_TASKS_YAML.encode())
    (root / BACKUPS_DIR / "README.txt").write_text("not a backup")
    (root / BACKUPS_DIR / f"{AGENTS_FILE}.notatimestamp").write_text("nope")
    agents_backups = list_backups(root, AGENTS_FILE)
    assert len(agents_backups) == 1
    assert all(v.file == AGENTS_FILE for v in agents_backups)


def test_concurrent_saves_serialize(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    results: list = []
    errors: list = []

    def worker(i: int) -> None:
        content = SAMPLE_AGENTS_YAML.replace("crisp prose", f"crisp prose #{i}")
        try:
            results.append(save_config(root, AGENTS_FILE, content.encode()))
        except Exception as exc:  # pragma: no cover - failure reporting
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert not errors
    stamps = sorted(v.timestamp for v in results)
    assert all(a < b for a, b in zip(stamps, stamps[1:]))
    assert len(list_backups(root, AGENTS_FILE)) == 8
    load_project(root)  # final content is valid


# --------------------------------------------------------------------------
# Restore
# --------------------------------------------------------------------------


def test_restore_reproduces_specs_of_each_version(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    contents = [
        SAMPLE_AGENTS_YAML,
        SAMPLE_AGENTS_YAML.replace("Technical Writer", "Staff Writer"),
        SAMPLE_AGENTS_YAML.replace("Technical Writer", "Copy Editor"),
    ]
    specs_by_digest = {}
    specs_by_digest[hashlib.sha256(contents[0].encode()).hexdigest()] = \
        parse_config_texts(contents[0], SAMPLE_TASKS_YAML)
    for content in contents[1:]:
        save_config(root, AGENTS_FILE, content.encode())
        specs_by_digest[hashlib.sha256(content.encode()).hexdigest()] = \
            parse_config_texts(content, SAMPLE_TASKS_YAML)

    for version in list_backups(root, AGENTS_FILE):
        restore_config(root, AGENTS_FILE, version.backup_name)
        assert load_project(root) == specs_by_digest[
            hashlib.sha256((root / AGENTS_FILE).read_bytes()).hexdigest()]
        backup_bytes = (root / BACKUPS_DIR / version.backup_name).read_bytes()
        assert version.content_digest == hashlib.sha256(backup_bytes).hexdigest()
        assert (root / AGENTS_FILE).read_bytes() == backup_bytes


def test_restore_creates_a_new_backup_of_current_content(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    save_config(root, AGENTS_FILE, NEW_AGENTS.encode())
    first = list_backups(root, AGENTS_FILE)
    restore_config(root, AGENTS_FILE, first[0].backup_name)
    after = list_backups(root, AGENTS_FILE)
    assert len(after) == len(first) + 1
    newest = after[-1]
    assert newest.content_digest == hashlib.sha256(NEW_AGENTS.encode()).hexdigest()


def test_restore_unknown_backup_is_missing_file(tmp_path):
    root = write_sample_project(tmp_path / "proj")
    with pytest.raises(MissingFileError):
        restore_config(root, AGENTS_FILE, "agents.yaml.20990101T000000.000Z")
