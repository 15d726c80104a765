"""Project configuration: agents.yaml / tasks.yaml parsing, editing, backups.

Configuration is a restricted YAML subset: plain scalars, sequences and
mappings only.  Anchors, aliases, tags and multi-document streams are
rejected, which keeps the files trivially round-trippable and safe to edit
from the console.  Every save validates the candidate content against the
full cross-file rule set first, writes a timestamped backup of the previous
content, then atomically replaces the file.
"""

from __future__ import annotations

import hashlib
import io
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import yaml

from .clock import format_compact_ms, parse_compact_ms, utc_now_ms

AGENTS_FILE = "agents.yaml"
TASKS_FILE = "tasks.yaml"
CONFIG_FILES = (AGENTS_FILE, TASKS_FILE)
BACKUPS_DIR = "backups"

# --------------------------------------------------------------------------
# Errors
# --------------------------------------------------------------------------


class ConfigError(Exception):
    """Base class for configuration errors."""


class MissingFileError(ConfigError):
    def __init__(self, file: str):
        self.file = file
        super().__init__(f"missing configuration file: {file}")


class MalformedDocumentError(ConfigError):
    def __init__(self, file: str, line: int | None, reason: str):
        self.file = file
        self.line = line
        self.reason = reason
        where = f"{file}:{line}" if line is not None else file
        super().__init__(f"{where}: {reason}")


class DanglingReferenceError(ConfigError):
    def __init__(self, task_id: str, missing: str):
        self.task_id = task_id
        self.missing = missing
        super().__init__(f"task {task_id!r} references unknown id {missing!r}")


class CycleDetectedError(ConfigError):
    def __init__(self, task_ids: list[str]):
        self.task_ids = task_ids
        super().__init__(f"task context cycle: {' -> '.join(task_ids)}")


class ValidationFailedError(ConfigError):
    """Candidate content rejected; nothing was written."""


class StorageFailureError(ConfigError):
    """Backup or overwrite failed; the save was rolled back."""


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentSpec:
    id: str
    role: str
    goal: str
    backstory: str
    tools: tuple[str, ...] = ()


@dataclass(frozen=True)
class TaskSpec:
    id: str
    description: str
    expected_output: str
    agent: str
    context: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConfigVersion:
    """One timestamped backup of a configuration file.

    `content_digest` is the SHA-256 of the backed-up (previous) bytes;
    timestamps are strictly increasing per file.
    """

    file: str
    timestamp: datetime
    content_digest: str
    backup_name: str

    def to_dict(self) -> dict:
        from .clock import format_iso_ms

        return {
            "v": 1,
            "file": self.file,
            "timestamp": format_iso_ms(self.timestamp),
            "content_digest": self.content_digest,
            "backup_name": self.backup_name,
        }


# --------------------------------------------------------------------------
# Restricted YAML parsing
# --------------------------------------------------------------------------

_STR_TAG = "tag:yaml.org,2002:str"


def _compose_restricted(text: str, file: str) -> yaml.nodes.Node | None:
    """Compose the document while rejecting everything outside the subset."""
    try:
        events = list(yaml.parse(io.StringIO(text)))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        reason = str(getattr(exc, "problem", None) or exc)
        raise MalformedDocumentError(file, line, reason) from exc

    documents = [e for e in events if isinstance(e, yaml.DocumentStartEvent)]
    if len(documents) > 1:
        line = documents[1].start_mark.line + 1
        raise MalformedDocumentError(file, line, "multi-document streams are not allowed")
    for event in events:
        line = event.start_mark.line + 1
        if isinstance(event, yaml.AliasEvent):
            raise MalformedDocumentError(file, line, "aliases are not allowed")
        if getattr(event, "anchor", None):
            raise MalformedDocumentError(file, line, "anchors are not allowed")
        if isinstance(event, (yaml.ScalarEvent, yaml.SequenceStartEvent, yaml.MappingStartEvent)):
            if event.tag is not None:
                raise MalformedDocumentError(file, line, "tags are not allowed")

    node = yaml.compose(io.StringIO(text), Loader=yaml.SafeLoader)
    if node is not None:
        _reject_duplicate_keys(node, file)
    return node


def _reject_duplicate_keys(node: yaml.nodes.Node, file: str) -> None:
    if isinstance(node, yaml.MappingNode):
        seen: set[str] = set()
        for key_node, value_node in node.value:
            key = key_node.value
            if key in seen:
                line = key_node.start_mark.line + 1
                raise MalformedDocumentError(file, line, f"duplicate key {key!r}")
            seen.add(key)
            _reject_duplicate_keys(value_node, file)
    elif isinstance(node, yaml.SequenceNode):
        for item in node.value:
            _reject_duplicate_keys(item, file)


def _line(node: yaml.nodes.Node) -> int:
    return node.start_mark.line + 1


def _as_text(node: yaml.nodes.Node, file: str, what: str) -> str:
    if not isinstance(node, yaml.ScalarNode) or node.tag != _STR_TAG:
        raise MalformedDocumentError(file, _line(node), f"{what} must be text")
    return node.value


def _as_text_list(node: yaml.nodes.Node, file: str, what: str) -> tuple[str, ...]:
    if not isinstance(node, yaml.SequenceNode):
        raise MalformedDocumentError(file, _line(node), f"{what} must be a list of text")
    return tuple(_as_text(item, file, f"{what} entry") for item in node.value)


def _top_level_mapping(node: yaml.nodes.Node | None, file: str) -> list[tuple[str, yaml.nodes.Node, int]]:
    """Return (id, body node, line) triples preserving file order."""
    if node is None:
        return []
    if not isinstance(node, yaml.MappingNode):
        raise MalformedDocumentError(file, _line(node), "top level must be a mapping of ids")
    entries = []
    for key_node, value_node in node.value:
        key = _as_text(key_node, file, "identifier")
        if not key:
            raise MalformedDocumentError(file, _line(key_node), "identifier must be non-empty")
        entries.append((key, value_node, _line(key_node)))
    return entries


def _entry_fields(body: yaml.nodes.Node, file: str, entry_id: str) -> dict[str, yaml.nodes.Node]:
    if not isinstance(body, yaml.MappingNode):
        raise MalformedDocumentError(file, _line(body), f"entry {entry_id!r} must be a mapping")
    return {key_node.value: value_node for key_node, value_node in body.value}


def _parse_agents(text: str) -> list[AgentSpec]:
    file = AGENTS_FILE
    agents = []
    for agent_id, body, line in _top_level_mapping(_compose_restricted(text, file), file):
        fields = _entry_fields(body, file, agent_id)
        for required in ("role", "goal", "backstory"):
            if required not in fields:
                raise MalformedDocumentError(file, line, f"agent {agent_id!r} is missing key {required!r}")
        role = _as_text(fields["role"], file, "role")
        if not role:
            raise MalformedDocumentError(file, _line(fields["role"]), f"agent {agent_id!r} role must be non-empty")
        tools: tuple[str, ...] = ()
        if "tools" in fields:
            tools = _as_text_list(fields["tools"], file, "tools")
        agents.append(
            AgentSpec(
                id=agent_id,
                role=role,
                goal=_as_text(fields["goal"], file, "goal"),
                backstory=_as_text(fields["backstory"], file, "backstory"),
                tools=tools,
            )
        )
    return agents


def _parse_tasks(text: str) -> list[TaskSpec]:
    file = TASKS_FILE
    tasks = []
    for task_id, body, line in _top_level_mapping(_compose_restricted(text, file), file):
        fields = _entry_fields(body, file, task_id)
        for required in ("description", "expected_output", "agent"):
            if required not in fields:
                raise MalformedDocumentError(file, line, f"task {task_id!r} is missing key {required!r}")
        context: tuple[str, ...] = ()
        if "context" in fields:
            context = _as_text_list(fields["context"], file, "context")
        tasks.append(
            TaskSpec(
                id=task_id,
                description=_as_text(fields["description"], file, "description"),
                expected_output=_as_text(fields["expected_output"], file, "expected_output"),
                agent=_as_text(fields["agent"], file, "agent"),
                context=context,
            )
        )
    return tasks


# --------------------------------------------------------------------------
# Cross-file validation
# --------------------------------------------------------------------------


def _detect_context_cycle(tasks: list[TaskSpec]) -> None:
    adjacency = {task.id: task.context for task in tasks}
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {task_id: WHITE for task_id in adjacency}

    def visit(task_id: str, path: list[str]) -> None:
        color[task_id] = GRAY
        path.append(task_id)
        for dep in adjacency[task_id]:
            if color[dep] == GRAY:
                cycle = path[path.index(dep):] + [dep]
                raise CycleDetectedError(cycle)
            if color[dep] == WHITE:
                visit(dep, path)
        path.pop()
        color[task_id] = BLACK

    for task_id in adjacency:
        if color[task_id] == WHITE:
            visit(task_id, [])


def _validate(agents: list[AgentSpec], tasks: list[TaskSpec]) -> None:
    agent_ids = {agent.id for agent in agents}
    task_ids = {task.id for task in tasks}
    tool_ids = {tool for agent in agents for tool in agent.tools}
    # Node ids must be globally unique: the graph keys every node by id alone.
    for shared in sorted(agent_ids & task_ids):
        raise MalformedDocumentError(TASKS_FILE, None, f"id {shared!r} is used for both an agent and a task")
    for shared in sorted(tool_ids & (agent_ids | task_ids)):
        raise MalformedDocumentError(AGENTS_FILE, None, f"tool id {shared!r} collides with an agent or task id")
    for task in tasks:
        if task.agent not in agent_ids:
            raise DanglingReferenceError(task.id, task.agent)
        for dep in task.context:
            if dep not in task_ids:
                raise DanglingReferenceError(task.id, dep)
    _detect_context_cycle(tasks)


def parse_config_texts(agents_text: str, tasks_text: str) -> tuple[list[AgentSpec], list[TaskSpec]]:
    """Parse and cross-validate in-memory config texts (file order preserved)."""
    agents = _parse_agents(agents_text)
    tasks = _parse_tasks(tasks_text)
    _validate(agents, tasks)
    return agents, tasks


def load_project(root: str | Path) -> tuple[list[AgentSpec], list[TaskSpec]]:
    """Load and validate a project's agents.yaml and tasks.yaml."""
    root = Path(root)
    texts = {}
    for file in CONFIG_FILES:
        path = root / file
        if not path.is_file():
            raise MissingFileError(file)
        try:
            texts[file] = path.read_bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocumentError(file, None, f"not valid UTF-8: {exc}") from exc
    return parse_config_texts(texts[AGENTS_FILE], texts[TASKS_FILE])


# --------------------------------------------------------------------------
# Versioned saves
# --------------------------------------------------------------------------

_locks_guard = threading.Lock()
_save_locks: dict[str, threading.Lock] = {}


def _save_lock(root: Path) -> threading.Lock:
    key = str(root.resolve())
    with _locks_guard:
        return _save_locks.setdefault(key, threading.Lock())


def _atomic_write(path: Path, content: bytes) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(content)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def _parse_backup_name(name: str, file: str) -> datetime | None:
    prefix = file + "."
    if not name.startswith(prefix):
        return None
    stamp = name[len(prefix):]
    if "-" in stamp:  # collision counter suffix
        stamp = stamp.split("-", 1)[0]
    try:
        return parse_compact_ms(stamp)
    except ValueError:
        return None


def list_backups(root: str | Path, file: str) -> list[ConfigVersion]:
    """All backups of `file`, oldest first."""
    backups_dir = Path(root) / BACKUPS_DIR
    if not backups_dir.is_dir():
        return []
    versions = []
    for entry in sorted(backups_dir.iterdir()):
        ts = _parse_backup_name(entry.name, file)
        if ts is None:
            continue
        digest = hashlib.sha256(entry.read_bytes()).hexdigest()
        versions.append(ConfigVersion(file=file, timestamp=ts, content_digest=digest, backup_name=entry.name))
    versions.sort(key=lambda v: (v.timestamp, v.backup_name))
    return versions


def _next_backup_instant(backups_dir: Path, file: str) -> datetime:
    """Now, bumped forward if needed so per-file timestamps strictly increase."""
    now = utc_now_ms()
    latest: datetime | None = None
    if backups_dir.is_dir():
        for entry in backups_dir.iterdir():
            ts = _parse_backup_name(entry.name, file)
            if ts is not None and (latest is None or ts > latest):
                latest = ts
    if latest is not None and now <= latest:
        now = latest + timedelta(milliseconds=1)
    return now


def save_config(root: str | Path, file: str, new_content: bytes) -> ConfigVersion:
    """Validate, back up the previous content, then atomically overwrite.

    Either both the backup and the overwrite happen, or neither does.
    """
    root = Path(root)
    if file not in CONFIG_FILES:
        raise ValueError(f"unrecognized configuration file: {file!r}")
    with _save_lock(root):
        current: dict[str, bytes] = {}
        for name in CONFIG_FILES:
            path = root / name
            if not path.is_file():
                raise MissingFileError(name)
            current[name] = path.read_bytes()

        candidate = dict(current)
        candidate[file] = new_content
        try:
            agents_text = candidate[AGENTS_FILE].decode("utf-8")
            tasks_text = candidate[TASKS_FILE].decode("utf-8")
            parse_config_texts(agents_text, tasks_text)
        except UnicodeDecodeError as exc:
            raise ValidationFailedError(f"{file}: not valid UTF-8: {exc}") from exc
        except ConfigError as exc:
            raise ValidationFailedError(str(exc)) from exc

        backups_dir = root / BACKUPS_DIR
        try:
            backups_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailureError(f"cannot create backups directory: {exc}") from exc

        instant = _next_backup_instant(backups_dir, file)
        backup_name = f"{file}.{format_compact_ms(instant)}"
        backup_path = backups_dir / backup_name
        counter = 0
        while backup_path.exists():
            counter += 1
            backup_path = backups_dir / f"{backup_name}-{counter}"
        backup_name = backup_path.name

        try:
            _atomic_write(backup_path, current[file])
        except OSError as exc:
            raise StorageFailureError(f"backup failed: {exc}") from exc
        try:
            _atomic_write(root / file, new_content)
        except OSError as exc:
            try:
                backup_path.unlink()
            except OSError:
                pass
            raise StorageFailureError(f"overwrite failed: {exc}") from exc

        digest = hashlib.sha256(current[file]).hexdigest()
        return ConfigVersion(file=file, timestamp=instant, content_digest=digest, backup_name=backup_name)


def restore_config(root: str | Path, file: str, backup_name: str) -> ConfigVersion:
    """Re-save the content of a previous backup (creating a new backup first)."""
    backup_path = Path(root) / BACKUPS_DIR / backup_name
    if not backup_path.is_file():
        raise MissingFileError(f"{BACKUPS_DIR}/{backup_name}")
    return save_config(root, file, backup_path.read_bytes())
