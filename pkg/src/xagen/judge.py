"""LLM-as-a-judge evaluation of completed task outputs.

Each completed task's final answer is scored against the task description,
expected output and accumulated expert feedback by a judge model queried at
temperature 0.  Verdict labels map to fixed scores (yes 1.0 / no 0.0 /
unsure 0.5); moving averages over recent sessions drive the console's ring
indicators.  Parse and transport failures are first-class errors — they are
never coerced to "unsure", which encodes the judge's semantic uncertainty,
not plumbing faults.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Protocol, Sequence

import httpx

from .clock import format_iso_ms, parse_iso_ms, utc_now_ms

PROMPT_TEMPLATE = (
    "You are an impartial evaluator. Your task is to assess whether the FINAL ANSWER "
    "generated by an AI agent adequately satisfies the given TASK DESCRIPTION and "
    "EXPECTED OUTPUT, taking into account EXPERT FEEDBACK from previous attempts.\n"
    "Please return your judgment in the following JSON format:\n"
    "{{\n"
    '  "label": "yes" | "no" | "unsure",\n'
    '  "rationale": "<brief explanation of your reasoning>"\n'
    "}}\n"
    "Inputs:\n"
    "TASK DESCRIPTION: {task_description} \n"
    "EXPECTED OUTPUT: {expected_output}\n"
    "EXPERT FEEDBACK: {expert_feedback}\n"
    "FINAL ANSWER: {final_answer}\n"
    "Important: Respond with only the JSON object. Do not include any additional "
    "text or commentary."
)

LABEL_SCORES = {"yes": 1.0, "no": 0.0, "unsure": 0.5}

FEEDBACK_DIGEST_CAP = 20
DEFAULT_WINDOW = 10
DEFAULT_TIMEOUT = 60.0
DEFAULT_MAX_INFLIGHT = 2

# Ring rendering thresholds consumed by the console.
RING_SUCCESS_THRESHOLD = 0.75
RING_CAUTION_THRESHOLD = 0.4


def ring_level(mean_score: float | None) -> str:
    """Map a moving-average score to a ring color level."""
    if mean_score is None:
        return "neutral"
    if mean_score >= RING_SUCCESS_THRESHOLD:
        return "success"
    if mean_score >= RING_CAUTION_THRESHOLD:
        return "caution"
    return "failure"


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class JudgeRequest:
    session_id: str
    task_id: str
    task_description: str
    expected_output: str
    expert_feedback: str  # rendered digest, possibly "none"
    final_answer: str


@dataclass(frozen=True)
class EvaluationResult:
    session_id: str
    task_id: str
    label: str
    score: float
    rationale: str
    created_at: datetime

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "session_id": self.session_id,
            "task_id": self.task_id,
            "label": self.label,
            "score": self.score,
            "rationale": self.rationale,
            "created_at": format_iso_ms(self.created_at),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvaluationResult":
        return cls(
            session_id=doc["session_id"],
            task_id=doc["task_id"],
            label=doc["label"],
            score=doc["score"],
            rationale=doc["rationale"],
            created_at=parse_iso_ms(doc["created_at"]),
        )


@dataclass(frozen=True)
class EvaluationError:
    """A failed evaluation; surfaces as "evaluation unavailable", never as unsure."""

    session_id: str
    task_id: str
    cause: str
    raw_response: str

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "session_id": self.session_id,
            "task_id": self.task_id,
            "cause": self.cause,
            "raw_response": self.raw_response,
        }


@dataclass(frozen=True)
class TaskScoreSummary:
    """Moving average of a task's scores over the most recent sessions."""

    task_id: str
    window: int
    mean_score: float | None
    sample_count: int
    scores: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "task_id": self.task_id,
            "window": self.window,
            "mean_score": self.mean_score,
            "sample_count": self.sample_count,
            "scores": list(self.scores),
            "ring": ring_level(self.mean_score),
        }


# --------------------------------------------------------------------------
# Prompt assembly and verdict parsing
# --------------------------------------------------------------------------


def assemble_prompt(request: JudgeRequest) -> str:
    """Substitute the four placeholders into the judge template, single-pass."""
    return PROMPT_TEMPLATE.format(
        task_description=request.task_description,
        expected_output=request.expected_output,
        expert_feedback=request.expert_feedback,
        final_answer=request.final_answer,
    )


class VerdictParseError(Exception):
    def __init__(self, raw: str, reason: str):
        self.raw = raw
        self.reason = reason
        super().__init__(reason)


_FENCE_RE = re.compile(r"\A```[^\n]*\n(.*?)\n?```\Z", re.DOTALL)


def parse_verdict(raw: str) -> tuple[str, str]:
    """Extract (label, rationale) from a judge response.

    Accepts a single top-level JSON object with exactly the keys `label` and
    `rationale`, tolerating surrounding whitespace and one fenced code block
    wrapper.  Anything else raises VerdictParseError with the raw text kept.
    """
    text = raw.strip()
    fenced = _FENCE_RE.match(text)
    if fenced is not None:
        text = fenced.group(1).strip()
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise VerdictParseError(raw, f"not a JSON object: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"label", "rationale"}:
        raise VerdictParseError(raw, "expected exactly the keys 'label' and 'rationale'")
    label, rationale = doc["label"], doc["rationale"]
    if not isinstance(label, str) or label not in LABEL_SCORES:
        raise VerdictParseError(raw, f"unknown label {label!r}")
    if not isinstance(rationale, str) or not rationale:
        raise VerdictParseError(raw, "rationale must be non-empty text")
    return label, rationale


# --------------------------------------------------------------------------
# Judge clients
# --------------------------------------------------------------------------


class JudgeClient(Protocol):
    def send(self, prompt: str, temperature: float) -> str: ...


class JudgeTransportError(Exception):
    """The judge endpoint could not produce a response text."""


@dataclass
class MockJudgeClient:
    """Deterministic table-driven judge: first rule whose needle occurs in the
    prompt wins.  `delay` simulates a slow endpoint for pipeline tests."""

    rules: tuple[tuple[str, str], ...] = ()
    default: str = '{"label": "unsure", "rationale": "no rule matched"}'
    delay: float = 0.0
    calls: list[tuple[str, float]] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def send(self, prompt: str, temperature: float) -> str:
        with self._lock:
            self.calls.append((prompt, temperature))
        if self.delay:
            time.sleep(self.delay)
        for needle, response in self.rules:
            if needle in prompt:
                return response
        return self.default


class HttpJudgeClient:
    """Judge client speaking the common chat-completions request shape."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None,
                 timeout: float = DEFAULT_TIMEOUT, transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self.model = model
        self._headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def send(self, prompt: str, temperature: float) -> str:
        body = {
            "model": self.model,
            "temperature": temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            response = self._client.post(self.endpoint, json=body, headers=self._headers)
            response.raise_for_status()
            return response.json()["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise JudgeTransportError(str(exc)) from exc

    def close(self) -> None:
        self._client.close()


def judge_client_from_env(env: "os._Environ[str] | dict[str, str]" = os.environ) -> HttpJudgeClient | None:
    """Build an HTTP judge client from XAGEN_JUDGE_* variables, if configured."""
    endpoint = env.get("XAGEN_JUDGE_ENDPOINT")
    if not endpoint:
        return None
    return HttpJudgeClient(
        endpoint=endpoint,
        model=env.get("XAGEN_JUDGE_MODEL", "gpt-4o"),
        api_key=env.get("XAGEN_JUDGE_API_KEY"),
        timeout=float(env.get("XAGEN_JUDGE_TIMEOUT", str(DEFAULT_TIMEOUT))),
    )


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


def evaluate(request: JudgeRequest, client: JudgeClient, store=None,
             now: Callable[[], datetime] = utc_now_ms) -> EvaluationResult | EvaluationError:
    """Send the assembled prompt at temperature 0, with one retry.

    On success the result is recorded to `store` (when given) and returned;
    after a second parse/transport failure an EvaluationError is returned
    with the raw response preserved — no label is ever fabricated.
    """
    prompt = assemble_prompt(request)
    cause, raw_response = "unknown", ""
    for _ in range(2):
        try:
            raw = client.send(prompt, temperature=0.0)
        except Exception as exc:
            cause, raw_response = f"transport: {exc}", ""
            continue
        try:
            label, rationale = parse_verdict(raw)
        except VerdictParseError as exc:
            cause, raw_response = f"parse: {exc.reason}", raw
            continue
        result = EvaluationResult(
            session_id=request.session_id,
            task_id=request.task_id,
            label=label,
            score=LABEL_SCORES[label],
            rationale=rationale,
            created_at=now(),
        )
        if store is not None:
            store.record_evaluation(result)
        return result
    return EvaluationError(session_id=request.session_id, task_id=request.task_id,
                           cause=cause, raw_response=raw_response)


def summarize(task_id: str, history: Sequence[EvaluationResult], window: int) -> TaskScoreSummary:
    """Mean of the most recent min(window, len(history)) scores.

    `history` must be ordered by created_at ascending; an empty history
    renders as "no data" (mean_score None, sample_count 0).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    tail = tuple(result.score for result in history[-window:])
    mean = sum(tail) / len(tail) if tail else None
    return TaskScoreSummary(task_id=task_id, window=window, mean_score=mean,
                            sample_count=len(tail), scores=tail)


def render_feedback_digest(entries: Sequence) -> str:
    """Render feedback entries newest-first as "- [<ts>] <comment>" lines.

    Capped at the most recent 20 entries; an empty list renders as "none".
    """
    if not entries:
        return "none"
    newest_first = sorted(entries, key=lambda e: e.created_at, reverse=True)
    lines = [f"- [{format_iso_ms(entry.created_at)}] {entry.comment}"
             for entry in newest_first[:FEEDBACK_DIGEST_CAP]]
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Background scheduling
# --------------------------------------------------------------------------


class JudgeScheduler:
    """Runs evaluations on a background pool, at most `max_inflight` judge
    calls per session; results never block log ingestion."""

    def __init__(self, client: JudgeClient, store=None,
                 on_result: Callable[[EvaluationResult], None] | None = None,
                 on_error: Callable[[EvaluationError], None] | None = None,
                 max_inflight: int = DEFAULT_MAX_INFLIGHT):
        self._client = client
        self._store = store
        self._on_result = on_result
        self._on_error = on_error
        self._max_inflight = max_inflight
        self._executor = ThreadPoolExecutor(max_workers=16, thread_name_prefix="judge")
        self._guard = threading.Condition()
        self._semaphores: dict[str, threading.BoundedSemaphore] = {}
        self._pending: dict[str, int] = {}
        self.errors: dict[str, list[EvaluationError]] = {}

    def _semaphore(self, session_id: str) -> threading.BoundedSemaphore:
        with self._guard:
            if session_id not in self._semaphores:
                self._semaphores[session_id] = threading.BoundedSemaphore(self._max_inflight)
            self._pending[session_id] = self._pending.get(session_id, 0) + 1
            return self._semaphores[session_id]

    def submit(self, request: JudgeRequest) -> None:
        """Fire-and-forget: never blocks the caller."""
        semaphore = self._semaphore(request.session_id)

        def work() -> None:
            try:
                with semaphore:
                    outcome = evaluate(request, self._client, self._store)
                if isinstance(outcome, EvaluationError):
                    with self._guard:
                        self.errors.setdefault(request.session_id, []).append(outcome)
                    if self._on_error is not None:
                        self._on_error(outcome)
                elif self._on_result is not None:
                    self._on_result(outcome)
            finally:
                with self._guard:
                    self._pending[request.session_id] -= 1
                    self._guard.notify_all()

        self._executor.submit(work)

    def wait_idle(self, session_id: str, timeout: float = 30.0) -> bool:
        """Block until every submitted evaluation of a session has finished."""
        deadline = time.monotonic() + timeout
        with self._guard:
            while self._pending.get(session_id, 0) > 0:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._guard.wait(remaining)
        return True

    def shutdown(self) -> None:
        self._executor.shutdown(wait=False)
