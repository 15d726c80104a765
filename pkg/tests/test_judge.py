"""Judge: prompt assembly, verdict parsing, scoring, digests, scheduling."""

from __future__ import annotations

import random
import statistics
import threading
import time

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xagen.clock import parse_iso_ms
from xagen.judge import (
    DEFAULT_WINDOW,
    FEEDBACK_DIGEST_CAP,
    LABEL_SCORES,
    EvaluationError,
    EvaluationResult,
    HttpJudgeClient,
    JudgeRequest,
    JudgeScheduler,
    JudgeTransportError,
    MockJudgeClient,
    VerdictParseError,
    assemble_prompt,
    evaluate,
    judge_client_from_env,
    parse_verdict,
    render_feedback_digest,
    ring_level,
    summarize,
)
from xagen.store import FeedbackEntry

REQUEST = JudgeRequest(
    session_id="s1",
    task_id="write_task",
    task_description="Write a haiku about spring",
    expected_output="Three lines, 5-7-5",
    expert_feedback="none",
    final_answer="cherry blossoms drift",
)

# The full expected prompt, frozen by hand.  Line 9 intentionally carries a
# trailing space after the task description.
EXPECTED_PROMPT = (
    "You are an impartial evaluator. Your task is to assess whether the "
    "FINAL ANSWER generated by an AI agent adequately satisfies the given "
    "TASK DESCRIPTION and EXPECTED OUTPUT, taking into account EXPERT "
    "FEEDBACK from previous attempts.\n"
    "Please return your judgment in the following JSON format:\n"
    "{\n"
    '  "label": "yes" | "no" | "unsure",\n'
    '  "rationale": "<brief explanation of your reasoning>"\n'
    "}\n"
    "Inputs:\n"
    "TASK DESCRIPTION: Write a haiku about spring \n"
    "EXPECTED OUTPUT: Three lines, 5-7-5\n"
    "EXPERT FEEDBACK: none\n"
    "FINAL ANSWER: cherry blossoms drift\n"
    "Important: Respond with only the JSON object. Do not include any "
    "additional text or commentary."
)


# --------------------------------------------------------------------------
# Prompt assembly
# --------------------------------------------------------------------------


def test_prompt_matches_frozen_literal_byte_for_byte():
    assert assemble_prompt(REQUEST) == EXPECTED_PROMPT


def test_prompt_shape():
    prompt = assemble_prompt(REQUEST)
    lines = prompt.split("\n")
    assert len(lines) == 12
    assert lines[2] == "{"
    assert lines[5] == "}"
    assert lines[7].endswith(" ")  # the template's trailing space survives
    assert not prompt.endswith("\n")


def test_braces_in_inputs_pass_through_verbatim():
    request = JudgeRequest(
        session_id="s", task_id="t",
        task_description='use {"format": "json"}',
        expected_output="{{double}}",
        expert_feedback="none",
        final_answer='{"answer": {"nested": [1, 2]}}',
    )
    prompt = assemble_prompt(request)
    assert 'TASK DESCRIPTION: use {"format": "json"} \n' in prompt
    assert "EXPECTED OUTPUT: {{double}}\n" in prompt
    assert prompt.endswith("commentary.")
    assert '{"answer": {"nested": [1, 2]}}' in prompt


def test_multiline_inputs_are_embedded_unchanged():
    request = JudgeRequest(session_id="s", task_id="t", task_description="d",
                           expected_output="e", expert_feedback="- [ts] a\n- [ts] b",
                           final_answer="line one\nline two")
    prompt = assemble_prompt(request)
    assert "EXPERT FEEDBACK: - [ts] a\n- [ts] b\n" in prompt
    assert "FINAL ANSWER: line one\nline two\n" in prompt


def test_empty_feedback_digest_renders_none_in_prompt():
    assert "EXPERT FEEDBACK: none\n" in assemble_prompt(REQUEST)


# --------------------------------------------------------------------------
# Verdict parsing
# --------------------------------------------------------------------------


@pytest.mark.parametrize("label", ["yes", "no", "unsure"])
def test_parse_verdict_accepts_each_label(label):
    raw = f'{{"label": "{label}", "rationale": "because"}}'
    assert parse_verdict(raw) == (label, "because")


def test_parse_verdict_tolerates_whitespace_and_fences():
    raw = '\n  {"label": "yes", "rationale": "ok"}  \n'
    assert parse_verdict(raw) == ("yes", "ok")
    fenced = '```json\n{"label": "no", "rationale": "missing facts"}\n```'
    assert parse_verdict(fenced) == ("no", "missing facts")
    bare_fence = '```\n{"label": "unsure", "rationale": "hard to say"}\n```'
    assert parse_verdict(bare_fence) == ("unsure", "hard to say")


@pytest.mark.parametrize("raw,reason_part", [
    ('{"label": "maybe", "rationale": "r"}', "unknown label"),
    ('{"label": "yes"}', "exactly the keys"),
    ('{"label": "yes", "rationale": "r", "extra": 1}', "exactly the keys"),
    ('{"label": "yes", "rationale": ""}', "non-empty"),
    ('{"label": "yes", "rationale": 3}', "non-empty"),
    ('{"label": true, "rationale": "r"}', "unknown label"),
    ('["yes"]', "exactly the keys"),
    ("not json at all", "not a JSON object"),
    ('```json\n{"label": "yes", "rationale": "r"}\n``` trailing', "not a JSON object"),
])
def test_parse_verdict_rejections(raw, reason_part):
    with pytest.raises(VerdictParseError) as err:
        parse_verdict(raw)
    assert reason_part in err.value.reason
    assert err.value.raw == raw


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------


class _Recorder:
    def __init__(self):
        self.results: list[EvaluationResult] = []

    def record_evaluation(self, result: EvaluationResult) -> None:
        self.results.append(result)


class _FlakyClient:
    """Fails the first `failures` sends, then delegates to a mock client."""

    def __init__(self, failures: int, inner: MockJudgeClient):
        self.failures = failures
        self.inner = inner
        self.sends = 0

    def send(self, prompt: str, temperature: float) -> str:
        self.sends += 1
        if self.sends <= self.failures:
            raise JudgeTransportError("connection reset")
        return self.inner.send(prompt, temperature)


def _fixed_now():
    return parse_iso_ms("2026-01-02T03:04:05.006Z")


@pytest.mark.parametrize("label,score", [("yes", 1.0), ("no", 0.0), ("unsure", 0.5)])
def test_evaluate_scores_labels(label, score):
    client = MockJudgeClient(default=f'{{"label": "{label}", "rationale": "r"}}')
    result = evaluate(REQUEST, client, now=_fixed_now)
    assert isinstance(result, EvaluationResult)
    assert result.label == label
    assert result.score == score
    assert result.session_id == "s1"
    assert result.task_id == "write_task"
    assert result.created_at == _fixed_now()


def test_evaluate_always_uses_temperature_zero():
    client = MockJudgeClient(default='{"label": "yes", "rationale": "r"}')
    evaluate(REQUEST, client)
    assert client.calls == [(EXPECTED_PROMPT, 0.0)]


def test_evaluate_records_to_store_on_success():
    recorder = _Recorder()
    client = MockJudgeClient(default='{"label": "yes", "rationale": "r"}')
    result = evaluate(REQUEST, client, store=recorder)
    assert recorder.results == [result]


def test_evaluate_retries_once_after_transport_failure():
    inner = MockJudgeClient(default='{"label": "no", "rationale": "r"}')
    client = _FlakyClient(failures=1, inner=inner)
    result = evaluate(REQUEST, client)
    assert isinstance(result, EvaluationResult)
    assert result.label == "no"
    assert client.sends == 2


def test_evaluate_gives_up_after_second_failure():
    client = _FlakyClient(failures=2, inner=MockJudgeClient())
    outcome = evaluate(REQUEST, client)
    assert isinstance(outcome, EvaluationError)
    assert outcome.cause.startswith("transport:")
    assert outcome.raw_response == ""
    assert client.sends == 2


def test_evaluate_preserves_raw_response_on_parse_failure():
    recorder = _Recorder()
    client = MockJudgeClient(default="I think the answer is fine.")
    outcome = evaluate(REQUEST, client, store=recorder)
    assert isinstance(outcome, EvaluationError)
    assert outcome.cause.startswith("parse:")
    assert outcome.raw_response == "I think the answer is fine."
    assert len(client.calls) == 2       # one retry
    assert recorder.results == []       # nothing recorded
    assert not hasattr(outcome, "label")  # never coerced to a verdict


def test_evaluation_result_roundtrip():
    result = EvaluationResult(session_id="s", task_id="t", label="unsure",
                              score=0.5, rationale="r", created_at=_fixed_now())
    assert EvaluationResult.from_dict(result.to_dict()) == result


# --------------------------------------------------------------------------
# Scoring summaries
# --------------------------------------------------------------------------


def _history(scores):
    labels = {1.0: "yes", 0.0: "no", 0.5: "unsure"}
    return [EvaluationResult(session_id=f"s{i}", task_id="t", label=labels[s],
                             score=s, rationale="r", created_at=_fixed_now())
            for i, s in enumerate(scores)]


def test_summarize_mean_over_short_history():
    summary = summarize("t", _history([1.0, 0.0, 0.5]), window=10)
    assert summary.mean_score == 0.5
    assert summary.sample_count == 3
    assert summary.scores == (1.0, 0.0, 0.5)


def test_summarize_uses_only_the_window_tail():
    summary = summarize("t", _history([0.0, 1.0, 1.0, 1.0]), window=2)
    assert summary.mean_score == 1.0
    assert summary.sample_count == 2


def test_summarize_empty_history():
    summary = summarize("t", [], window=DEFAULT_WINDOW)
    assert summary.mean_score is None
    assert summary.sample_count == 0
    assert summary.to_dict()["ring"] == "neutral"


def test_summarize_rejects_nonpositive_window():
    with pytest.raises(ValueError):
        summarize("t", [], window=0)


@settings(max_examples=80, deadline=None)
@given(
    scores=st.lists(st.sampled_from([0.0, 0.5, 1.0]), max_size=40),
    window=st.integers(min_value=1, max_value=15),
)
def test_summarize_matches_independent_mean(scores, window):
    history = _history(scores)
    summary = summarize("t", history, window)
    tail = scores[-window:]
    if not tail:
        assert summary.mean_score is None
    else:
        assert summary.mean_score == pytest.approx(statistics.fmean(tail), abs=1e-12)
    assert summary.sample_count == len(tail)
    assert [r.score for r in history] == scores  # purity


@pytest.mark.parametrize("mean,expected", [
    (None, "neutral"),
    (1.0, "success"),
    (0.75, "success"),
    (0.74, "caution"),
    (0.4, "caution"),
    (0.39, "failure"),
    (0.0, "failure"),
])
def test_ring_levels(mean, expected):
    assert ring_level(mean) == expected


# --------------------------------------------------------------------------
# Feedback digest
# --------------------------------------------------------------------------


def _entry(i: int, comment: str) -> FeedbackEntry:
    return FeedbackEntry(session_id="s", task_id="t", comment=comment,
                         feedback_id=f"f{i}",
                         created_at=parse_iso_ms(f"2026-01-01T00:00:{i % 60:02d}.000Z"))


def test_digest_of_no_entries_is_none():
    assert render_feedback_digest([]) == "none"


def test_digest_single_entry_format():
    entry = FeedbackEntry(session_id="s", task_id="t", comment="cite your sources",
                          created_at=parse_iso_ms("2026-01-02T03:04:05.006Z"))
    assert render_feedback_digest([entry]) == "- [2026-01-02T03:04:05.006Z] cite your sources"


def test_digest_is_newest_first():
    entries = [_entry(1, "older"), _entry(30, "newest"), _entry(15, "middle")]
    digest = render_feedback_digest(entries)
    assert [line.split("] ", 1)[1] for line in digest.split("\n")] == \
        ["newest", "middle", "older"]


def test_digest_caps_at_twenty_newest():
    entries = [_entry(i, f"c{i}") for i in range(25)]
    digest = render_feedback_digest(entries)
    lines = digest.split("\n")
    assert len(lines) == FEEDBACK_DIGEST_CAP == 20
    assert lines[0].endswith(" c24")
    assert lines[-1].endswith(" c5")


# --------------------------------------------------------------------------
# HTTP client
# --------------------------------------------------------------------------


def _transport_returning(payload, status=200):
    captured: list[httpx.Request] = []

    def handler(request: httpx.Request) -> httpx.Response:
        captured.append(request)
        return httpx.Response(status, json=payload)

    return httpx.MockTransport(handler), captured


def test_http_client_request_shape_and_extraction():
    payload = {"choices": [{"message": {"content": '{"label": "yes", "rationale": "r"}'}}]}
    transport, captured = _transport_returning(payload)
    client = HttpJudgeClient("http://judge.local/v1/chat/completions", model="judge-1",
                             api_key="sekrit", transport=transport)
    raw = client.send("PROMPT TEXT", temperature=0.0)
    assert raw == '{"label": "yes", "rationale": "r"}'
    request = captured[0]
    assert request.headers["authorization"] == "Bearer sekrit"
    body = request.read()
    import json as _json
    doc = _json.loads(body)
    assert doc == {"model": "judge-1", "temperature": 0.0,
                   "messages": [{"role": "user", "content": "PROMPT TEXT"}]}
    client.close()


def test_http_client_omits_auth_header_without_key():
    payload = {"choices": [{"message": {"content": "x"}}]}
    transport, captured = _transport_returning(payload)
    client = HttpJudgeClient("http://judge.local/", model="m", transport=transport)
    client.send("p", temperature=0.0)
    assert "authorization" not in captured[0].headers
    client.close()


def test_http_client_error_status_is_transport_error():
    transport, _ = _transport_returning({"err": "boom"}, status=500)
    client = HttpJudgeClient("http://judge.local/", model="m", transport=transport)
    with pytest.raises(JudgeTransportError):
        client.send("p", temperature=0.0)
    client.close()


def test_http_client_malformed_body_is_transport_error():
    transport, _ = _transport_returning({"unexpected": []})
    client = HttpJudgeClient("http://judge.local/", model="m", transport=transport)
    with pytest.raises(JudgeTransportError):
        client.send("p", temperature=0.0)
    client.close()


def test_judge_client_from_env():
    assert judge_client_from_env({}) is None
    client = judge_client_from_env({
        "XAGEN_JUDGE_ENDPOINT": "http://judge.local/v1",
        "XAGEN_JUDGE_MODEL": "judge-2",
        "XAGEN_JUDGE_TIMEOUT": "5",
    })
    assert client is not None
    assert client.endpoint == "http://judge.local/v1"
    assert client.model == "judge-2"
    client.close()


# --------------------------------------------------------------------------
# Scheduler
# --------------------------------------------------------------------------


class _ConcurrencyProbe:
    """Counts concurrent sends per session id embedded in the prompt."""

    def __init__(self, delay: float):
        self.delay = delay
        self._lock = threading.Lock()
        self.current = 0
        self.max_seen = 0

    def send(self, prompt: str, temperature: float) -> str:
        with self._lock:
            self.current += 1
            self.max_seen = max(self.max_seen, self.current)
        time.sleep(self.delay)
        with self._lock:
            self.current -= 1
        return '{"label": "yes", "rationale": "r"}'


def _request(session: str, task: str) -> JudgeRequest:
    return JudgeRequest(session_id=session, task_id=task, task_description="d",
                        expected_output="e", expert_feedback="none", final_answer="a")


def test_scheduler_caps_per_session_inflight():
    probe = _ConcurrencyProbe(delay=0.15)
    scheduler = JudgeScheduler(probe, max_inflight=2)
    try:
        for i in range(6):
            scheduler.submit(_request("s1", f"t{i}"))
        assert scheduler.wait_idle("s1", timeout=10)
        assert probe.max_seen <= 2
    finally:
        scheduler.shutdown()


def test_scheduler_submit_does_not_block():
    probe = _ConcurrencyProbe(delay=0.5)
    scheduler = JudgeScheduler(probe)
    try:
        start = time.monotonic()
        scheduler.submit(_request("s1", "t1"))
        assert time.monotonic() - start < 0.25
        assert scheduler.wait_idle("s1", timeout=10)
    finally:
        scheduler.shutdown()


def test_scheduler_callbacks_and_error_capture():
    results: list[EvaluationResult] = []
    errors: list[EvaluationError] = []
    client = MockJudgeClient(rules=(
        ("TASK DESCRIPTION: good", '{"label": "yes", "rationale": "fine"}'),
        ("TASK DESCRIPTION: bad", "garbled nonsense"),
    ))
    scheduler = JudgeScheduler(client, on_result=results.append, on_error=errors.append)
    try:
        good = JudgeRequest(session_id="s1", task_id="t_good", task_description="good",
                            expected_output="e", expert_feedback="none", final_answer="a")
        bad = JudgeRequest(session_id="s1", task_id="t_bad", task_description="bad",
                           expected_output="e", expert_feedback="none", final_answer="a")
        scheduler.submit(good)
        scheduler.submit(bad)
        assert scheduler.wait_idle("s1", timeout=10)
        assert [r.task_id for r in results] == ["t_good"]
        assert [e.task_id for e in errors] == ["t_bad"]
        assert [e.task_id for e in scheduler.errors["s1"]] == ["t_bad"]
    finally:
        scheduler.shutdown()


def test_scheduler_wait_idle_times_out_while_busy():
    probe = _ConcurrencyProbe(delay=0.5)
    scheduler = JudgeScheduler(probe)
    try:
        scheduler.submit(_request("s1", "t1"))
        assert not scheduler.wait_idle("s1", timeout=0.05)
        assert scheduler.wait_idle("s1", timeout=10)
    finally:
        scheduler.shutdown()


def test_label_scores_table():
    assert LABEL_SCORES == {"yes": 1.0, "no": 0.0, "unsure": 0.5}
