/** The console's view model: a pure fold over the gateway's frame stream.
 *
 * Node visual statuses come exclusively from the delta stream (orphan deltas
 * land in a tray, never in the node table), rings fold evaluation frames
 * into the windowed tails seeded by the snapshot, and the terminal pane is
 * the rendered event text in sequence order.  Playback reuses the same
 * structure: seeking swaps in a replayed state document and moves the
 * cursor; the terminal shows only lines at or before the cursor.
 */

import { foldScore, ringFromSummary, type RingState } from "./rings.js";
import type {
  DeltaDoc,
  EvaluationDoc,
  EvaluationErrorDoc,
  EvaluationFramePayload,
  EventDoc,
  FeedbackDoc,
  Frame,
  GraphDoc,
  NodeStatus,
  RunStatusPayload,
  SnapshotPayload,
  StateDoc,
  SummaryDoc,
} from "./types.js";

export interface TerminalLine {
  seq: number;
  text: string;
  marker: boolean;
}

export interface ViewModel {
  sessionId: string;
  projectId: string;
  runStatus: "live" | "finished";
  exitCode: number | null;
  finished: boolean;
  graph: GraphDoc;
  statuses: Record<string, NodeStatus>;
  activatedAt: Record<string, number | null>;
  completedAt: Record<string, number | null>;
  lastSeq: number;
  rings: Record<string, RingState>;
  evaluations: EvaluationDoc[];
  evaluationErrors: EvaluationErrorDoc[];
  feedback: FeedbackDoc[];
  orphanTray: DeltaDoc[];
  terminal: TerminalLine[];
  /** Latest final answer per task, from final_answer_completed events. */
  finalAnswers: Record<string, string>;
  /** Playback cursor; tracks lastSeq while live. */
  cursor: number;
  selected: string | null;
}

/** Render one event as terminal text, marker lines highlighted. */
export function eventText(event: EventDoc): TerminalLine[] {
  const line = (text: string, marker: boolean): TerminalLine => ({
    seq: event.seq,
    text,
    marker,
  });
  const body = (heading: string): TerminalLine[] => [
    line(heading, true),
    ...event.payload.split("\n").filter((t) => t.length > 0).map((t) => line(t, false)),
  ];
  switch (event.kind) {
    case "agent_activated":
      return [line(`# Agent: ${event.subject_id ?? ""}`, true)];
    case "task_started":
      return [line(`## Task: ${event.subject_id ?? ""}`, true)];
    case "tool_call_started":
      return [line(`## Using tool: ${event.subject_id ?? ""}`, true)];
    case "tool_input":
      return body("## Tool Input:");
    case "tool_output":
      return body("## Tool Output:");
    case "final_answer_started":
      return [line("## Final Answer:", true)];
    case "final_answer_completed":
      return event.payload.split("\n").map((t) => line(t, false));
    case "workflow_completed":
      return [line(`[workflow completed: ${event.payload}]`, true)];
    case "raw_line":
      return [line(event.payload, false)];
  }
}

function statusTables(state: StateDoc): {
  statuses: Record<string, NodeStatus>;
  activatedAt: Record<string, number | null>;
  completedAt: Record<string, number | null>;
} {
  const statuses: Record<string, NodeStatus> = {};
  const activatedAt: Record<string, number | null> = {};
  const completedAt: Record<string, number | null> = {};
  for (const [id, node] of Object.entries(state.nodes)) {
    statuses[id] = node.status;
    activatedAt[id] = node.activated_at_seq;
    completedAt[id] = node.completed_at_seq;
  }
  return { statuses, activatedAt, completedAt };
}

/** Build the view model from the snapshot frame that opens every stream. */
export function fromSnapshot(snapshot: SnapshotPayload, snapshotSeq: number): ViewModel {
  const rings: Record<string, RingState> = {};
  for (const [taskId, summary] of Object.entries(snapshot.summaries)) {
    rings[taskId] = ringFromSummary(summary);
  }
  return {
    sessionId: snapshot.session_id,
    projectId: snapshot.project_id,
    runStatus: snapshot.run_status,
    exitCode: null,
    finished: snapshot.state.finished,
    graph: snapshot.graph,
    ...statusTables(snapshot.state),
    lastSeq: snapshotSeq,
    rings,
    evaluations: [],
    evaluationErrors: [],
    feedback: [],
    orphanTray: [],
    terminal: [],
    finalAnswers: {},
    cursor: snapshotSeq,
    selected: null,
  };
}

/** Backfill terminal text for events that predate the subscription. */
export function seedEvents(vm: ViewModel, events: EventDoc[]): void {
  const lines = events.flatMap(eventText);
  vm.terminal = [...lines, ...vm.terminal].sort((a, b) => a.seq - b.seq);
  for (const event of events) {
    if (event.kind === "final_answer_completed" && event.subject_id) {
      vm.finalAnswers[event.subject_id] = event.payload;
    }
  }
}

function applyDelta(vm: ViewModel, delta: DeltaDoc): void {
  if (delta.orphan || delta.new_status === null) {
    vm.orphanTray.push(delta);
    return;
  }
  vm.statuses[delta.node_id] = delta.new_status;
  if (delta.new_status === "active") {
    vm.activatedAt[delta.node_id] = delta.seq;
  } else if (delta.new_status === "completed" || delta.new_status === "failed") {
    vm.completedAt[delta.node_id] = delta.seq;
  }
}

function applyEvaluation(vm: ViewModel, payload: EvaluationFramePayload): void {
  if (payload.status === "error") {
    const { status: _status, ...doc } = payload;
    vm.evaluationErrors.push(doc as EvaluationErrorDoc);
    return;
  }
  const { status: _status, ...doc } = payload;
  const result = doc as EvaluationDoc;
  vm.evaluations.push(result);
  const ring = vm.rings[result.task_id];
  if (ring) vm.rings[result.task_id] = foldScore(ring, result.score);
}

/** Fold one WS frame; the one mutation path every view observes. */
export function applyFrame(vm: ViewModel, frame: Frame): void {
  switch (frame.type) {
    case "event": {
      const event = frame.payload as unknown as EventDoc;
      vm.terminal.push(...eventText(event));
      vm.lastSeq = event.seq;
      if (vm.cursor === vm.lastSeq - 1 || vm.runStatus === "live") {
        vm.cursor = event.seq;
      }
      if (event.kind === "final_answer_completed" && event.subject_id) {
        vm.finalAnswers[event.subject_id] = event.payload;
      }
      if (event.kind === "workflow_completed") vm.finished = true;
      break;
    }
    case "delta":
      applyDelta(vm, frame.payload as unknown as DeltaDoc);
      break;
    case "evaluation":
      applyEvaluation(vm, frame.payload as unknown as EvaluationFramePayload);
      break;
    case "feedback":
      vm.feedback.push(frame.payload as unknown as FeedbackDoc);
      break;
    case "run_status": {
      const payload = frame.payload as unknown as RunStatusPayload;
      vm.runStatus = "finished";
      vm.exitCode = payload.exit_code;
      break;
    }
    case "snapshot":
      break; // a fresh snapshot means a fresh view model; handled by the app
  }
}

/** Swap in a replayed state document (playback seek). */
export function applySeek(vm: ViewModel, state: StateDoc, cursor: number): void {
  const tables = statusTables(state);
  vm.statuses = tables.statuses;
  vm.activatedAt = tables.activatedAt;
  vm.completedAt = tables.completedAt;
  vm.finished = state.finished;
  vm.cursor = cursor;
}

/** Refresh rings from the evaluations route (used when a run finishes). */
export function applySummaries(vm: ViewModel, summaries: Record<string, SummaryDoc>): void {
  for (const [taskId, summary] of Object.entries(summaries)) {
    vm.rings[taskId] = ringFromSummary(summary);
  }
}

/** The terminal pane in lockstep with the playback cursor. */
export function visibleTerminal(vm: ViewModel): TerminalLine[] {
  return vm.terminal.filter((line) => line.seq <= vm.cursor);
}
