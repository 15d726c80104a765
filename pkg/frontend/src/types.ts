/** Wire types for the gateway's HTTP and WebSocket surface. */

export type NodeKind = "task" | "agent" | "tool";
export type EdgeKind = "order" | "assignment" | "uses";
export type NodeStatus = "pending" | "active" | "completed" | "failed";
export type RingLevel = "success" | "caution" | "failure" | "neutral";

export interface GraphNodeDoc {
  id: string;
  kind: NodeKind;
}

export interface GraphEdgeDoc {
  from: string;
  to: string;
  kind: EdgeKind;
}

export interface GraphDoc {
  v: number;
  nodes: GraphNodeDoc[];
  edges: GraphEdgeDoc[];
}

export type EventKind =
  | "agent_activated"
  | "task_started"
  | "tool_call_started"
  | "tool_input"
  | "tool_output"
  | "final_answer_started"
  | "final_answer_completed"
  | "workflow_completed"
  | "raw_line";

export interface EventDoc {
  v: number;
  seq: number;
  kind: EventKind;
  subject_id: string | null;
  payload: string;
  raw_span: [number, number];
}

export interface NodeStateDoc {
  status: NodeStatus;
  activated_at_seq: number | null;
  completed_at_seq: number | null;
}

export interface StateDoc {
  v: number;
  session_id: string;
  last_applied_seq: number;
  finished: boolean;
  nodes: Record<string, NodeStateDoc>;
}

export interface DeltaDoc {
  node_id: string;
  old_status: NodeStatus | null;
  new_status: NodeStatus | null;
  seq: number;
  orphan?: boolean;
}

export interface SummaryDoc {
  v: number;
  task_id: string;
  window: number;
  mean_score: number | null;
  sample_count: number;
  scores: number[];
  ring: RingLevel;
}

export interface EvaluationDoc {
  v: number;
  session_id: string;
  task_id: string;
  label: "yes" | "no" | "unsure";
  score: number;
  rationale: string;
  created_at: string;
}

export interface EvaluationErrorDoc {
  v: number;
  session_id: string;
  task_id: string;
  cause: string;
  raw_response: string;
}

export interface FeedbackDoc {
  v: number;
  feedback_id: string;
  session_id: string;
  task_id: string;
  comment: string;
  metric_name: string | null;
  created_at: string;
}

export interface SessionDoc {
  v: number;
  session_id: string;
  project_id: string;
  started_at: string;
  ended_at: string | null;
  exit_code: number | null;
  exit_payload: string | null;
  config_snapshot: Record<string, string>;
  event_count: number;
  raw_truncated: boolean;
}

export interface ProjectDoc {
  v: number;
  project_id: string;
  root: string;
  run_command: string[];
  env_overrides: Record<string, string>;
  dialect: string;
  judge_window: number;
}

export interface ConfigVersionDoc {
  v: number;
  file: string;
  timestamp: string;
  content_digest: string;
  backup_name: string;
}

export interface ErrorDoc {
  error: string;
  detail: string;
}

/** One WS message: snapshot first, then event/delta/evaluation/feedback/run_status. */
export interface Frame {
  v: number;
  type: "snapshot" | "event" | "delta" | "evaluation" | "feedback" | "run_status";
  seq: number | null;
  payload: Record<string, unknown>;
}

export interface SnapshotPayload {
  session_id: string;
  project_id: string;
  run_status: "live" | "finished";
  state: StateDoc;
  graph: GraphDoc;
  summaries: Record<string, SummaryDoc>;
}

export interface RunStatusPayload {
  session_id: string;
  status: "finished";
  exit_code: number | null;
  exit_payload: string | null;
}

export type EvaluationFramePayload =
  | (EvaluationDoc & { status: "ok" })
  | (EvaluationErrorDoc & { status: "error" });
