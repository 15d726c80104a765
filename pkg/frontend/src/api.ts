/** Typed client for the gateway's HTTP routes and WS endpoint. */

import type {
  ConfigVersionDoc,
  ErrorDoc,
  EvaluationDoc,
  EventDoc,
  FeedbackDoc,
  GraphDoc,
  ProjectDoc,
  SessionDoc,
  StateDoc,
  SummaryDoc,
} from "./types.js";

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${status} ${code}: ${detail}`);
    this.name = "GatewayError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let code = "error";
      let detail = response.statusText;
      try {
        const body = (await response.json()) as ErrorDoc;
        code = body.error ?? code;
        detail = body.detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new GatewayError(response.status, code, detail);
    }
    return response;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  // -- projects and runs ----------------------------------------------------

  listProjects(): Promise<ProjectDoc[]> {
    return this.json("/projects");
  }

  registerProject(doc: Omit<ProjectDoc, "v">): Promise<ProjectDoc> {
    return this.json("/projects", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(doc),
    });
  }

  graph(projectId: string): Promise<GraphDoc> {
    return this.json(`/projects/${encodeURIComponent(projectId)}/graph`);
  }

  async startRun(projectId: string): Promise<string> {
    const doc = await this.json<{ session_id: string }>(
      `/projects/${encodeURIComponent(projectId)}/runs`,
      { method: "POST" },
    );
    return doc.session_id;
  }

  stopSession(sessionId: string): Promise<SessionDoc> {
    return this.json(`/sessions/${encodeURIComponent(sessionId)}/stop`, {
      method: "POST",
    });
  }

  sessions(projectId: string): Promise<SessionDoc[]> {
    return this.json(`/sessions?project_id=${encodeURIComponent(projectId)}`);
  }

  // -- session data -----------------------------------------------------------

  events(sessionId: string, fromSeq?: number, toSeq?: number): Promise<EventDoc[]> {
    const params = new URLSearchParams();
    if (fromSeq !== undefined) params.set("from", String(fromSeq));
    if (toSeq !== undefined) params.set("to", String(toSeq));
    const query = params.toString();
    return this.json(
      `/sessions/${encodeURIComponent(sessionId)}/events${query ? "?" + query : ""}`,
    );
  }

  state(sessionId: string, atSeq?: number): Promise<StateDoc> {
    const query = atSeq !== undefined ? `?at_seq=${atSeq}` : "";
    return this.json(`/sessions/${encodeURIComponent(sessionId)}/state${query}`);
  }

  // -- feedback and evaluations -------------------------------------------------

  submitFeedback(
    sessionId: string,
    taskId: string,
    comment: string,
    metricName?: string,
  ): Promise<FeedbackDoc> {
    return this.json(
      `/sessions/${encodeURIComponent(sessionId)}/tasks/${encodeURIComponent(taskId)}/feedback`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ comment, metric_name: metricName ?? null }),
      },
    );
  }

  feedback(projectId: string, taskId: string): Promise<FeedbackDoc[]> {
    return this.json(
      `/projects/${encodeURIComponent(projectId)}/tasks/${encodeURIComponent(taskId)}/feedback`,
    );
  }

  evaluations(
    projectId: string,
    taskId: string,
  ): Promise<{ history: EvaluationDoc[]; summary: SummaryDoc }> {
    return this.json(
      `/projects/${encodeURIComponent(projectId)}/tasks/${encodeURIComponent(taskId)}/evaluations`,
    );
  }

  /** Fetch fresh summaries for every task (used when a run finishes). */
  async summaries(projectId: string, taskIds: string[]): Promise<Record<string, SummaryDoc>> {
    const out: Record<string, SummaryDoc> = {};
    for (const taskId of taskIds) {
      out[taskId] = (await this.evaluations(projectId, taskId)).summary;
    }
    return out;
  }

  // -- config ------------------------------------------------------------------

  async getConfig(projectId: string, file: string): Promise<string> {
    const response = await this.request(
      `/projects/${encodeURIComponent(projectId)}/config/${encodeURIComponent(file)}`,
    );
    return response.text();
  }

  putConfig(projectId: string, file: string, content: string): Promise<ConfigVersionDoc> {
    return this.json(
      `/projects/${encodeURIComponent(projectId)}/config/${encodeURIComponent(file)}`,
      { method: "PUT", headers: { "content-type": "application/yaml" }, body: content },
    );
  }

  // -- streaming -----------------------------------------------------------------

  /** ws:// URL for a session's frame stream. */
  streamUrl(sessionId: string): string {
    return (
      this.base.replace(/^http/, "ws") +
      `/sessions/${encodeURIComponent(sessionId)}/stream`
    );
  }
}
