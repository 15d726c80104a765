/** Console wiring: project picker, session view, one WS per open session. */

import { GatewayClient } from "./api.js";
import { clear, el } from "./dom.js";
import { detailsDataFromSnapshot, renderDetails, type DetailsData } from "./components/details.js";
import { renderConfigEditor } from "./components/configEditor.js";
import { renderFlowchart } from "./components/flowchart.js";
import { renderPlayback, renderTerminal } from "./components/playback.js";
import {
  applyFrame,
  applySummaries,
  fromSnapshot,
  seedEvents,
  type ViewModel,
} from "./viewmodel.js";
import type { Frame, SnapshotPayload } from "./types.js";

interface Panels {
  flowchart: HTMLElement;
  details: HTMLElement;
  terminal: HTMLElement;
  playback: HTMLElement;
  config: HTMLElement;
  sessions: HTMLElement;
}

export class SessionView {
  vm: ViewModel | null = null;
  private socket: WebSocket | null = null;
  private details: DetailsData = { agents: {}, tasks: {}, evaluations: [], feedback: [] };

  constructor(
    private readonly client: GatewayClient,
    private readonly panels: Panels,
  ) {}

  /** Open (or reopen) a session: fresh snapshot, then frames. */
  open(sessionId: string): void {
    this.socket?.close();
    const socket = new WebSocket(this.client.streamUrl(sessionId));
    this.socket = socket;
    socket.onmessage = (message: MessageEvent<string>) => {
      void this.onFrame(JSON.parse(message.data) as Frame);
    };
    socket.onclose = () => {
      if (this.socket === socket) this.socket = null;
    };
  }

  play(fromSeq: number): void {
    if (!this.vm) return;
    const socket = new WebSocket(this.client.streamUrl(this.vm.sessionId));
    this.socket?.close();
    this.socket = socket;
    socket.onopen = () => {
      socket.send(JSON.stringify({ cmd: "replay", from_seq: fromSeq, rate: 20 }));
    };
    socket.onmessage = (message: MessageEvent<string>) => {
      const frame = JSON.parse(message.data) as Frame;
      if (frame.type === "snapshot" || !this.vm) return; // keep the scrubbed view
      applyFrame(this.vm, frame);
      if (frame.type === "event" && frame.seq !== null) this.vm.cursor = frame.seq;
      this.renderAll();
    };
  }

  private async onFrame(frame: Frame): Promise<void> {
    if (frame.type === "snapshot") {
      const payload = frame.payload as unknown as SnapshotPayload;
      this.vm = fromSnapshot(payload, frame.seq ?? -1);
      await this.hydrate(payload);
      this.renderAll();
      return;
    }
    if (!this.vm) return;
    applyFrame(this.vm, frame);
    if (frame.type === "run_status") {
      // The judge may still be scoring the last task; fresh summaries close
      // the gap between the broadcast stream and the stored history.
      const taskIds = this.vm.graph.nodes.filter((n) => n.kind === "task").map((n) => n.id);
      applySummaries(this.vm, await this.client.summaries(this.vm.projectId, taskIds));
    }
    this.renderAll();
  }

  private async hydrate(snapshot: SnapshotPayload): Promise<void> {
    if (!this.vm) return;
    const events = await this.client.events(this.vm.sessionId);
    seedEvents(this.vm, events);
    const sessions = await this.client.sessions(this.vm.projectId);
    const record = sessions.find((s) => s.session_id === this.vm?.sessionId);
    if (record) {
      const config = detailsDataFromSnapshot(record.config_snapshot);
      this.details.agents = config.agents;
      this.details.tasks = config.tasks;
    }
    if (snapshot.run_status === "finished" && this.vm) {
      this.vm.cursor = this.vm.lastSeq;
    }
  }

  async select(nodeId: string): Promise<void> {
    if (!this.vm) return;
    this.vm.selected = nodeId;
    const kind = this.vm.graph.nodes.find((n) => n.id === nodeId)?.kind;
    if (kind === "task") {
      const [evaluations, feedback] = await Promise.all([
        this.client.evaluations(this.vm.projectId, nodeId),
        this.client.feedback(this.vm.projectId, nodeId),
      ]);
      this.details.evaluations = evaluations.history;
      this.details.feedback = feedback;
    } else {
      this.details.evaluations = [];
      this.details.feedback = [];
    }
    this.renderAll();
  }

  renderAll(): void {
    if (!this.vm) return;
    const vm = this.vm;
    renderFlowchart(this.panels.flowchart, vm, {
      onSelect: (nodeId) => void this.select(nodeId),
    });
    renderDetails(this.panels.details, vm, this.details, this.client, {
      onFeedbackSubmitted: () => void this.select(vm.selected ?? ""),
    });
    renderTerminal(this.panels.terminal, vm);
    renderPlayback(this.panels.playback, this.client, vm, {
      onViewChanged: () => this.renderAll(),
      onPlay: (fromSeq) => this.play(fromSeq),
    });
  }
}

export async function boot(root: HTMLElement, baseUrl: string): Promise<void> {
  const client = new GatewayClient(baseUrl);
  const panels: Panels = {
    sessions: el("aside", { class: "panel sessions" }),
    flowchart: el("section", { class: "panel flowchart-panel" }),
    details: el("aside", { class: "panel details" }),
    terminal: el("section", { class: "panel terminal-panel" }),
    playback: el("nav", { class: "panel playback" }),
    config: el("section", { class: "panel config" }),
  };
  clear(root);
  root.append(
    panels.sessions,
    panels.flowchart,
    panels.details,
    panels.playback,
    panels.terminal,
    panels.config,
  );

  const view = new SessionView(client, panels);
  const projects = await client.listProjects();
  const list = el("ul", { class: "project-list" });
  for (const project of projects) {
    const openSessions = el("ul", { class: "session-list" });
    const run = el("button", { type: "button" }, ["Run"]);
    run.addEventListener("click", () => {
      void client.startRun(project.project_id).then((sessionId) => {
        view.open(sessionId);
      });
    });
    const item = el("li", {}, [project.project_id, run, openSessions]);
    void client.sessions(project.project_id).then((sessions) => {
      for (const session of sessions) {
        const openButton = el("button", { type: "button" }, [
          `${session.session_id.slice(0, 8)} (${session.ended_at ? "finished" : "live"})`,
        ]);
        openButton.addEventListener("click", () => view.open(session.session_id));
        openSessions.append(el("li", {}, [openButton]));
      }
    });
    void client.getConfig(project.project_id, "agents.yaml").then((content) => {
      renderConfigEditor(panels.config, client, project.project_id, "agents.yaml", content, {
        onSaved: () => undefined,
        onRerun: () => {
          void client.startRun(project.project_id).then((sessionId) => view.open(sessionId));
        },
      });
    });
    list.append(item);
  }
  panels.sessions.append(el("h2", {}, ["Projects"]), list);
}
